#include "pwi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "pwi/error.hpp"
#include "pwi/io.hpp"
#include "pwi/provider.hpp"
#include "pwi/report.hpp"
#include "pwi/rsa.hpp"
#include "pwi/text.hpp"
#include "pwi/zeroshot.hpp"

namespace pwi {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// configuration

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(Errc::InvalidConfig, "unknown key '" + key + "' in " + where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() ? base / path : path;
}

void apply_overrides(json& j, const ConfigOverrides& o) {
    if (o.seed) j["seed"] = *o.seed;
    if (o.output_dir) j["output_dir"] = o.output_dir->string();
    if (o.provider) {
        const auto& p = *o.provider;
        if (p == "synthetic") {
            json prov = j.contains("provider") && j["provider"].is_object() ? j["provider"] : json::object();
            prov["type"] = "synthetic";
            prov.erase("command");
            prov.erase("batch_size");
            prov.erase("timeout_ms");
            j["provider"] = prov;
        } else if (p.rfind("cmd:", 0) == 0 && p.size() > 4) {
            j["provider"] = {{"type", "external"}, {"command", p.substr(4)}};
        } else {
            throw ConfigError(Errc::InvalidConfig, "--provider must be 'synthetic' or 'cmd:<command>'");
        }
    }
    if (o.gamma) {
        if (!j.contains("provider") || !j["provider"].is_object()) j["provider"] = {{"type", "synthetic"}};
        j["provider"]["gamma"] = *o.gamma;
    }
    if (o.no_cache) j["cache"] = false;
    if (o.timestamps) j["timestamps"] = true;
}

}  // namespace

RunConfig parse_run_config(json j, const fs::path& base_dir, const ConfigOverrides& overrides) {
    if (!j.is_object()) throw ConfigError(Errc::InvalidConfig, "config must be a JSON object");
    apply_overrides(j, overrides);
    reject_unknown_keys(j,
                        {"manifest", "word_lists", "tasks", "prompt", "sweep_prompts", "prompt_file", "provider",
                         "render", "logit_scale", "word_vectors", "include_own_label", "output_dir", "seed", "cache",
                         "timestamps", "write_stimuli", "rsa_words", "workers"},
                        "config");
    RunConfig c;
    try {
        if (!j.contains("manifest")) throw ConfigError(Errc::InvalidConfig, "config needs 'manifest'");
        c.manifest = resolve(base_dir, j["manifest"].get<std::string>());
        if (!j.contains("word_lists") || !j["word_lists"].is_array() || j["word_lists"].empty())
            throw ConfigError(Errc::InvalidConfig, "config needs a nonempty 'word_lists' array");
        for (const auto& w : j["word_lists"]) c.word_lists.push_back(resolve(base_dir, w.get<std::string>()));
        if (j.contains("tasks")) {
            c.tasks.clear();
            for (const auto& t : j["tasks"]) c.tasks.push_back(parse_task_level(t.get<std::string>()));
            if (c.tasks.empty()) throw ConfigError(Errc::InvalidConfig, "'tasks' must not be empty");
        }
        c.prompt = j.value("prompt", c.prompt);
        if (j.contains("sweep_prompts")) c.sweep_prompts = j["sweep_prompts"].get<std::vector<std::string>>();
        if (j.contains("prompt_file")) c.prompt_file = resolve(base_dir, j["prompt_file"].get<std::string>());

        if (j.contains("provider")) {
            const auto& p = j["provider"];
            if (!p.is_object()) throw ConfigError(Errc::InvalidConfig, "'provider' must be an object");
            const auto type = p.value("type", std::string("synthetic"));
            if (type == "synthetic") {
                reject_unknown_keys(p, {"type", "vocabulary", "seed", "gamma", "dim"}, "provider");
                c.provider.kind = ProviderSpec::Kind::Synthetic;
                if (p.contains("vocabulary")) c.provider.vocabulary = p["vocabulary"].get<std::vector<std::string>>();
                if (p.contains("seed")) c.provider.seed = p["seed"].get<std::uint64_t>();
                c.provider.gamma = p.value("gamma", 0.0);
                c.provider.dim = p.value("dim", std::size_t{64});
                if (!(c.provider.gamma >= 0.0 && c.provider.gamma <= 1.0))
                    throw ConfigError(Errc::InvalidConfig, "provider.gamma must be in [0, 1]");
                if (c.provider.dim < 2) throw ConfigError(Errc::InvalidConfig, "provider.dim must be >= 2");
            } else if (type == "external") {
                reject_unknown_keys(p, {"type", "command", "batch_size", "timeout_ms"}, "provider");
                c.provider.kind = ProviderSpec::Kind::External;
                c.provider.command = p.value("command", std::string());
                if (c.provider.command.empty())
                    throw ConfigError(Errc::InvalidConfig, "external provider needs a 'command'");
                c.provider.batch_size = p.value("batch_size", std::size_t{32});
                c.provider.timeout_ms = p.value("timeout_ms", std::int64_t{120000});
                if (c.provider.batch_size == 0 || c.provider.timeout_ms <= 0)
                    throw ConfigError(Errc::InvalidConfig, "provider batch_size and timeout_ms must be positive");
            } else {
                throw ConfigError(Errc::InvalidConfig, "provider.type must be 'synthetic' or 'external'");
            }
        }

        c.render.font_file = default_font_path();
        if (j.contains("render")) {
            const auto& r = j["render"];
            reject_unknown_keys(r, {"font_file", "color", "rel_height", "anchor", "offset"}, "render");
            if (r.contains("font_file")) c.render.font_file = resolve(base_dir, r["font_file"].get<std::string>());
            if (r.contains("color")) {
                const auto col = r["color"].get<std::vector<int>>();
                if (col.size() != 3) throw ConfigError(Errc::InvalidConfig, "render.color must have 3 components");
                c.render.color = {col[0], col[1], col[2]};
            }
            c.render.rel_height = r.value("rel_height", c.render.rel_height);
            if (r.contains("anchor")) c.render.anchor = parse_anchor(r["anchor"].get<std::string>());
            if (r.contains("offset")) {
                const auto off = r["offset"].get<std::vector<int>>();
                if (off.size() != 2) throw ConfigError(Errc::InvalidConfig, "render.offset must be [dx, dy]");
                c.render.dx = off[0];
                c.render.dy = off[1];
            }
        }
        c.render.validate();

        c.logit_scale = j.value("logit_scale", c.logit_scale);
        if (!(c.logit_scale > 0.0)) throw ConfigError(Errc::InvalidConfig, "logit_scale must be positive");
        if (j.contains("word_vectors")) c.word_vectors = resolve(base_dir, j["word_vectors"].get<std::string>());
        c.include_own_label = j.value("include_own_label", c.include_own_label);
        c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
        c.seed = j.value("seed", std::uint64_t{0});
        c.cache = j.value("cache", true);
        c.timestamps = j.value("timestamps", false);
        c.write_stimuli = j.value("write_stimuli", false);
        if (j.contains("rsa_words")) c.rsa_words = j["rsa_words"].get<std::vector<std::string>>();
        c.workers = j.value("workers", std::size_t{0});
    } catch (const json::exception& e) {
        throw ConfigError(Errc::InvalidConfig, std::string("config: ") + e.what());
    }

    json digest_view = j;
    for (const char* k : {"output_dir", "cache", "timestamps", "workers"}) digest_view.erase(k);
    c.digest = sha256_hex(digest_view.dump());
    return c;
}

RunConfig load_run_config(const fs::path& path, const ConfigOverrides& overrides) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const DataError& e) {
        throw ConfigError(Errc::InvalidConfig, e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(std::move(j), path.parent_path(), overrides);
}

// ---------------------------------------------------------------------------
// shared machinery

namespace {

/// Re-throws module errors with the failing stage prepended.
template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        rethrow_with_context(e, std::string("stage '") + name + "'");
    } catch (const json::exception& e) {
        throw DataError(Errc::ParseError, std::string("stage '") + name + "': " + e.what());
    }
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex mu;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (!first_error) first_error = std::current_exception();
                        next = n;
                    }
                }
            });
    }
    if (first_error) std::rethrow_exception(first_error);
}

struct Inputs {
    Manifest manifest;
    std::vector<WordList> word_lists;
    std::vector<PromptTemplate> templates;
    std::optional<WordVectorStore> store;
    std::string store_id = "none";
};

Inputs load_inputs(const RunConfig& c) {
    Inputs in;
    in.manifest = stage("load manifest", [&] { return load_manifest(c.manifest); });
    for (const auto& p : c.word_lists)
        in.word_lists.push_back(stage("load word list", [&] {
            try {
                return load_word_list(p);
            } catch (const Error& e) {
                rethrow_with_context(e, p.string());
            }
        }));
    in.templates = builtin_templates();
    if (c.prompt_file) {
        for (auto& t : stage("load prompt templates", [&] { return load_templates(*c.prompt_file); })) {
            for (const auto& b : in.templates)
                if (b.id == t.id) throw ConfigError(Errc::InvalidTemplate, "template id '" + t.id + "' is already built in");
            in.templates.push_back(std::move(t));
        }
    }
    if (c.word_vectors) {
        in.store = stage("load word vectors", [&] { return WordVectorStore::load(*c.word_vectors); });
        in.store_id = c.word_vectors->filename().string() + "@sha256:" + sha256_hex(read_file(*c.word_vectors));
    }
    return in;
}

const PromptTemplate& find_template(const Inputs& in, const std::string& id) {
    for (const auto& t : in.templates)
        if (t.id == id) return t;
    throw ConfigError(Errc::UnknownTemplate, "unknown prompt template '" + id + "'");
}

std::vector<std::string> labels_for(const Inputs& in, TaskLevel task) {
    return task == TaskLevel::Superordinate ? in.manifest.taxonomy.superordinate_labels()
                                            : in.manifest.taxonomy.basic_labels();
}

std::vector<std::string> default_vocabulary(const Inputs& in, const RunConfig& c) {
    std::set<std::string> vocab;
    for (const auto& b : in.manifest.taxonomy.basic_labels()) vocab.insert(b);
    for (const auto& s : in.manifest.taxonomy.superordinate_labels()) vocab.insert(s);
    for (const auto& wl : in.word_lists)
        for (const auto& w : wl.words) vocab.insert(normalize_label(w));
    for (const auto& w : c.rsa_words) vocab.insert(normalize_label(w));
    return {vocab.begin(), vocab.end()};
}

struct Session {
    std::unique_ptr<Provider> provider;
    ProviderInfo info;
    std::unique_ptr<EmbeddingCache> cache;
    std::uint64_t seed = 0;
    std::string prng_id = "none";

    ~Session() {
        if (cache) {
            try {
                cache->flush();
            } catch (...) {
            }
        }
    }
};

std::unique_ptr<Session> open_session(const RunConfig& c, const Inputs& in) {
    auto s = std::make_unique<Session>();
    s->seed = c.seed;
    json identity;
    stage("provider handshake", [&] {
        if (c.provider.kind == ProviderSpec::Kind::Synthetic) {
            SyntheticProviderConfig sc;
            sc.vocabulary = c.provider.vocabulary ? *c.provider.vocabulary : default_vocabulary(in, c);
            sc.seed = c.provider.seed.value_or(c.seed);
            sc.gamma = c.provider.gamma;
            sc.dim = c.provider.dim;
            identity = {{"type", "synthetic"}, {"seed", sc.seed}, {"gamma", sc.gamma}, {"dim", sc.dim},
                        {"vocabulary", sc.vocabulary}};
            s->seed = sc.seed;
            s->prng_id = std::string(kSyntheticPrngId);
            s->provider = std::make_unique<SyntheticProvider>(std::move(sc));
        } else {
            SubprocessOptions opts;
            opts.batch_size = c.provider.batch_size;
            opts.timeout = std::chrono::milliseconds(c.provider.timeout_ms);
            s->provider = std::make_unique<SubprocessProvider>(c.provider.command, opts);
            identity = {{"type", "external"}, {"command", c.provider.command}};
        }
        s->info = s->provider->handshake();
        return 0;
    });
    const auto cache_name = s->info.name + "-" + sha256_hex(identity.dump()).substr(0, 12);
    std::optional<fs::path> store;
    if (c.cache) {
        std::string file = cache_name;
        for (auto& ch : file)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
        store = c.output_dir / "cache" / (file + ".json");
    }
    s->cache = std::make_unique<EmbeddingCache>(*s->provider, cache_name, store);
    return s;
}

RunMetadata make_meta(const RunConfig& c, const Inputs& in, const Session& s, std::vector<std::string> prompt_ids) {
    RunMetadata m;
    m.config_digest = c.digest;
    m.provider_name = s.info.name;
    m.provider_dim = s.info.dim;
    m.seed = s.seed;
    m.prng_id = s.prng_id;
    m.word_vectors_id = in.store_id;
    m.prompt_ids = std::move(prompt_ids);
    if (c.timestamps) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m.generated_at = buf;
    }
    return m;
}

// Key of one image as the provider sees it. Synthetic providers get metadata
// whose content is the image's label at the queried level (basic for RSA).
struct ImageKey {
    std::size_t image = 0;
    std::string content;  // synthetic only
    std::optional<std::string> word;
    auto operator<=>(const ImageKey&) const = default;
};

class ImageEmbedder {
public:
    ImageEmbedder(const RunConfig& c, const Inputs& in, Session& s) : c_(c), in_(in), s_(s) {}

    ImageKey key(std::size_t image, TaskLevel level, const std::optional<std::string>& word) const {
        ImageKey k{image, {}, word};
        if (!s_.provider->wants_pixels()) {
            const auto& img = in_.manifest.images[image];
            k.content = normalize_label(level == TaskLevel::Superordinate ? img.superordinate_label : img.basic_label);
        }
        return k;
    }

    void request(const ImageKey& k) { pending_.insert(k); }

    /// Embeds everything requested so far in one batch.
    void resolve(std::ostream& log) {
        std::vector<ImageKey> keys;
        for (const auto& k : pending_)
            if (!done_.count(k)) keys.push_back(k);
        pending_.clear();
        if (keys.empty()) return;

        std::vector<ImagePayload> payloads(keys.size());
        if (s_.provider->wants_pixels()) {
            log << "rendering " << keys.size() << " stimuli\n";
            stage("render", [&] {
                parallel_for(keys.size(), c_.workers, [&](std::size_t i) {
                    const auto& img = in_.manifest.images[keys[i].image];
                    try {
                        payloads[i] = EncodedImage{render(read_binary(in_.manifest.resolve(img)), keys[i].word, c_.render)};
                    } catch (const Error& e) {
                        rethrow_with_context(e, "image '" + img.id + "'");
                    }
                });
                return 0;
            });
        } else {
            for (std::size_t i = 0; i < keys.size(); ++i) payloads[i] = StimulusMeta{keys[i].content, keys[i].word};
        }
        log << "embedding " << keys.size() << " images\n";
        auto embs = stage("embed images", [&] { return s_.cache->embed_images(payloads); });
        for (std::size_t i = 0; i < keys.size(); ++i) done_.emplace(keys[i], std::move(embs[i]));
    }

    const EmbeddingVector& get(const ImageKey& k) const { return done_.at(k); }

private:
    const RunConfig& c_;
    const Inputs& in_;
    Session& s_;
    std::set<ImageKey> pending_;
    std::map<ImageKey, EmbeddingVector> done_;
};

class TextEmbedder {
public:
    explicit TextEmbedder(Session& s) : s_(s) {}

    void request(const std::string& text) { pending_.insert(text); }

    void resolve(std::ostream& log) {
        std::vector<std::string> texts;
        for (const auto& t : pending_)
            if (!done_.count(t)) texts.push_back(t);
        pending_.clear();
        if (texts.empty()) return;
        log << "embedding " << texts.size() << " prompts\n";
        auto embs = stage("embed texts", [&] { return s_.cache->embed_texts(texts); });
        for (std::size_t i = 0; i < texts.size(); ++i) done_.emplace(texts[i], std::move(embs[i]));
    }

    const EmbeddingVector& get(const std::string& text) const { return done_.at(text); }

private:
    Session& s_;
    std::set<std::string> pending_;
    std::map<std::string, EmbeddingVector> done_;
};

struct Trial {
    std::size_t image = 0;
    std::string word;
    ConditionCode condition;
    const PromptTemplate* prompt = nullptr;
};

std::vector<std::string> prompts_for(const PromptTemplate& t, const std::vector<std::string>& labels,
                                     const std::optional<std::string>& y) {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(instantiate_prompt(t, l, t.is_variable() ? y : std::nullopt));
    return out;
}

/// Classifies every trial against its no-word baseline under each template.
std::vector<PairRecord> collect_records(const RunConfig& c, const Inputs& in, Session& s,
                                        const std::vector<const PromptTemplate*>& templates, std::ostream& log) {
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < in.manifest.images.size(); ++i) index_of[in.manifest.images[i].id] = i;

    std::vector<Trial> trials;
    stage("plan trials", [&] {
        for (const auto* t : templates)
            for (auto task : c.tasks)
                for (const auto& wl : in.word_lists)
                    for (auto& spec : plan_trials(in.manifest.images, wl, task, c.include_own_label))
                        trials.push_back({index_of.at(spec.image_id), *spec.word, spec.condition, t});
        return 0;
    });
    log << "planned " << trials.size() << " trials\n";

    ImageEmbedder images(c, in, s);
    TextEmbedder texts(s);
    std::map<TaskLevel, std::vector<std::string>> labels;
    for (auto task : c.tasks) labels[task] = labels_for(in, task);

    for (const auto& tr : trials) {
        images.request(images.key(tr.image, tr.condition.task, std::nullopt));
        images.request(images.key(tr.image, tr.condition.task, tr.word));
        for (auto& p : prompts_for(*tr.prompt, labels[tr.condition.task], tr.word)) texts.request(p);
    }
    texts.resolve(log);
    images.resolve(log);

    // Text embeddings per (template, task, y) are assembled once.
    std::map<std::tuple<const PromptTemplate*, TaskLevel, std::string>, std::vector<EmbeddingVector>> label_embs;
    auto label_embeddings = [&](const Trial& tr) -> const std::vector<EmbeddingVector>& {
        const std::string y = tr.prompt->is_variable() ? tr.word : std::string();
        auto key = std::make_tuple(tr.prompt, tr.condition.task, y);
        auto it = label_embs.find(key);
        if (it != label_embs.end()) return it->second;
        std::vector<EmbeddingVector> v;
        for (const auto& p : prompts_for(*tr.prompt, labels[tr.condition.task], tr.word)) v.push_back(texts.get(p));
        return label_embs.emplace(key, std::move(v)).first->second;
    };

    std::vector<PairRecord> records;
    records.reserve(trials.size());
    stage("classify", [&] {
        for (const auto& tr : trials) {
            const auto& img = in.manifest.images[tr.image];
            try {
                const auto& embs = label_embeddings(tr);
                const auto& task_labels = labels[tr.condition.task];
                const auto base = classify(images.get(images.key(tr.image, tr.condition.task, std::nullopt)), embs,
                                           task_labels, c.logit_scale);
                const auto word = classify(images.get(images.key(tr.image, tr.condition.task, tr.word)), embs,
                                           task_labels, c.logit_scale);
                records.push_back(make_pair_record(img.id, tr.condition, tr.prompt->id, tr.word, base.predicted,
                                                   word.predicted, base.probabilities[base.predicted_index],
                                                   word.probabilities[word.predicted_index]));
            } catch (const Error& e) {
                rethrow_with_context(e, "image '" + img.id + "', word '" + tr.word + "'");
            }
        }
        return 0;
    });

    std::sort(records.begin(), records.end(), [](const PairRecord& a, const PairRecord& b) {
        return std::tie(a.image_id, a.word, a.prompt_id, a.condition) <
               std::tie(b.image_id, b.word, b.prompt_id, b.condition);
    });
    return records;
}

std::map<ConditionCode, double> rates_by_condition(const std::vector<PairRecord>& records) {
    std::set<ConditionCode> conditions;
    for (const auto& r : records) conditions.insert(r.condition);
    std::map<ConditionCode, double> rates;
    for (const auto& cnd : conditions) rates[cnd] = switching_rate(records, cnd);
    return rates;
}

std::vector<PairSimilarities> pair_similarities(const std::vector<PairRecord>& records, const Inputs& in) {
    std::vector<PairSimilarities> sims;
    sims.reserve(records.size());
    for (const auto& r : records) {
        PairSimilarities p;
        if (in.store) p.semantic = semantic_similarity(*in.store, r.orig_label, r.word);
        p.spelling = jaro_winkler(normalize_label(r.orig_label), normalize_label(r.word));
        sims.push_back(p);
    }
    return sims;
}

std::string file_safe(std::string s) {
    for (auto& ch : s)
        if (ch == '/') ch = '-';
        else if (ch == ' ') ch = '_';
    return s;
}

json counts_json(const Inputs& in, const std::vector<PairRecord>& records) {
    nlohmann::ordered_json counts;
    counts["images"] = in.manifest.images.size();
    counts["basic_labels"] = in.manifest.taxonomy.basic_labels().size();
    counts["superordinate_labels"] = in.manifest.taxonomy.superordinate_labels().size();
    nlohmann::ordered_json lists = nlohmann::ordered_json::array();
    for (const auto& wl : in.word_lists)
        lists.push_back({{"category", std::string(to_string(wl.category))}, {"words", wl.words.size()}});
    counts["word_lists"] = lists;
    std::map<std::string, std::size_t> per;
    for (const auto& r : records) ++per[r.prompt_id + " " + r.condition.code()];
    nlohmann::ordered_json pc = nlohmann::ordered_json::object();
    for (const auto& [k, v] : per) pc[k] = v;
    counts["records"] = pc;
    return json::parse(counts.dump());
}

void write_meta(const fs::path& dir, const RunMetadata& meta, const json& extra) {
    nlohmann::ordered_json j;
    j["meta"] = nlohmann::ordered_json::parse(meta.to_json_line());
    for (const auto& [k, v] : extra.items()) j[k] = nlohmann::ordered_json::parse(v.dump());
    write_artifact(dir, "meta.json", j.dump(2) + "\n");
}

json rsa_analysis(const RunConfig& c, const Inputs& in, Session& s, const RunMetadata& meta, const fs::path& dir,
                  std::ostream& log) {
    ImageEmbedder images(c, in, s);
    const auto n = in.manifest.images.size();
    std::vector<std::string> ids;
    std::map<std::string, std::string> categories;
    for (const auto& img : in.manifest.images) {
        ids.push_back(img.id);
        categories[img.id] = normalize_label(img.superordinate_label);
    }
    for (std::size_t i = 0; i < n; ++i) {
        images.request(images.key(i, TaskLevel::Basic, std::nullopt));
        for (const auto& w : c.rsa_words) images.request(images.key(i, TaskLevel::Basic, w));
    }
    images.resolve(log);

    auto build = [&](const std::optional<std::string>& word) {
        std::vector<EmbeddingVector> embs;
        for (std::size_t i = 0; i < n; ++i) embs.push_back(images.get(images.key(i, TaskLevel::Basic, word)));
        auto rdm = stage("compute rdm", [&] { return compute_rdm(embs, ids); });
        rdm.set_categories(categories);
        return rdm;
    };
    auto summarize = [&](const Rdm& rdm, const Rdm* original) {
        nlohmann::ordered_json j;
        j["mean_offdiag"] = mean_offdiag(rdm);
        try {
            j["cluster_index"] = cluster_index(rdm);
        } catch (const DataError&) {
            j["cluster_index"] = nullptr;
        }
        if (original) {
            try {
                j["spearman_vs_original"] = compare_rdms(rdm, *original);
            } catch (const DataError&) {
                j["spearman_vs_original"] = nullptr;
            }
        }
        return j;
    };

    const auto original = build(std::nullopt);
    write_artifact(dir, "rdm_original.csv", with_csv_header(meta, format_rdm_csv(original)));
    nlohmann::ordered_json out;
    out["original"] = summarize(original, nullptr);
    nlohmann::ordered_json words = nlohmann::ordered_json::object();
    for (const auto& w : c.rsa_words) {
        const auto rdm = build(w);
        const auto tag = "word_" + file_safe(normalize_label(w));
        write_artifact(dir, "rdm_" + tag + ".csv", with_csv_header(meta, format_rdm_csv(rdm)));
        words[normalize_label(w)] = summarize(rdm, &original);
    }
    out["words"] = words;
    nlohmann::ordered_json doc;
    doc["meta"] = nlohmann::ordered_json::parse(meta.to_json_line());
    doc["rsa"] = out;
    write_artifact(dir, "rsa.json", doc.dump(2) + "\n");
    return json::parse(out.dump());
}

}  // namespace

// ---------------------------------------------------------------------------
// subcommands

RunSummary run_pipeline(const RunConfig& c, std::ostream& log) {
    const auto in = load_inputs(c);
    const auto& tmpl = find_template(in, c.prompt);
    auto session = open_session(c, in);
    const auto meta = make_meta(c, in, *session, {tmpl.id});
    const fs::path dir = c.output_dir / "report";

    const auto records = collect_records(c, in, *session, {&tmpl}, log);
    const auto rates = stage("switching rates", [&] { return rates_by_condition(records); });

    RunSummary summary{dir, records.size(), {}};
    for (const auto& [cnd, v] : rates) summary.rates[cnd.code()] = v;

    stage("write report", [&] {
        bool full_table = true;
        for (const auto& cnd : kTableConditions) full_table = full_table && rates.count(cnd);
        if (full_table) {
            const auto table = emit_condition_table(rates, meta);
            write_artifact(dir, "table1.csv", table.grid_csv);
            write_artifact(dir, "table1_flat.csv", table.flat_csv);
            write_artifact(dir, "table1.txt", table.text);
        } else {
            log << "note: not all four table conditions were run; table1.csv skipped\n";
        }

        for (const auto& [cnd, _] : rates) {
            std::vector<PairRecord> subset;
            for (const auto& r : records)
                if (r.condition == cnd) subset.push_back(r);
            const auto code = file_safe(cnd.code());
            write_artifact(dir, "fig2_spelling_" + code + ".json",
                           emit_distribution_data(split_by_switch(subset, SimilarityMetric::Spelling),
                                                  "spelling " + cnd.code(), meta));
            if (in.store) {
                write_artifact(dir, "fig2_semantic_" + code + ".json",
                               emit_distribution_data(split_by_switch(subset, SimilarityMetric::Semantic, &*in.store),
                                                      "semantic " + cnd.code(), meta));
                const auto rel = switched_label_relatedness(subset, *in.store);
                nlohmann::ordered_json j;
                j["meta"] = nlohmann::ordered_json::parse(meta.to_json_line());
                j["label"] = "switched-label relatedness " + cnd.code();
                j["count"] = rel.values.size();
                j["median"] = median(rel.values) ? nlohmann::ordered_json(*median(rel.values)) : nlohmann::ordered_json(nullptr);
                j["values"] = rel.values;
                j["missing_count"] = rel.missing_count;
                write_artifact(dir, "relatedness_" + code + ".json", j.dump(2) + "\n");
            }
        }

        const auto sims = pair_similarities(records, in);
        write_artifact(dir, "pairs.csv", emit_pairs_csv(records, sims, meta));

        json extra;
        extra["counts"] = counts_json(in, records);
        nlohmann::ordered_json rj = nlohmann::ordered_json::object();
        for (const auto& [cnd, v] : rates) rj[cnd.code()] = v;
        extra["rates"] = json::parse(rj.dump());
        extra["logit_scale"] = c.logit_scale;
        extra["include_own_label"] = c.include_own_label;
        if (!c.rsa_words.empty()) extra["rsa"] = rsa_analysis(c, in, *session, meta, dir, log);
        write_meta(dir, meta, extra);
        return 0;
    });
    return summary;
}

RunSummary run_sweep(const RunConfig& c, std::ostream& log) {
    const auto in = load_inputs(c);
    std::vector<const PromptTemplate*> templates;
    if (c.sweep_prompts.empty()) {
        for (const auto& t : in.templates) templates.push_back(&t);
    } else {
        for (const auto& id : c.sweep_prompts) templates.push_back(&find_template(in, id));
    }
    std::vector<std::string> ids;
    for (const auto* t : templates) ids.push_back(t->id);

    auto session = open_session(c, in);
    const auto meta = make_meta(c, in, *session, ids);
    const fs::path dir = c.output_dir / "report";
    const auto records = collect_records(c, in, *session, templates, log);

    RunSummary summary{dir, records.size(), {}};
    std::vector<PromptRow> rows;
    stage("switching rates", [&] {
        for (const auto* t : templates) {
            std::vector<PairRecord> mine;
            for (const auto& r : records)
                if (r.prompt_id == t->id) mine.push_back(r);
            PromptRow row{t->id, rates_by_condition(mine)};
            for (const auto& [cnd, v] : row.rates) summary.rates[t->id + " " + cnd.code()] = v;
            rows.push_back(std::move(row));
        }
        return 0;
    });

    stage("write report", [&] {
        write_artifact(dir, "table2.csv", emit_prompt_table(rows, meta));
        write_artifact(dir, "pairs.csv", emit_pairs_csv(records, pair_similarities(records, in), meta));
        json extra;
        extra["counts"] = counts_json(in, records);
        nlohmann::ordered_json patterns = nlohmann::ordered_json::object();
        for (const auto* t : templates) patterns[t->id] = t->pattern;
        extra["templates"] = json::parse(patterns.dump());
        extra["logit_scale"] = c.logit_scale;
        extra["include_own_label"] = c.include_own_label;
        write_meta(dir, meta, extra);
        return 0;
    });
    return summary;
}

RunSummary run_rsa(const RunConfig& c, std::ostream& log) {
    const auto in = load_inputs(c);
    auto session = open_session(c, in);
    const auto meta = make_meta(c, in, *session, {});
    const fs::path dir = c.output_dir / "report";
    RunSummary summary{dir, 0, {}};
    stage("rsa", [&] {
        json extra;
        extra["counts"] = counts_json(in, {});
        extra["rsa"] = rsa_analysis(c, in, *session, meta, dir, log);
        write_meta(dir, meta, extra);
        return 0;
    });
    return summary;
}

std::size_t run_generate(const RunConfig& c, std::ostream& log) {
    const auto in = load_inputs(c);
    std::vector<StimulusSpec> specs;
    stage("plan trials", [&] {
        for (auto task : c.tasks)
            for (const auto& wl : in.word_lists) {
                auto plan = plan_trials(in.manifest.images, wl, task, c.include_own_label);
                for (const auto& img : in.manifest.images) specs.push_back({img.id, std::nullopt, {task, wl.category}});
                specs.insert(specs.end(), plan.begin(), plan.end());
            }
        return 0;
    });
    std::map<std::string, const ImageRecord*> by_id;
    for (const auto& img : in.manifest.images) by_id[img.id] = &img;
    const fs::path dir = c.output_dir / "stimuli";
    fs::create_directories(dir);
    stage("render", [&] {
        parallel_for(specs.size(), c.workers, [&](std::size_t i) {
            const auto& img = *by_id.at(specs[i].image_id);
            try {
                write_file_atomic(dir / stimulus_file_name(specs[i]),
                                  render(read_binary(in.manifest.resolve(img)), specs[i].word, c.render));
            } catch (const Error& e) {
                rethrow_with_context(e, "image '" + img.id + "'");
            }
        });
        return 0;
    });
    log << "wrote " << specs.size() << " stimuli to " << dir.string() << "\n";
    return specs.size();
}

void run_validate(const RunConfig& c, std::ostream& log) {
    const auto in = load_inputs(c);
    find_template(in, c.prompt);
    for (const auto& id : c.sweep_prompts) find_template(in, id);
    std::size_t trials = 0;
    stage("plan trials", [&] {
        for (auto task : c.tasks)
            for (const auto& wl : in.word_lists) trials += plan_trials(in.manifest.images, wl, task, c.include_own_label).size();
        return 0;
    });
    if (c.provider.kind == ProviderSpec::Kind::External || c.write_stimuli) {
        stage("check images", [&] {
            for (const auto& img : in.manifest.images)
                if (!fs::exists(in.manifest.resolve(img)))
                    throw DataError(Errc::MissingFile, "image '" + img.id + "' not found at " + in.manifest.resolve(img).string());
            BitmapFont::load(c.render.font_file);
            return 0;
        });
    }
    if (c.provider.kind == ProviderSpec::Kind::Synthetic && c.provider.vocabulary) {
        stage("check vocabulary", [&] {
            SyntheticProvider p({*c.provider.vocabulary, c.seed, c.provider.gamma, c.provider.dim});
            for (const auto& l : default_vocabulary(in, c)) p.vector_of(l);
            return 0;
        });
    }
    log << "config ok: " << in.manifest.images.size() << " images, " << in.word_lists.size() << " word lists, "
        << trials << " trials per prompt, digest " << c.digest << "\n";
}

}  // namespace pwi
