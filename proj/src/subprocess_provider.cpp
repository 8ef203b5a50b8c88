#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "pwi/error.hpp"
#include "pwi/io.hpp"
#include "pwi/provider.hpp"

namespace pwi {

using nlohmann::json;

/// Owns the child process and both pipe ends.
class SubprocessProvider::Channel {
public:
    explicit Channel(const std::string& command) {
        int in_pipe[2], out_pipe[2];
        if (pipe(in_pipe) != 0) throw ProviderError(Errc::ProviderFailure, "pipe() failed");
        if (pipe(out_pipe) != 0) {
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            throw ProviderError(Errc::ProviderFailure, "pipe() failed");
        }
        pid_ = fork();
        if (pid_ < 0) throw ProviderError(Errc::ProviderFailure, "fork() failed");
        if (pid_ == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            ::close(out_pipe[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        to_child_ = in_pipe[1];
        from_child_ = out_pipe[0];
        fcntl(to_child_, F_SETFD, FD_CLOEXEC);
        fcntl(from_child_, F_SETFD, FD_CLOEXEC);
    }

    ~Channel() { shutdown(); }

    void send_line(const std::string& line) {
        std::string data = line + "\n";
        const char* p = data.data();
        std::size_t left = data.size();
        while (left > 0) {
            const ssize_t n = ::write(to_child_, p, left);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProviderError(Errc::ProviderFailure, "provider stdin closed: " + std::string(std::strerror(errno)));
            }
            p += n;
            left -= static_cast<std::size_t>(n);
        }
    }

    std::string read_line(std::chrono::milliseconds timeout) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
                std::string line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline -
                                                                                     std::chrono::steady_clock::now());
            if (left.count() <= 0) throw ProviderError(Errc::Timeout, "provider did not answer in time");
            pollfd pfd{from_child_, POLLIN, 0};
            const int r = poll(&pfd, 1, static_cast<int>(left.count()));
            if (r < 0) {
                if (errno == EINTR) continue;
                throw ProviderError(Errc::ProviderFailure, "poll() failed");
            }
            if (r == 0) continue;
            char chunk[65536];
            const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProviderError(Errc::ProviderFailure, "read from provider failed");
            }
            if (n == 0) throw ProviderError(Errc::ProtocolViolation, "provider closed its output");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void shutdown() {
        if (to_child_ >= 0) {
            ::close(to_child_);
            to_child_ = -1;
        }
        if (pid_ > 0) {
            int status = 0;
            // Give the child a moment to exit on EOF before killing it.
            for (int i = 0; i < 200; ++i) {
                if (waitpid(pid_, &status, WNOHANG) == pid_) {
                    pid_ = -1;
                    break;
                }
                usleep(10000);
            }
            if (pid_ > 0) {
                kill(pid_, SIGKILL);
                waitpid(pid_, &status, 0);
                pid_ = -1;
            }
        }
        if (from_child_ >= 0) {
            ::close(from_child_);
            from_child_ = -1;
        }
    }

private:
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

namespace {

json parse_response(const std::string& line, std::int64_t expected_id) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception&) {
        throw ProviderError(Errc::ProtocolViolation, "provider sent a non-JSON line: '" + line.substr(0, 200) + "'");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer())
        throw ProviderError(Errc::ProtocolViolation, "provider response lacks an integer id");
    if (j["id"].get<std::int64_t>() != expected_id)
        throw ProviderError(Errc::ProtocolViolation, "provider answered id " + std::to_string(j["id"].get<std::int64_t>()) +
                                                         ", expected " + std::to_string(expected_id));
    return j;
}

}  // namespace

SubprocessProvider::SubprocessProvider(std::string command, SubprocessOptions options)
    : command_(std::move(command)), options_(options) {
    if (options_.batch_size == 0) throw ConfigError(Errc::InvalidConfig, "batch size must be positive");
    // A dead child must surface as an error on write, not kill the harness.
    std::signal(SIGPIPE, SIG_IGN);
    channel_ = std::make_unique<Channel>(command_);
}

SubprocessProvider::~SubprocessProvider() {
    try {
        close();
    } catch (...) {
    }
}

void SubprocessProvider::close() {
    if (!channel_) return;
    try {
        channel_->send_line(R"({"op":"close"})");
    } catch (const ProviderError&) {
    }
    channel_->shutdown();
    channel_.reset();
}

ProviderInfo SubprocessProvider::handshake() {
    if (info_) return *info_;
    if (!channel_) throw ProviderError(Errc::ProviderFailure, "provider is closed");
    channel_->send_line(R"({"op":"info","id":0})");
    const auto j = parse_response(channel_->read_line(options_.timeout), 0);
    if (j.contains("error")) throw ProviderError(Errc::ProviderFailure, "provider info failed: " + j["error"].dump());
    if (!j.contains("name") || !j["name"].is_string() || !j.contains("dim") || !j["dim"].is_number_integer() ||
        !j.contains("modalities") || !j["modalities"].is_array())
        throw ProviderError(Errc::ProtocolViolation, "info response must carry name, dim and modalities");
    ProviderInfo info;
    info.name = j["name"].get<std::string>();
    const auto dim = j["dim"].get<std::int64_t>();
    if (dim < 2) throw ProviderError(Errc::ProtocolViolation, "provider dim must be >= 2");
    info.dim = static_cast<std::size_t>(dim);
    for (const auto& m : j["modalities"]) {
        if (m == "image") info.modalities.insert(Modality::Image);
        else if (m == "text") info.modalities.insert(Modality::Text);
        else throw ProviderError(Errc::ProtocolViolation, "unknown modality " + m.dump());
    }
    info_ = info;
    return info;
}

std::vector<EmbeddingVector> SubprocessProvider::request_embeddings(const std::string& op, const std::string& field,
                                                                    std::vector<std::string> encoded_items,
                                                                    std::size_t offset) {
    const auto info = handshake();
    const std::int64_t id = next_id_++;
    std::string line = R"({"op":")" + op + R"(","id":)" + std::to_string(id) + ",\"" + field + "\":[";
    for (std::size_t i = 0; i < encoded_items.size(); ++i) {
        if (i) line.push_back(',');
        line += encoded_items[i];
    }
    line += "]}";
    channel_->send_line(line);

    const auto j = parse_response(channel_->read_line(options_.timeout), id);
    if (j.contains("error")) {
        const auto msg = j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump();
        throw ProviderError(Errc::ProviderFailure, "provider error for batch starting at index " +
                                                       std::to_string(offset) + " (request " + std::to_string(id) +
                                                       "): " + msg);
    }
    if (!j.contains("embeddings") || !j["embeddings"].is_array())
        throw ProviderError(Errc::ProtocolViolation, "response " + std::to_string(id) + " lacks embeddings");
    const auto& arr = j["embeddings"];
    if (arr.size() != encoded_items.size())
        throw ProviderError(Errc::ProtocolViolation, "response " + std::to_string(id) + " has " +
                                                         std::to_string(arr.size()) + " embeddings for " +
                                                         std::to_string(encoded_items.size()) + " items");
    std::vector<EmbeddingVector> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_array() || arr[i].size() != info.dim)
            throw ProviderError(Errc::ProtocolViolation, "embedding at batch index " + std::to_string(offset + i) +
                                                             " does not have dim " + std::to_string(info.dim));
        EmbeddingVector v;
        v.values.reserve(info.dim);
        for (const auto& x : arr[i]) {
            if (!x.is_number()) throw ProviderError(Errc::ProtocolViolation, "embedding component is not a number");
            v.values.push_back(x.get<double>());
        }
        if (!v.all_finite())
            throw ProviderError(Errc::ProtocolViolation,
                                "embedding at batch index " + std::to_string(offset + i) + " is not finite");
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> SubprocessProvider::embed_texts(std::span<const std::string> texts) {
    if (!channel_) throw ProviderError(Errc::ProviderFailure, "provider is closed");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += options_.batch_size) {
        const auto end = std::min(texts.size(), start + options_.batch_size);
        std::vector<std::string> items;
        for (std::size_t i = start; i < end; ++i) items.push_back(json(texts[i]).dump());
        auto part = request_embeddings("embed_text", "texts", std::move(items), start);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

std::vector<EmbeddingVector> SubprocessProvider::embed_images(std::span<const ImagePayload> images) {
    if (!channel_) throw ProviderError(Errc::ProviderFailure, "provider is closed");
    std::vector<EmbeddingVector> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += options_.batch_size) {
        const auto end = std::min(images.size(), start + options_.batch_size);
        std::vector<std::string> items;
        for (std::size_t i = start; i < end; ++i) {
            const auto* img = std::get_if<EncodedImage>(&images[i]);
            if (!img)
                throw ProviderError(Errc::UnsupportedPayload,
                                    "batch index " + std::to_string(i) + ": external providers need encoded images");
            items.push_back(R"({"b64":")" + base64_encode(img->png) + "\"}");
        }
        auto part = request_embeddings("embed_image", "images", std::move(items), start);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

}  // namespace pwi
