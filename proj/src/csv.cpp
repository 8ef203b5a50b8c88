#include "pwi/csv.hpp"

#include "pwi/error.hpp"

namespace pwi::csv {

std::vector<Row> parse(std::string_view text, bool skip_comments) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool at_line_start = true;
    std::size_t line = 1;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        if (!(row.empty() && !field_started && field.empty())) {
            end_field();
            rows.push_back(std::move(row));
        }
        row.clear();
        at_line_start = true;
        ++line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (at_line_start && skip_comments && c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            ++line;
            continue;
        }
        at_line_start = false;
        switch (c) {
            case '"':
                if (!field.empty())
                    throw DataError(Errc::ParseError, "csv: stray quote on line " + std::to_string(line));
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw DataError(Errc::ParseError, "csv: unterminated quoted field");
    if (!row.empty() || field_started || !field.empty()) end_row();
    return rows;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos && (field.empty() || field.front() != '#'))
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_row(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(row[i]);
    }
    out.push_back('\n');
    return out;
}

}  // namespace pwi::csv
