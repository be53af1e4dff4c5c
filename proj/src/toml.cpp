#include "chronoforge/toml.hpp"

#include <cctype>
#include <charconv>

#include "chronoforge/common.hpp"

namespace chronoforge {

namespace {

struct Cursor {
    std::string_view s;
    std::size_t pos = 0;
    std::size_t line = 0;

    bool done() const { return pos >= s.size(); }
    char peek() const { return done() ? '\0' : s[pos]; }
    void skip_ws() {
        while (!done() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line); }
};

bool bare_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

std::string parse_key_part(Cursor& c) {
    c.skip_ws();
    if (c.peek() == '"') {
        ++c.pos;
        std::string out;
        while (!c.done() && c.peek() != '"') out += c.s[c.pos++];
        if (c.done()) c.fail("unterminated quoted key");
        ++c.pos;
        return out;
    }
    std::string out;
    while (!c.done() && bare_key_char(c.peek())) out += c.s[c.pos++];
    if (out.empty()) c.fail("expected key");
    return out;
}

std::vector<std::string> parse_key(Cursor& c) {
    std::vector<std::string> parts{parse_key_part(c)};
    c.skip_ws();
    while (c.peek() == '.') {
        ++c.pos;
        parts.push_back(parse_key_part(c));
        c.skip_ws();
    }
    return parts;
}

std::string parse_basic_string(Cursor& c) {
    ++c.pos;  // opening quote
    std::string out;
    while (!c.done() && c.peek() != '"') {
        char ch = c.s[c.pos++];
        if (ch != '\\') {
            out += ch;
            continue;
        }
        if (c.done()) c.fail("dangling escape");
        char e = c.s[c.pos++];
        switch (e) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'u': {
                if (c.pos + 4 > c.s.size()) c.fail("short \\u escape");
                auto j = nlohmann::json::parse("\"\\u" + std::string(c.s.substr(c.pos, 4)) + "\"", nullptr, false);
                if (j.is_discarded()) c.fail("bad \\u escape");
                c.pos += 4;
                out += j.get<std::string>();
                break;
            }
            default: c.fail(std::string("unknown escape \\") + e);
        }
    }
    if (c.done()) c.fail("unterminated string");
    ++c.pos;
    return out;
}

nlohmann::json parse_value(Cursor& c) {
    c.skip_ws();
    char ch = c.peek();
    if (ch == '"') return parse_basic_string(c);
    if (ch == '\'') {
        ++c.pos;
        auto end = c.s.find('\'', c.pos);
        if (end == std::string_view::npos || c.s.substr(c.pos, end - c.pos).find('\n') != std::string_view::npos) {
            c.fail("unterminated literal string");
        }
        std::string out(c.s.substr(c.pos, end - c.pos));
        c.pos = end + 1;
        return out;
    }
    if (ch == '[') {
        ++c.pos;
        nlohmann::json arr = nlohmann::json::array();
        for (;;) {
            c.skip_ws();
            if (c.peek() == ']') {
                ++c.pos;
                return arr;
            }
            arr.push_back(parse_value(c));
            c.skip_ws();
            if (c.peek() == ',') {
                ++c.pos;
            } else if (c.peek() != ']') {
                c.fail("expected ',' or ']' in array");
            }
        }
    }
    std::string tok;
    while (!c.done() && c.peek() != ',' && c.peek() != ']' && c.peek() != '#' && c.peek() != '\n' &&
           c.peek() != ' ' && c.peek() != '\t' && c.peek() != '\r') {
        tok += c.s[c.pos++];
    }
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.empty()) c.fail("expected value");
    std::string digits;
    for (char d : tok) {
        if (d != '_') digits += d;
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    if (!is_float) {
        std::int64_t v = 0;
        const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
        auto r = std::from_chars(b, digits.data() + digits.size(), v);
        if (r.ec == std::errc() && r.ptr == digits.data() + digits.size()) return v;
        c.fail("bad value '" + tok + "'");
    }
    double v = 0;
    const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
    auto r = std::from_chars(b, digits.data() + digits.size(), v);
    if (r.ec == std::errc() && r.ptr == digits.data() + digits.size()) return v;
    c.fail("bad number '" + tok + "'");
}

void expect_line_end(Cursor& c) {
    c.skip_ws();
    if (c.peek() == '\r') ++c.pos;
    if (c.peek() == '#') {
        while (!c.done() && c.peek() != '\n') ++c.pos;
    }
    if (!c.done() && c.peek() != '\n') c.fail("unexpected trailing characters");
}

nlohmann::json& descend(nlohmann::json& root, const std::vector<std::string>& path, std::size_t n, Cursor& c) {
    nlohmann::json* cur = &root;
    for (std::size_t i = 0; i < n; ++i) {
        auto& next = (*cur)[path[i]];
        if (next.is_null()) next = nlohmann::json::object();
        if (!next.is_object()) c.fail("key '" + path[i] + "' is not a table");
        cur = &next;
    }
    return *cur;
}

}  // namespace

nlohmann::json parse_toml(std::string_view text) {
    nlohmann::json root = nlohmann::json::object();
    std::vector<std::string> table;
    Cursor c{text};
    c.line = 1;
    while (!c.done()) {
        c.skip_ws();
        char ch = c.peek();
        if (ch == '\n') {
            ++c.pos;
            ++c.line;
            continue;
        }
        if (ch == '#' || ch == '\r') {
            expect_line_end(c);
            continue;
        }
        if (ch == '[') {
            ++c.pos;
            if (c.peek() == '[') c.fail("arrays of tables are not supported");
            table = parse_key(c);
            if (c.peek() != ']') c.fail("expected ']'");
            ++c.pos;
            descend(root, table, table.size(), c);
            expect_line_end(c);
            continue;
        }
        auto key = parse_key(c);
        c.skip_ws();
        if (c.peek() != '=') c.fail("expected '='");
        ++c.pos;
        auto value = parse_value(c);
        expect_line_end(c);
        std::vector<std::string> full = table;
        full.insert(full.end(), key.begin(), key.end());
        auto& parent = descend(root, full, full.size() - 1, c);
        if (parent.contains(full.back())) c.fail("duplicate key '" + full.back() + "'");
        parent[full.back()] = std::move(value);
    }
    return root;
}

std::string format_toml_flat(const nlohmann::ordered_json& obj) {
    std::string out;
    for (const auto& [k, v] : obj.items()) {
        out += k + " = ";
        if (v.is_string()) {
            out += v.dump();
        } else if (v.is_number_float()) {
            char buf[64];
            auto r = std::to_chars(buf, buf + sizeof buf, v.get<double>());
            std::string s(buf, r.ptr);
            if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
            out += s;
        } else if (v.is_primitive()) {
            out += v.dump();
        } else {
            throw std::invalid_argument("format_toml_flat: nested value for key " + k);
        }
        out += "\n";
    }
    return out;
}

}  // namespace chronoforge
