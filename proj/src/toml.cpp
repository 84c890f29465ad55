#include "psae/toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace psae::toml {

// ---------------------------------------------------------------- Value --

Value Value::str(std::string s) {
    Value v;
    v.kind_ = Kind::string_v;
    v.s_ = std::move(s);
    return v;
}
Value Value::integer(int64_t i) {
    Value v;
    v.kind_ = Kind::integer;
    v.i_ = i;
    return v;
}
Value Value::floating(double f) {
    Value v;
    v.kind_ = Kind::floating;
    v.f_ = f;
    return v;
}
Value Value::boolean(bool b) {
    Value v;
    v.kind_ = Kind::boolean;
    v.b_ = b;
    return v;
}
Value Value::array(std::vector<Value> elems) {
    Value v;
    v.kind_ = Kind::array;
    v.arr_ = std::move(elems);
    return v;
}

namespace {
const char* kind_name(Value::Kind k) {
    switch (k) {
        case Value::Kind::string_v: return "string";
        case Value::Kind::integer: return "integer";
        case Value::Kind::floating: return "float";
        case Value::Kind::boolean: return "boolean";
        case Value::Kind::array: return "array";
    }
    return "?";
}
}  // namespace

const std::string& Value::as_string() const {
    if (kind_ != Kind::string_v) throw Error(concat("expected string, got ", kind_name(kind_)));
    return s_;
}
int64_t Value::as_int() const {
    if (kind_ != Kind::integer) throw Error(concat("expected integer, got ", kind_name(kind_)));
    return i_;
}
double Value::as_float() const {
    if (kind_ == Kind::integer) return static_cast<double>(i_);
    if (kind_ != Kind::floating) throw Error(concat("expected float, got ", kind_name(kind_)));
    return f_;
}
bool Value::as_bool() const {
    if (kind_ != Kind::boolean) throw Error(concat("expected boolean, got ", kind_name(kind_)));
    return b_;
}
const std::vector<Value>& Value::as_array() const {
    if (kind_ != Kind::array) throw Error(concat("expected array, got ", kind_name(kind_)));
    return arr_;
}

// ---------------------------------------------------------------- Table --

std::string Table::where(const std::string& key) const {
    return path_.empty() ? concat("'", key, "'") : concat("'", key, "' in [", path_, "]");
}

const Value& Table::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(concat("missing key ", where(key)));
    return it->second;
}

void Table::set(const std::string& key, Value v) { values_[key] = std::move(v); }

std::string Table::get_string(const std::string& key) const {
    const Value& v = get(key);
    try {
        return v.as_string();
    } catch (const Error& e) {
        throw Error(concat(where(key), ": ", e.what()));
    }
}
int64_t Table::get_int(const std::string& key) const {
    const Value& v = get(key);
    try {
        return v.as_int();
    } catch (const Error& e) {
        throw Error(concat(where(key), ": ", e.what()));
    }
}
double Table::get_float(const std::string& key) const {
    const Value& v = get(key);
    try {
        return v.as_float();
    } catch (const Error& e) {
        throw Error(concat(where(key), ": ", e.what()));
    }
}
bool Table::get_bool(const std::string& key) const {
    const Value& v = get(key);
    try {
        return v.as_bool();
    } catch (const Error& e) {
        throw Error(concat(where(key), ": ", e.what()));
    }
}
std::string Table::get_string_or(const std::string& key, const std::string& def) const {
    return has(key) ? get_string(key) : def;
}
int64_t Table::get_int_or(const std::string& key, int64_t def) const {
    return has(key) ? get_int(key) : def;
}
double Table::get_float_or(const std::string& key, double def) const {
    return has(key) ? get_float(key) : def;
}
bool Table::get_bool_or(const std::string& key, bool def) const {
    return has(key) ? get_bool(key) : def;
}
std::vector<int64_t> Table::get_ints(const std::string& key) const {
    const Value& arr = get(key);
    std::vector<int64_t> out;
    try {
        for (const auto& v : arr.as_array()) out.push_back(v.as_int());
    } catch (const Error& e) {
        throw Error(concat(where(key), ": ", e.what()));
    }
    return out;
}

const Table& Table::table(const std::string& name) const {
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error(concat("missing table ", where(name)));
    return it->second;
}

Table& Table::subtable(const std::string& name) {
    auto [it, inserted] = tables_.try_emplace(name);
    if (inserted) it->second.path_ = path_.empty() ? name : concat(path_, ".", name);
    return it->second;
}

const std::vector<Table>& Table::table_array(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw Error(concat("missing table array ", where(name)));
    return it->second;
}

Table& Table::append_table(const std::string& name) {
    auto& vec = arrays_[name];
    vec.emplace_back();
    vec.back().path_ = path_.empty() ? name : concat(path_, ".", name);
    return vec.back();
}

void Table::expect_only(std::initializer_list<const char*> keys,
                        std::initializer_list<const char*> tables) const {
    std::set<std::string> kset(keys.begin(), keys.end());
    std::set<std::string> tset(tables.begin(), tables.end());
    for (const auto& [k, v] : values_)
        if (!kset.count(k)) throw Error(concat("unknown key ", where(k)));
    for (const auto& [k, v] : tables_)
        if (!tset.count(k)) throw Error(concat("unknown table ", where(k)));
    for (const auto& [k, v] : arrays_)
        if (!tset.count(k)) throw Error(concat("unknown table array ", where(k)));
}

// --------------------------------------------------------------- parser --

namespace {

struct Parser {
    const std::string& origin;
    int lineno = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(concat(origin, ":", lineno, ": ", msg));
    }

    static bool bare_key_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    }

    std::string trim(std::string s) const {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    }

    // Removes a trailing comment, respecting '#' inside quoted strings.
    std::string strip_comment(const std::string& line) const {
        bool in_str = false;
        for (size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (in_str) {
                if (c == '\\') ++i;
                else if (c == '"') in_str = false;
            } else if (c == '"') {
                in_str = true;
            } else if (c == '#') {
                return line.substr(0, i);
            }
        }
        if (in_str) fail("unterminated string");
        return line;
    }

    std::vector<std::string> split_path(const std::string& s) const {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : s) {
            if (c == '.') {
                if (cur.empty()) fail("empty path segment");
                parts.push_back(cur);
                cur.clear();
            } else if (bare_key_char(c)) {
                cur += c;
            } else {
                fail(concat("bad character '", std::string(1, c), "' in table name"));
            }
        }
        if (cur.empty()) fail("empty path segment");
        parts.push_back(cur);
        return parts;
    }

    std::string parse_string(const std::string& s, size_t& i) const {
        // s[i] == '"'
        std::string out;
        for (++i; i < s.size(); ++i) {
            const char c = s[i];
            if (c == '"') {
                ++i;
                return out;
            }
            if (c == '\\') {
                if (++i >= s.size()) fail("dangling escape");
                switch (s[i]) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: fail(concat("unsupported escape '\\", std::string(1, s[i]), "'"));
                }
            } else {
                out += c;
            }
        }
        fail("unterminated string");
    }

    Value parse_scalar(const std::string& tok) const {
        if (tok == "true") return Value::boolean(true);
        if (tok == "false") return Value::boolean(false);
        // integer?
        {
            int64_t v = 0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec == std::errc() && p == tok.data() + tok.size()) return Value::integer(v);
        }
        // float?
        {
            double v = 0.0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec == std::errc() && p == tok.data() + tok.size()) {
                if (!std::isfinite(v)) fail("non-finite floats not supported");
                return Value::floating(v);
            }
        }
        fail(concat("cannot parse value '", tok, "'"));
    }

    Value parse_value(const std::string& s, size_t& i) const {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        if (i >= s.size()) fail("missing value");
        if (s[i] == '"') return Value::str(parse_string(s, i));
        if (s[i] == '[') {
            ++i;
            std::vector<Value> elems;
            while (true) {
                while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
                if (i >= s.size()) fail("unterminated array (arrays must be single-line)");
                if (s[i] == ']') {
                    ++i;
                    break;
                }
                elems.push_back(parse_value(s, i));
                while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
                if (i < s.size() && s[i] == ',') {
                    ++i;
                    continue;
                }
                if (i < s.size() && s[i] == ']') {
                    ++i;
                    break;
                }
                fail("expected ',' or ']' in array");
            }
            for (size_t k = 1; k < elems.size(); ++k) {
                const bool num0 = elems[0].kind() == Value::Kind::integer ||
                                  elems[0].kind() == Value::Kind::floating;
                const bool numk = elems[k].kind() == Value::Kind::integer ||
                                  elems[k].kind() == Value::Kind::floating;
                if (elems[k].kind() != elems[0].kind() && !(num0 && numk))
                    fail("mixed-type arrays not supported");
            }
            return Value::array(std::move(elems));
        }
        // bare scalar token: read to end (commas/brackets stop it inside arrays)
        size_t start = i;
        while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != ' ' && s[i] != '\t') ++i;
        return parse_scalar(s.substr(start, i - start));
    }
};

}  // namespace

Table parse(const std::string& text, const std::string& origin) {
    Table root;
    Table* current = &root;
    Parser ps{origin};

    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++ps.lineno;
        std::string line = ps.trim(ps.strip_comment(raw));
        if (line.empty()) continue;

        if (line.front() == '[') {
            const bool is_array = line.size() > 1 && line[1] == '[';
            const std::string close = is_array ? "]]" : "]";
            if (line.size() < close.size() + (is_array ? 2 : 1) ||
                line.substr(line.size() - close.size()) != close)
                ps.fail("malformed table header");
            const std::string inner = ps.trim(
                line.substr(is_array ? 2 : 1, line.size() - (is_array ? 4 : 2)));
            auto parts = ps.split_path(inner);
            Table* t = &root;
            for (size_t i = 0; i + 1 < parts.size(); ++i) {
                if (t->has(parts[i])) ps.fail(concat("'", parts[i], "' is a value, not a table"));
                if (t->has_table_array(parts[i]))
                    t = &const_cast<std::vector<Table>&>(t->table_array(parts[i])).back();
                else
                    t = &t->subtable(parts[i]);
            }
            const std::string& leaf = parts.back();
            if (t->has(leaf)) ps.fail(concat("'", leaf, "' is a value, not a table"));
            if (is_array) {
                if (t->has_table(leaf)) ps.fail(concat("'", leaf, "' already defined as a table"));
                current = &t->append_table(leaf);
            } else {
                if (t->has_table_array(leaf))
                    ps.fail(concat("'", leaf, "' already defined as a table array"));
                Table& sub = t->subtable(leaf);
                if (sub.header_seen_) ps.fail(concat("duplicate table header [", inner, "]"));
                sub.header_seen_ = true;
                current = &sub;
            }
            continue;
        }

        const size_t eq = [&] {
            bool in_str = false;
            for (size_t i = 0; i < line.size(); ++i) {
                if (in_str) {
                    if (line[i] == '\\') ++i;
                    else if (line[i] == '"') in_str = false;
                } else if (line[i] == '"') {
                    in_str = true;
                } else if (line[i] == '=') {
                    return i;
                }
            }
            return std::string::npos;
        }();
        if (eq == std::string::npos) ps.fail("expected 'key = value'");
        const std::string key = ps.trim(line.substr(0, eq));
        if (key.empty()) ps.fail("empty key");
        for (char c : key)
            if (!Parser::bare_key_char(c))
                ps.fail(concat("bad character '", std::string(1, c), "' in key '", key, "'"));
        if (current->has(key)) ps.fail(concat("duplicate key '", key, "'"));
        if (current->has_table(key) || current->has_table_array(key))
            ps.fail(concat("'", key, "' already defined as a table"));

        size_t i = eq + 1;
        Value v = ps.parse_value(line, i);
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i != line.size()) ps.fail(concat("trailing characters after value: '",
                                             line.substr(i), "'"));
        current->set(key, std::move(v));
    }
    return root;
}

Table parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(concat("cannot open ", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

// ------------------------------------------------------------ serializer --

namespace {

std::string escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20)
                    throw Error("control characters in strings not supported");
                out += c;
        }
    }
    return out + "\"";
}

std::string render_float(double f) {
    if (!std::isfinite(f)) throw Error("cannot serialize non-finite float");
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), f);
    std::string s(buf, p);
    // keep it reparseable as a float, not an integer
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find('E') == std::string::npos)
        s += ".0";
    return s;
}

std::string render_value(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::string_v: return escape(v.as_string());
        case Value::Kind::integer: return std::to_string(v.as_int());
        case Value::Kind::floating: return render_float(v.as_float());
        case Value::Kind::boolean: return v.as_bool() ? "true" : "false";
        case Value::Kind::array: {
            std::string out = "[";
            const auto& a = v.as_array();
            for (size_t i = 0; i < a.size(); ++i) {
                if (i) out += ", ";
                out += render_value(a[i]);
            }
            return out + "]";
        }
    }
    throw Error("unreachable value kind");
}

void render_table(std::ostream& os, const Table& t, const std::string& prefix, bool emit_header) {
    if (emit_header && !prefix.empty()) os << "[" << prefix << "]\n";
    for (const auto& [k, v] : t.values()) os << k << " = " << render_value(v) << "\n";
    for (const auto& [name, sub] : t.tables()) {
        os << "\n";
        render_table(os, sub, prefix.empty() ? name : prefix + "." + name, true);
    }
    for (const auto& [name, vec] : t.table_arrays()) {
        const std::string path = prefix.empty() ? name : prefix + "." + name;
        for (const auto& elem : vec) {
            os << "\n[[" << path << "]]\n";
            render_table(os, elem, path, false);
        }
    }
}

}  // namespace

std::string serialize(const Table& root) {
    std::ostringstream os;
    render_table(os, root, "", false);
    std::string s = os.str();
    if (!s.empty() && s.front() == '\n') s.erase(s.begin());  // cosmetic leading blank
    return s;
}

void write_file(const std::filesystem::path& path, const Table& root) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(concat("cannot write ", path.string()));
    out << serialize(root);
    if (!out) throw Error(concat("write failed: ", path.string()));
}

}  // namespace psae::toml
