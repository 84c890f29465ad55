#pragma once

// Minimal strict TOML subset used for configs, manifests, and reports:
// tables, dotted table headers, arrays of tables, strings, integers, floats,
// booleans, single-line homogeneous scalar arrays, and # comments. Unknown
// constructs and duplicate keys are errors — configs should fail loudly.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "psae/common.hpp"

namespace psae::toml {

class Value {
public:
    enum class Kind { string_v, integer, floating, boolean, array };

    static Value str(std::string s);
    static Value integer(int64_t i);
    static Value floating(double f);
    static Value boolean(bool b);
    static Value array(std::vector<Value> elems);

    Kind kind() const { return kind_; }
    const std::string& as_string() const;
    int64_t as_int() const;
    double as_float() const;  // integers promote
    bool as_bool() const;
    const std::vector<Value>& as_array() const;

private:
    Kind kind_ = Kind::integer;
    std::string s_;
    int64_t i_ = 0;
    double f_ = 0.0;
    bool b_ = false;
    std::vector<Value> arr_;
};

class Table {
public:
    // -- scalar values ----------------------------------------------------
    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const Value& get(const std::string& key) const;
    void set(const std::string& key, Value v);  // overwrites

    std::string get_string(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_float(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& def) const;
    int64_t get_int_or(const std::string& key, int64_t def) const;
    double get_float_or(const std::string& key, double def) const;
    bool get_bool_or(const std::string& key, bool def) const;
    std::vector<int64_t> get_ints(const std::string& key) const;

    // -- nested tables ----------------------------------------------------
    bool has_table(const std::string& name) const { return tables_.count(name) > 0; }
    const Table& table(const std::string& name) const;
    Table& subtable(const std::string& name);  // creates when absent

    // -- arrays of tables -------------------------------------------------
    bool has_table_array(const std::string& name) const { return arrays_.count(name) > 0; }
    const std::vector<Table>& table_array(const std::string& name) const;
    Table& append_table(const std::string& name);

    // Strictness hook: every present key/table/array name must be listed.
    void expect_only(std::initializer_list<const char*> keys,
                     std::initializer_list<const char*> tables) const;

    const std::map<std::string, Value>& values() const { return values_; }
    const std::map<std::string, Table>& tables() const { return tables_; }
    const std::map<std::string, std::vector<Table>>& table_arrays() const { return arrays_; }
    const std::string& path() const { return path_; }

private:
    friend Table parse(const std::string&, const std::string&);
    std::string where(const std::string& key) const;

    std::map<std::string, Value> values_;
    std::map<std::string, Table> tables_;
    std::map<std::string, std::vector<Table>> arrays_;
    std::string path_;       // dotted location, for error messages
    bool header_seen_ = false;  // parser-only: duplicate [header] detection
};

Table parse(const std::string& text, const std::string& origin = "<string>");
Table parse_file(const std::filesystem::path& path);
std::string serialize(const Table& root);
void write_file(const std::filesystem::path& path, const Table& root);

}  // namespace psae::toml
