#pragma once

#include <optional>
#include <string>
#include <vector>

namespace keepout {

// Flat `key = value` document with '#' comments. Keys may repeat (ordered);
// values are whitespace-separated tokens.
class KvDoc {
public:
    static KvDoc parse_file(const std::string& path);
    static KvDoc parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    // Single-occurrence accessors; throw ValidationError naming the key.
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_long(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key, std::size_t expect = 0) const;

    template <typename T>
    T get_or(const std::string& key, T fallback) const;

    // All occurrences of a repeatable key, each tokenized to doubles.
    std::vector<std::vector<double>> get_rows(const std::string& key) const;

    std::vector<std::string> keys() const;

private:
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;
    };
    const Entry* find_unique(const std::string& key) const;
    std::vector<Entry> entries_;
    std::string origin_;
};

// Writer for the same format.
class KvWriter {
public:
    void comment(const std::string& text);
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, long value);
    void set(const std::string& key, const std::vector<double>& values);
    void write(const std::string& path) const;
    std::string str() const { return text_; }

private:
    std::string text_;
};

} // namespace keepout
