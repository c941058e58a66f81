#include "keepout/kv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "keepout/error.hpp"

namespace keepout {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

double parse_double(const std::string& t, const std::string& key) {
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw ValidationError("key '" + key + "': cannot parse number '" + t + "'");
    }
    return v;
}

} // namespace

KvDoc KvDoc::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

KvDoc KvDoc::parse_string(const std::string& text, const std::string& origin) {
    KvDoc doc;
    doc.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(origin + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
        }
        Entry e;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = lineno;
        if (e.key.empty()) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        doc.entries_.push_back(std::move(e));
    }
    return doc;
}

bool KvDoc::has(const std::string& key) const {
    for (const Entry& e : entries_) {
        if (e.key == key) return true;
    }
    return false;
}

const KvDoc::Entry* KvDoc::find_unique(const std::string& key) const {
    const Entry* found = nullptr;
    for (const Entry& e : entries_) {
        if (e.key != key) continue;
        if (found) throw ValidationError("key '" + key + "' appears more than once");
        found = &e;
    }
    if (!found) throw ValidationError("missing key '" + key + "'");
    return found;
}

std::string KvDoc::get_string(const std::string& key) const {
    return find_unique(key)->value;
}

double KvDoc::get_double(const std::string& key) const {
    return parse_double(find_unique(key)->value, key);
}

long KvDoc::get_long(const std::string& key) const {
    const std::string v = find_unique(key)->value;
    long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ValidationError("key '" + key + "': cannot parse integer '" + v + "'");
    }
    return out;
}

bool KvDoc::get_bool(const std::string& key) const {
    const std::string v = find_unique(key)->value;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> KvDoc::get_doubles(const std::string& key, std::size_t expect) const {
    const auto toks = tokens(find_unique(key)->value);
    std::vector<double> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(parse_double(t, key));
    if (expect != 0 && out.size() != expect) {
        throw ValidationError("key '" + key + "': expected " + std::to_string(expect) +
                              " numbers, got " + std::to_string(out.size()));
    }
    return out;
}

template <typename T>
T KvDoc::get_or(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    if constexpr (std::is_same_v<T, bool>) {
        return get_bool(key);
    } else if constexpr (std::is_integral_v<T>) {
        return static_cast<T>(get_long(key));
    } else if constexpr (std::is_floating_point_v<T>) {
        return static_cast<T>(get_double(key));
    } else {
        return get_string(key);
    }
}

template bool KvDoc::get_or<bool>(const std::string&, bool) const;
template int KvDoc::get_or<int>(const std::string&, int) const;
template long KvDoc::get_or<long>(const std::string&, long) const;
template double KvDoc::get_or<double>(const std::string&, double) const;
template std::string KvDoc::get_or<std::string>(const std::string&, std::string) const;

std::vector<std::vector<double>> KvDoc::get_rows(const std::string& key) const {
    std::vector<std::vector<double>> rows;
    for (const Entry& e : entries_) {
        if (e.key != key) continue;
        const auto toks = tokens(e.value);
        std::vector<double> row;
        row.reserve(toks.size());
        for (const auto& t : toks) row.push_back(parse_double(t, key));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::string> KvDoc::keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(e.key);
    return out;
}

void KvWriter::comment(const std::string& text) {
    text_ += "# " + text + "\n";
}

void KvWriter::set(const std::string& key, const std::string& value) {
    text_ += key + " = " + value + "\n";
}

namespace {
std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}
} // namespace

void KvWriter::set(const std::string& key, double value) {
    set(key, fmt_double(value));
}

void KvWriter::set(const std::string& key, long value) {
    set(key, std::to_string(value));
}

void KvWriter::set(const std::string& key, const std::vector<double>& values) {
    std::string v;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) v += ' ';
        v += fmt_double(values[i]);
    }
    set(key, v);
}

void KvWriter::write(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text_;
    if (!out) throw IoError("write failed: " + path);
}

} // namespace keepout
