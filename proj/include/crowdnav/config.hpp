#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace crowdnav {

/// Flat key/value config: one `key = value` pair per line, `#` comments.
/// Unknown keys are rejected at the RunConfig layer so typos fail loudly.
class KvConfig {
public:
    static KvConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open config file: " + path);
        return from_stream(is, path);
    }

    static KvConfig from_string(const std::string& text) {
        std::istringstream is(text);
        return from_stream(is, "<string>");
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        values_[key] = buf;
    }
    void set(const std::string& key, long long v) { values_[key] = std::to_string(v); }
    void set(const std::string& key, bool v) { values_[key] = v ? "true" : "false"; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw std::runtime_error("config key '" + key + "': not a number: " + it->second);
        }
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stoll(it->second);
        } catch (...) {
            throw std::runtime_error("config key '" + key + "': not an integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::runtime_error("config key '" + key + "': not a bool: " + it->second);
    }

    const std::map<std::string, std::string>& values() const { return values_; }

    /// Sorted `key = value` lines; doubles round-trip exactly (%.17g).
    std::string echo() const {
        std::string out;
        for (const auto& [k, v] : values_) {
            out += k;
            out += " = ";
            out += v;
            out += "\n";
        }
        return out;
    }

private:
    static KvConfig from_stream(std::istream& is, const std::string& where) {
        KvConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            std::string s = strip(line);
            if (s.empty() || s[0] == '#') continue;
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(where + ":" + std::to_string(lineno) +
                                         ": expected 'key = value', got: " + line);
            std::string key = strip(s.substr(0, eq));
            std::string value = strip(s.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error(where + ":" + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static std::string strip(const std::string& s) {
        std::size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        std::size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace crowdnav
