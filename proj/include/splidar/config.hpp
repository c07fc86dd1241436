#pragma once

#include "splidar/cube.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace splidar {

/// key = value text with '#' comments and repeatable [section] blocks.
/// Keys outside any section are global; each [section] opens a new block.
class KeyValueFile {
public:
    struct Section {
        std::string name;
        std::map<std::string, std::string> values;
    };

    static KeyValueFile parse_text(const std::string& text, const std::string& origin = "<text>") {
        KeyValueFile kv;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        Section* current = nullptr;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = strip(line);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw FormatError(origin + ":" + std::to_string(lineno) + ": unterminated section");
                kv.sections_.push_back({strip(s.substr(1, s.size() - 2)), {}});
                current = &kv.sections_.back();
                continue;
            }
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw FormatError(origin + ":" + std::to_string(lineno) + ": expected key=value");
            std::string key = strip(s.substr(0, eq));
            std::string val = strip(s.substr(eq + 1));
            if (key.empty())
                throw FormatError(origin + ":" + std::to_string(lineno) + ": empty key");
            (current ? current->values : kv.globals_)[key] = val;
        }
        return kv;
    }

    static KeyValueFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_text(buf.str(), path);
    }

    bool has(const std::string& key) const { return globals_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = globals_.find(key);
        return it == globals_.end() ? fallback : it->second;
    }
    double get_double(const std::string& key, double fallback) const {
        auto it = globals_.find(key);
        return it == globals_.end() ? fallback : to_double(it->second, key);
    }
    int get_int(const std::string& key, int fallback) const {
        auto it = globals_.find(key);
        return it == globals_.end() ? fallback : to_int(it->second, key);
    }
    const std::vector<Section>& sections() const { return sections_; }

    static double to_double(const std::string& s, const std::string& key) {
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw FormatError("config: bad numeric value for '" + key + "': " + s);
        }
    }
    static int to_int(const std::string& s, const std::string& key) {
        try {
            std::size_t pos = 0;
            int v = std::stoi(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw FormatError("config: bad integer value for '" + key + "': " + s);
        }
    }
    static std::vector<double> to_double_list(const std::string& s, const std::string& key) {
        std::vector<double> out;
        std::istringstream in(s);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = strip(item);
            if (!item.empty()) out.push_back(to_double(item, key));
        }
        return out;
    }

    static std::string strip(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double value_double(const Section& sec, const std::string& key, double fallback) {
        auto it = sec.values.find(key);
        return it == sec.values.end() ? fallback : to_double(it->second, key);
    }
    static std::string value_string(const Section& sec, const std::string& key,
                                    const std::string& fallback) {
        auto it = sec.values.find(key);
        return it == sec.values.end() ? fallback : it->second;
    }

private:
    std::map<std::string, std::string> globals_;
    std::vector<Section> sections_;
};

}  // namespace splidar
