#pragma once

#include <map>
#include <string>
#include <vector>

#include "subjgen/errors.hpp"

namespace subjgen {

// Flat key = value config file; '#' starts a comment. Values keep their
// raw text; typed getters parse on demand.
class FlatConfig {
public:
    FlatConfig() = default;
    static FlatConfig parse_file(const std::string& path);
    static FlatConfig parse_text(const std::string& text, const std::string& origin = "<text>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// Run provenance: config snapshot, seed, input/output file hashes.
struct RunManifest {
    std::string command;
    uint64_t seed = 0;
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> input_hashes;
    std::map<std::string, std::string> output_hashes;

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void write(const std::string& path) const;
};

}  // namespace subjgen
