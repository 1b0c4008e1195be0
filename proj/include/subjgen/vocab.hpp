#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "subjgen/corpus.hpp"

namespace subjgen {

// token<->id bijection with dense ids. Four reserved slots at fixed ids.
class Vocabulary {
public:
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;
    static constexpr int sos_id = 2;
    static constexpr int eos_id = 3;

    // Tokens counted over body sentences and subjects of the training
    // split; ids assigned by descending frequency, ties broken
    // lexicographically.
    static Vocabulary build(const std::vector<Email>& train, int min_count);

    int id(const std::string& token) const;  // unk_id when absent
    const std::string& token(int id) const;
    bool contains(const std::string& token) const { return map_.count(token) > 0; }
    int size() const { return static_cast<int>(tokens_.size()); }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    Vocabulary();
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> map_;
    void add(const std::string& token);
};

}  // namespace subjgen
