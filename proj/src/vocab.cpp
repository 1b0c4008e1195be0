#include "subjgen/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace subjgen {

namespace {
const char* reserved[] = {"<pad>", "<unk>", "<s>", "</s>"};
}

Vocabulary::Vocabulary() {
    for (const char* r : reserved) add(r);
}

void Vocabulary::add(const std::string& token) {
    map_.emplace(token, static_cast<int>(tokens_.size()));
    tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<Email>& train, int min_count) {
    if (train.empty()) throw contract_error("build_vocab: empty corpus");
    std::map<std::string, long> counts;  // ordered: lexicographic tie-break for free
    for (const Email& e : train) {
        for (const auto& sent : e.body_sentences)
            for (const auto& t : sent) ++counts[t];
        for (const auto& t : e.subject_tokens) ++counts[t];
    }
    std::vector<std::pair<std::string, long>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    for (const auto& [tok, cnt] : items)
        if (cnt >= min_count && !v.contains(tok)) v.add(tok);
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = map_.find(token);
    return it == map_.end() ? unk_id : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size())
        throw contract_error("vocab: id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(token(i));
    return out;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write vocab file: " + path);
    for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open vocab file: " + path);
    Vocabulary v;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (n < 4) {
            if (line != reserved[n])
                throw format_error("vocab file " + path + ": line " + std::to_string(n + 1) +
                                   " must be " + reserved[n]);
        } else if (!line.empty()) {
            if (v.contains(line))
                throw format_error("vocab file " + path + ": duplicate token " + line);
            v.add(line);
        }
        ++n;
    }
    return v;
}

}  // namespace subjgen
