#include "subjgen/stopwords.hpp"

#include <fstream>

#include "subjgen/errors.hpp"
#include "subjgen/text.hpp"

namespace subjgen {

const std::set<std::string>& builtin_stopwords() {
    static const std::set<std::string> words = {
        "a",       "about",   "above",  "after",   "again",   "against", "all",    "am",
        "an",      "and",     "any",    "are",     "aren",    "as",      "at",     "be",
        "because", "been",    "before", "being",   "below",   "between", "both",   "but",
        "by",      "can",     "cannot", "could",   "couldn",  "did",     "didn",   "do",
        "does",    "doesn",   "doing",  "don",     "down",    "during",  "each",   "few",
        "for",     "from",    "further","get",     "got",     "had",     "hadn",   "has",
        "hasn",    "have",    "haven",  "having",  "he",      "her",     "here",   "hers",
        "herself", "him",     "himself","his",     "how",     "i",       "if",     "in",
        "into",    "is",      "isn",    "it",      "its",     "itself",  "just",   "let",
        "ll",      "me",      "more",   "most",    "my",      "myself",  "no",     "nor",
        "not",     "now",     "of",     "off",     "on",      "once",    "only",   "or",
        "other",   "ought",   "our",    "ours",    "ourselves", "out",   "over",   "own",
        "please",  "re",      "s",      "same",    "she",     "should",  "shouldn","so",
        "some",    "such",    "t",      "than",    "that",    "the",     "their",  "theirs",
        "them",    "themselves", "then", "there",  "these",   "they",    "this",   "those",
        "through", "to",      "too",    "under",   "until",   "up",      "ve",     "very",
        "was",     "wasn",    "we",     "were",    "weren",   "what",    "when",   "where",
        "which",   "while",   "who",    "whom",    "why",     "will",    "with",   "won",
        "would",   "wouldn",  "you",    "your",    "yours",   "yourself","yourselves",
    };
    return words;
}

std::set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open stopword file: " + path);
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.insert(lowercase(t));
    }
    return out;
}

}  // namespace subjgen
