#include "subjgen/text.hpp"

#include <array>
#include <cctype>

namespace subjgen {

namespace {

bool is_word_char(unsigned char c) {
    return std::isalnum(c) || c >= 0x80;
}

const std::array<const char*, 8> disclaimer_phrases = {
    "this e-mail and any attachments",
    "this email and any attachments",
    "confidentiality notice",
    "intended recipient",
    "privileged and confidential",
    "do not disseminate",
    "the information contained in this",
    "unsubscribe",
};

}  // namespace

std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string normalize_whitespace(const std::string& s) {
    std::string out;
    bool in_space = true;
    for (char c : lowercase(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            out.push_back(c);
            in_space = false;
        }
    }
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (is_word_char(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
            if (!std::isspace(c)) out.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        cur.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            bool at_end = i + 1 >= text.size();
            bool before_space =
                !at_end && std::isspace(static_cast<unsigned char>(text[i + 1]));
            if (at_end || before_space) {
                std::string t = trim(cur);
                if (!t.empty()) out.push_back(t);
                cur.clear();
            }
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

std::string clean_body(const std::string& raw) {
    std::vector<std::string> kept;
    std::string line;
    size_t pos = 0;
    bool stopped = false;
    while (pos <= raw.size() && !stopped) {
        size_t nl = raw.find('\n', pos);
        if (nl == std::string::npos) {
            line = raw.substr(pos);
            pos = raw.size() + 1;
        } else {
            line = raw.substr(pos, nl - pos);
            pos = nl + 1;
        }
        std::string t = trim(line);
        if (t.rfind("--", 0) == 0 || t.rfind("__", 0) == 0) {
            stopped = true;  // signature block: drop the rest
            break;
        }
        std::string low = lowercase(t);
        bool disclaimer = false;
        for (const char* phrase : disclaimer_phrases)
            if (low.find(phrase) != std::string::npos) {
                disclaimer = true;
                break;
            }
        if (!disclaimer) kept.push_back(line);
    }
    std::string out;
    for (size_t i = 0; i < kept.size(); ++i) {
        if (i) out.push_back('\n');
        out += kept[i];
    }
    return out;
}

bool is_punct_token(const std::string& tok) {
    if (tok.size() != 1) return false;
    unsigned char c = static_cast<unsigned char>(tok[0]);
    return !std::isalnum(c) && c < 0x80;
}

int count_words(const std::vector<std::string>& tokens) {
    int n = 0;
    for (const auto& t : tokens)
        if (!is_punct_token(t)) ++n;
    return n;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

}  // namespace subjgen
