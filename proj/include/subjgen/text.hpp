#pragma once

#include <string>
#include <vector>

namespace subjgen {

// Lowercases and splits on whitespace; punctuation becomes standalone
// single-character tokens. Bytes above 0x7f are kept inside words.
std::vector<std::string> tokenize(const std::string& text);

// Splits at '.', '!' or '?' followed by whitespace or end of text.
// Empty fragments are dropped; terminators stay with their sentence.
std::vector<std::string> split_sentences(const std::string& text);

// Boilerplate removal applied before segmentation: drops everything from a
// signature delimiter line ("--"/"__") onward and drops lines matching a
// small disclaimer-phrase list.
std::string clean_body(const std::string& raw);

bool is_punct_token(const std::string& tok);

// tokens that are words (punctuation excluded)
int count_words(const std::vector<std::string>& tokens);

std::string lowercase(std::string s);
std::string trim(const std::string& s);

// lowercased, whitespace runs collapsed to single spaces, trimmed
std::string normalize_whitespace(const std::string& s);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace subjgen
