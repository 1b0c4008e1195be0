#pragma once

#include <set>
#include <string>

namespace subjgen {

// Built-in English function-word list (~150 entries).
const std::set<std::string>& builtin_stopwords();

// One token per line, UTF-8; '#' lines and blanks ignored.
std::set<std::string> load_stopwords(const std::string& path);

}  // namespace subjgen
