#pragma once

#include <cstdint>
#include <vector>

#include "subjgen/corpus.hpp"

namespace subjgen {

struct SyntheticEmail {
    Email email;                       // segmented, passes filter_email
    std::vector<int> salient_indices;  // planted salient sentence positions
    std::vector<std::string> keywords; // subject keywords, in order
};

// Templated desk-scale corpus with known salient sentences. Deterministic
// for a given (n, seed).
std::vector<SyntheticEmail> generate_synthetic(int n, uint64_t seed);

std::vector<Email> strip_synthetic(const std::vector<SyntheticEmail>& s);

}  // namespace subjgen
