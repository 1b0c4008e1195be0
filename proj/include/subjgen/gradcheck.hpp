#pragma once

#include <functional>
#include <vector>

#include "subjgen/tape.hpp"

namespace subjgen::ad {

// Builds a scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    int coords_checked = 0;
};

// Central finite differences against the tape's analytic gradients.
// Checks every coordinate when a parameter has at most max_coords entries,
// otherwise a deterministic pseudo-random subset of max_coords of them.
GradCheckResult grad_check(const std::vector<Parameter*>& params, const LossBuilder& build,
                           double h = 1e-4, int max_coords = 64, uint64_t seed = 1234);

// Finite-difference sweep over every primitive at `points` random
// kink-avoiding points each; returns (primitive name, max relative error).
std::vector<std::pair<std::string, double>> primitive_gradcheck_suite(uint64_t seed,
                                                                      int points = 10);

}  // namespace subjgen::ad
