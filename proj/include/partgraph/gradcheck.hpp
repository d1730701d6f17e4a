#pragma once

#include "partgraph/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace partgraph::nn {

struct GradCheckResult {
    std::string name;
    Scalar max_error = 0.0; // worst relative error across all checked elements
    Scalar tolerance = 0.0;

    bool passed() const { return max_error < tolerance; }
};

// Central finite differences against the analytic backward pass: each layer
// primitive on its own (tolerance 1e-5), then a small end-to-end model per
// pooling head (tolerance 1e-4, where difference truncation error stacks up).
// Deterministic for a given seed.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed);

} // namespace partgraph::nn
