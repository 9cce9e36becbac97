#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vsrt {

struct GradCheckRow {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

// Central finite differences (h = 1e-3) against tape gradients for every
// differentiable op, one entry per op. Inputs live in [-1,1]; errors are
// relative to the gradient scale. Threshold 1e-3.
std::vector<GradCheckRow> gradcheck_ops(std::uint64_t seed = 0);

// End-to-end check on the tiny T=2, C=6, 4x4 configuration: Charbonnier loss
// of the full model (spynet flows included), a few probed coordinates per
// parameter tensor.
std::vector<GradCheckRow> gradcheck_model(std::uint64_t seed = 0);

} // namespace vsrt
