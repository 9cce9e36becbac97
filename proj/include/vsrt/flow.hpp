#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vsrt/ops.hpp"
#include "vsrt/tape.hpp"
#include "vsrt/tensor.hpp"

namespace vsrt {

class ParamStore;

// Backward and forward displacement fields, [T,2,H,W] each. Channel 0 is the
// horizontal displacement in pixels, channel 1 vertical.
struct FlowPair {
    Tensor backward;
    Tensor forward;
};

// Sign convention, pinned by the warp-reconstruction invariant: the result of
// flow_between(frames, target, source) is the field f with
// bilinear_warp(frames[source], f) ~ frames[target].
class FlowEstimator {
public:
    virtual ~FlowEstimator() = default;
    virtual Tensor flow_between(const Tensor& frames, int target, int source, Tape* tape) const = 0;
};

// The identity estimator: all-zero fields.
class ZeroFlow : public FlowEstimator {
public:
    Tensor flow_between(const Tensor& frames, int target, int source, Tape* tape) const override;
};

// Analytically exact fields for synthetic sequences translating at a constant
// per-frame velocity (in the pixels of the frames handed in).
class GroundTruthFlow : public FlowEstimator {
public:
    GroundTruthFlow(float dx_per_frame, float dy_per_frame)
        : dx_(dx_per_frame), dy_(dy_per_frame) {}
    Tensor flow_between(const Tensor& frames, int target, int source, Tape* tape) const override;

private:
    float dx_, dy_;
};

// Coarse-to-fine trainable estimator: a 3-level pyramid where each level
// warps the source by the upsampled coarser flow and predicts a residual with
// a 5-layer conv stack. The residual head starts at zero so the initial flow
// is zero everywhere.
class SpynetLite : public FlowEstimator {
public:
    SpynetLite(ParamStore& store, const std::string& prefix, int levels = 3, int hidden = 16);

    Tensor pair_flow(const Tensor& target, const Tensor& source, Tape* tape) const;
    Tensor flow_between(const Tensor& frames, int target, int source, Tape* tape) const override;

    int levels() const { return levels_; }

private:
    struct LevelNet {
        std::vector<Tensor> w, b;
    };
    std::vector<LevelNet> nets_;
    int levels_;
    int hidden_;
};

// The paper's piecewise boundary conditions: the first backward flow and the
// last forward flow are the estimator's self-flow.
FlowPair estimate_bidirectional(const Tensor& frames, const FlowEstimator& estimator,
                                Tape* tape = nullptr);

void save_flow_pair(const FlowPair& fp, const std::string& dir, const std::string& stem);
FlowPair load_flow_pair(const std::string& dir, const std::string& stem);

} // namespace vsrt
