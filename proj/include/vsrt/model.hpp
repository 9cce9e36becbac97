#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vsrt/config.hpp"
#include "vsrt/flow.hpp"
#include "vsrt/ops.hpp"
#include "vsrt/params.hpp"

namespace vsrt {

// Three equal channel groups (temporal, vertical, horizontal); inside a group
// channel 2k is sin(pos*a_k), channel 2k+1 is cos(pos*a_k) with
// a_k = 1/10000^(2k/(C/3)). C must be divisible by 6.
Tensor positional_encoding(int t, int c, int h, int w);

struct ConvP {
    Tensor w, b;
    int pad = 1;
};

struct LayerNormP {
    Tensor gain, shift;
};

struct ResBlockP {
    ConvP c1, c2;
};

struct StcsaHeadP {
    ConvP q, k, v, o;
};

struct StcsaP {
    std::vector<StcsaHeadP> heads;
    LayerNormP ln;
};

struct PropStackP {
    ConvP stem;
    std::vector<ResBlockP> blocks;
};

struct BoffP {
    PropStackP back, fwd;
    ConvP fusion; // 1x1, 2C -> C
    LayerNormP ln;
};

struct TokenFfP {
    ConvP c1, c2; // 1x1 convs C -> 2C -> C
    LayerNormP ln;
};

struct FcsaHeadP {
    Tensor wq, wk, wv; // [m,d]
    Tensor wo;         // [d,m]
};

struct FcsaP {
    std::vector<FcsaHeadP> heads;
    LayerNormP ln;
};

struct TokenFfMatP {
    Tensor w1, b1; // [r,d], [r]
    Tensor w2, b2; // [d,r], [d]
    LayerNormP ln;
};

// Standalone layer forwards (the model wires them together).
struct StcsaOut {
    Tensor y;
    Tensor value_map; // Wv * x, pre-unfold
};
StcsaOut stcsa_forward(const Tensor& x, const StcsaP& p, const ModelConfig& cfg, Tape* tape);
Tensor boff_forward(const Tensor& x_attn, const Tensor& aux, const FlowPair& flows, const BoffP& p,
                    const ModelConfig& cfg, Tape* tape);
Tensor token_feedforward_video(const Tensor& x, const TokenFfP& p, const ModelConfig& cfg, Tape* tape);

// Matrix-form baselines on [d,n] token embeddings.
Tensor fcsa_forward(const Tensor& x, const FcsaP& p, float ln_eps, Tape* tape);
Tensor token_feedforward(const Tensor& x, const TokenFfMatP& p, float ln_eps, Tape* tape);

class VsrTransformer {
public:
    explicit VsrTransformer(ModelConfig cfg);

    void init_params(Rng& rng) { store_.init_default(rng); }
    void zero_params() { store_.zero_all(); }

    // frames [T,3,H,W] in [0,1]; flows at the same spatial scale. Returns the
    // unclamped HR estimate [T,3,scale*H,scale*W].
    Tensor forward(const Tensor& frames, const FlowPair& flows, Tape* tape = nullptr,
                   const std::string& ablation = "full") const;
    // Evaluation path: forward + clamp to [0,1].
    Tensor super_resolve(const Tensor& frames, const FlowPair& flows,
                         const std::string& ablation = "full") const;

    FlowPair zero_flows(const Tensor& frames) const;
    // Flows per the configured estimator; spynet runs on the tape.
    FlowPair flows_for(const Tensor& frames, const FlowPair* gt, Tape* tape) const;

    Tensor extract_features(const Tensor& frames, Tape* tape) const;
    Tensor reconstruct(const Tensor& features, const Tensor& frames, Tape* tape) const;
    Tensor upsample_frames(const Tensor& frames, Tape* tape = nullptr) const;

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    SpynetLite* spynet() { return spynet_.get(); }
    const SpynetLite* spynet() const { return spynet_.get(); }

    const StcsaP& stcsa_params(int block) const { return blocks_[std::size_t(block)].stcsa; }
    const BoffP& boff_params(int block) const { return blocks_[std::size_t(block)].boff; }

    // Conv weight scalars in C->C 3x3 convolutions (scales with C^2).
    std::size_t square_conv_param_count() const;

private:
    struct BlockP {
        StcsaP stcsa;
        BoffP boff;
        TokenFfP token_ff;
    };

    Tensor pe_for(int t, int h, int w) const;

    ModelConfig cfg_;
    ParamStore store_;
    ConvP stem_;
    std::vector<ResBlockP> extractor_;
    std::vector<BlockP> blocks_;
    std::vector<ResBlockP> recon_;
    std::vector<ConvP> up_;
    ConvP final_;
    std::unique_ptr<SpynetLite> spynet_;
    mutable std::map<std::string, Tensor> pe_cache_;
};

} // namespace vsrt
