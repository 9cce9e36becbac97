#include "vsrt/model.hpp"

#include <cmath>

#include "vsrt/data.hpp"
#include "vsrt/errors.hpp"

namespace vsrt {

Tensor positional_encoding(int t, int c, int h, int w) {
    if (c % 6 != 0) {
        throw ConfigError("positional encoding needs channels divisible by 6, got " + std::to_string(c));
    }
    Tensor pe(Shape{std::size_t(t), std::size_t(c), std::size_t(h), std::size_t(w)});
    const int group = c / 3; // channels per (temporal, vertical, horizontal) group
    for (int ti = 0; ti < t; ++ti) {
        for (int ci = 0; ci < c; ++ci) {
            const int g = ci / group;
            const int i = ci % group;
            const int k = i / 2;
            const double alpha = std::pow(10000.0, -2.0 * double(k) / double(group));
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double pos = g == 0 ? double(ti) : (g == 1 ? double(y) : double(x));
                    const double v = (i % 2 == 0) ? std::sin(pos * alpha) : std::cos(pos * alpha);
                    pe.data()[((std::size_t(ti) * c + ci) * h + y) * w + x] = float(v);
                }
            }
        }
    }
    return pe;
}

namespace {

Tensor conv(const Tensor& x, const ConvP& p, Tape* tape) {
    return ops::conv2d(x, p.w, &p.b, 1, p.pad, tape);
}

Tensor res_block(const Tensor& x, const ResBlockP& p, float slope, Tape* tape) {
    Tensor h = conv(x, p.c1, tape);
    h = ops::leaky_relu(h, slope, tape);
    h = conv(h, p.c2, tape);
    return ops::add(x, h, tape);
}

Tensor layer_norm_channels(const Tensor& x, const LayerNormP& p, float eps, Tape* tape) {
    const int axis = x.ndim() == 4 ? 1 : 0;
    return ops::layer_norm(x, axis, p.gain, p.shift, eps, tape);
}

ConvP add_conv(ParamStore& s, const std::string& name, int cout, int cin, int k) {
    ConvP c;
    c.w = s.add(name + ".w", {std::size_t(cout), std::size_t(cin), std::size_t(k), std::size_t(k)});
    c.b = s.add(name + ".b", {std::size_t(cout)}, ParamStore::Init::Zero);
    c.pad = (k - 1) / 2;
    return c;
}

LayerNormP add_ln(ParamStore& s, const std::string& name, int c) {
    LayerNormP p;
    p.gain = s.add(name + ".gain", {std::size_t(c)}, ParamStore::Init::One);
    p.shift = s.add(name + ".shift", {std::size_t(c)}, ParamStore::Init::Zero);
    return p;
}

ResBlockP add_res(ParamStore& s, const std::string& name, int c) {
    return {add_conv(s, name + ".c1", c, c, 3), add_conv(s, name + ".c2", c, c, 3)};
}

} // namespace

StcsaOut stcsa_forward(const Tensor& x, const StcsaP& p, const ModelConfig& cfg, Tape* tape) {
    const int t = int(x.dim(0)), c = int(x.dim(1)), h = int(x.dim(2)), w = int(x.dim(3));
    Tensor attn_sum;
    Tensor value_map;
    for (const auto& head : p.heads) {
        Tensor q = conv(x, head.q, tape);
        Tensor k = conv(x, head.k, tape);
        Tensor v = conv(x, head.v, tape);
        if (!value_map.defined()) value_map = v;

        Tensor qp = ops::unfold(q, cfg.patch_w, cfg.patch_h, cfg.stride, tape);
        Tensor kp = ops::unfold(k, cfg.patch_w, cfg.patch_h, cfg.stride, tape);
        Tensor vp = ops::unfold(v, cfg.patch_w, cfg.patch_h, cfg.stride, tape);
        const std::size_t n = qp.dim(0);
        const std::size_t d = std::size_t(c) * cfg.patch_w * cfg.patch_h;

        // patches flatten to [N,d] rows; the paper's d x N matrices are their
        // transposes, so K^T Q is [N,d] x [d,N]
        Tensor qm = ops::reshape(qp, {n, d}, tape);
        Tensor km = ops::reshape(kp, {n, d}, tape);
        Tensor vm = ops::reshape(vp, {n, d}, tape);
        Tensor sim = ops::matmul(km, ops::transpose(qm, tape), tape);
        Tensor a = ops::softmax_columns(sim, tape);
        Tensor out_dn = ops::matmul(ops::transpose(vm, tape), a, tape);
        Tensor out_p = ops::reshape(ops::transpose(out_dn, tape),
                                    {n, std::size_t(c), std::size_t(cfg.patch_h),
                                     std::size_t(cfg.patch_w)},
                                    tape);
        Tensor folded = ops::fold(out_p, t, c, h, w, cfg.stride, tape);
        Tensor o = conv(folded, head.o, tape);
        attn_sum = attn_sum.defined() ? ops::add(attn_sum, o, tape) : o;
    }
    Tensor y = layer_norm_channels(ops::add(x, attn_sum, tape), p.ln, cfg.ln_eps, tape);
    return {y, value_map};
}

Tensor boff_forward(const Tensor& x_attn, const Tensor& aux, const FlowPair& flows, const BoffP& p,
                    const ModelConfig& cfg, Tape* tape) {
    if (flows.backward.dims() != Shape{x_attn.dim(0), 2, x_attn.dim(2), x_attn.dim(3)}) {
        throw ShapeError("boff: flow " + shape_str(flows.backward.dims()) + " does not match features " +
                         shape_str(x_attn.dims()));
    }
    Tensor warped_back = ops::bilinear_warp(x_attn, flows.backward, tape);
    Tensor warped_fwd = ops::bilinear_warp(x_attn, flows.forward, tape);

    auto run_stack = [&](const PropStackP& stack, const Tensor& warped) {
        Tensor in = ops::concat_channels(aux, warped, tape);
        Tensor h = ops::leaky_relu(conv(in, stack.stem, tape), cfg.leaky_slope, tape);
        for (const auto& rb : stack.blocks) h = res_block(h, rb, cfg.leaky_slope, tape);
        return h;
    };
    Tensor fb = run_stack(p.back, warped_back);
    Tensor ff = run_stack(p.fwd, warped_fwd);
    Tensor fused = ops::leaky_relu(conv(ops::concat_channels(fb, ff, tape), p.fusion, tape),
                                   cfg.leaky_slope, tape);
    return layer_norm_channels(ops::add(x_attn, fused, tape), p.ln, cfg.ln_eps, tape);
}

Tensor token_feedforward_video(const Tensor& x, const TokenFfP& p, const ModelConfig& cfg, Tape* tape) {
    Tensor h = ops::relu(conv(x, p.c1, tape), tape);
    h = conv(h, p.c2, tape);
    return layer_norm_channels(ops::add(x, h, tape), p.ln, cfg.ln_eps, tape);
}

Tensor fcsa_forward(const Tensor& x, const FcsaP& p, float ln_eps, Tape* tape) {
    Tensor sum;
    for (const auto& head : p.heads) {
        Tensor q = ops::matmul(head.wq, x, tape); // [m,n]
        Tensor k = ops::matmul(head.wk, x, tape);
        Tensor v = ops::matmul(head.wv, x, tape);
        Tensor sim = ops::matmul(ops::transpose(k, tape), q, tape); // [n,n]
        Tensor a = ops::softmax_columns(sim, tape);
        Tensor o = ops::matmul(head.wo, ops::matmul(v, a, tape), tape); // [d,n]
        sum = sum.defined() ? ops::add(sum, o, tape) : o;
    }
    return ops::layer_norm(ops::add(x, sum, tape), 0, p.ln.gain, p.ln.shift, ln_eps, tape);
}

Tensor token_feedforward(const Tensor& x, const TokenFfMatP& p, float ln_eps, Tape* tape) {
    Tensor h = ops::add_col_bias(ops::matmul(p.w1, x, tape), p.b1, tape);
    h = ops::relu(h, tape);
    h = ops::add_col_bias(ops::matmul(p.w2, h, tape), p.b2, tape);
    return ops::layer_norm(ops::add(x, h, tape), 0, p.ln.gain, p.ln.shift, ln_eps, tape);
}

VsrTransformer::VsrTransformer(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int c = cfg_.channels;
    stem_ = add_conv(store_, "extractor.stem", c, 3, 3);
    for (int i = 0; i < cfg_.extractor_blocks; ++i) {
        extractor_.push_back(add_res(store_, "extractor.res" + std::to_string(i), c));
    }
    const int aux_c = cfg_.boff_concat == "value" ? c : 3;
    for (int b = 0; b < cfg_.num_transformer_blocks; ++b) {
        const std::string bp = "block" + std::to_string(b);
        BlockP blk;
        for (int hd = 0; hd < cfg_.heads; ++hd) {
            const std::string hp = bp + ".stcsa.h" + std::to_string(hd);
            StcsaHeadP head;
            head.q = add_conv(store_, hp + ".q", c, c, 3);
            head.k = add_conv(store_, hp + ".k", c, c, 3);
            head.v = add_conv(store_, hp + ".v", c, c, 3);
            head.o = add_conv(store_, hp + ".o", c, c, 3);
            blk.stcsa.heads.push_back(head);
        }
        blk.stcsa.ln = add_ln(store_, bp + ".stcsa.ln", c);
        for (auto dir : {"back", "fwd"}) {
            PropStackP stack;
            stack.stem = add_conv(store_, bp + ".boff." + dir + ".stem", c, c + aux_c, 3);
            for (int i = 0; i < cfg_.prop_blocks; ++i) {
                stack.blocks.push_back(
                    add_res(store_, bp + ".boff." + std::string(dir) + ".res" + std::to_string(i), c));
            }
            (std::string(dir) == "back" ? blk.boff.back : blk.boff.fwd) = stack;
        }
        blk.boff.fusion = add_conv(store_, bp + ".boff.fusion", c, 2 * c, 1);
        blk.boff.ln = add_ln(store_, bp + ".boff.ln", c);
        blk.token_ff.c1 = add_conv(store_, bp + ".token_ff.c1", 2 * c, c, 1);
        blk.token_ff.c2 = add_conv(store_, bp + ".token_ff.c2", c, 2 * c, 1);
        blk.token_ff.ln = add_ln(store_, bp + ".token_ff.ln", c);
        blocks_.push_back(std::move(blk));
    }
    for (int i = 0; i < cfg_.recon_blocks; ++i) {
        recon_.push_back(add_res(store_, "recon.res" + std::to_string(i), c));
    }
    for (int s = cfg_.scale; s > 1; s /= 2) {
        up_.push_back(add_conv(store_, "recon.up" + std::to_string(up_.size()), 4 * c, c, 3));
    }
    final_ = add_conv(store_, "recon.final", 3, c, 3);
    if (cfg_.flow_estimator == "spynet") {
        spynet_ = std::make_unique<SpynetLite>(store_, "spynet");
    }
}

Tensor VsrTransformer::pe_for(int t, int h, int w) const {
    const std::string key = std::to_string(t) + "x" + std::to_string(h) + "x" + std::to_string(w);
    auto it = pe_cache_.find(key);
    if (it == pe_cache_.end()) {
        it = pe_cache_.emplace(key, positional_encoding(t, cfg_.channels, h, w)).first;
    }
    return it->second;
}

Tensor VsrTransformer::extract_features(const Tensor& frames, Tape* tape) const {
    Tensor h = conv(frames, stem_, tape);
    for (const auto& rb : extractor_) h = res_block(h, rb, cfg_.leaky_slope, tape);
    return h;
}

Tensor VsrTransformer::upsample_frames(const Tensor& frames, Tape* tape) const {
    if (cfg_.global_residual == "bicubic") return bicubic_resample(frames, double(cfg_.scale));
    return ops::upsample_bilinear(frames, cfg_.scale, tape);
}

Tensor VsrTransformer::reconstruct(const Tensor& features, const Tensor& frames, Tape* tape) const {
    Tensor h = features;
    for (const auto& rb : recon_) h = res_block(h, rb, cfg_.leaky_slope, tape);
    for (const auto& up : up_) {
        h = ops::leaky_relu(ops::pixel_shuffle(conv(h, up, tape), 2, tape), cfg_.leaky_slope, tape);
    }
    h = conv(h, final_, tape);
    return ops::add(h, upsample_frames(frames, tape), tape);
}

FlowPair VsrTransformer::zero_flows(const Tensor& frames) const {
    const Shape d{frames.dim(0), 2, frames.dim(2), frames.dim(3)};
    return {Tensor(d), Tensor(d)};
}

FlowPair VsrTransformer::flows_for(const Tensor& frames, const FlowPair* gt, Tape* tape) const {
    if (cfg_.flow_estimator == "zero") return zero_flows(frames);
    if (cfg_.flow_estimator == "ground_truth") {
        if (!gt) {
            throw UnsupportedError("flow_estimator=ground_truth requires synthetic data with known motion");
        }
        return *gt;
    }
    return estimate_bidirectional(frames, *spynet_, tape);
}

Tensor VsrTransformer::forward(const Tensor& frames, const FlowPair& flows, Tape* tape,
                               const std::string& ablation) const {
    if (frames.ndim() != 4 || frames.dim(1) != 3) {
        throw ShapeError("forward expects frames [T,3,H,W], got " + shape_str(frames.dims()));
    }
    const int t = int(frames.dim(0)), h = int(frames.dim(2)), w = int(frames.dim(3));
    Tensor x = extract_features(frames, tape);
    if (cfg_.pe_mode == "input") x = ops::add(x, pe_for(t, h, w), tape);
    for (const auto& blk : blocks_) {
        if (cfg_.pe_mode == "per_block") x = ops::add(x, pe_for(t, h, w), tape);
        Tensor value_map;
        if (ablation != "no_stcsa") {
            StcsaOut so = stcsa_forward(x, blk.stcsa, cfg_, tape);
            x = so.y;
            value_map = so.value_map;
        }
        if (ablation == "no_boff") {
            x = token_feedforward_video(x, blk.token_ff, cfg_, tape);
        } else {
            Tensor aux = frames;
            if (cfg_.boff_concat == "value") {
                if (!value_map.defined()) {
                    value_map = conv(x, blk.stcsa.heads[0].v, tape);
                }
                aux = value_map;
            }
            const FlowPair& fp = ablation == "no_flow" ? zero_flows(frames) : flows;
            x = boff_forward(x, aux, fp, blk.boff, cfg_, tape);
        }
    }
    return reconstruct(x, frames, tape);
}

Tensor VsrTransformer::super_resolve(const Tensor& frames, const FlowPair& flows,
                                     const std::string& ablation) const {
    return ops::clamp01(forward(frames, flows, nullptr, ablation));
}

std::size_t VsrTransformer::square_conv_param_count() const {
    std::size_t n = 0;
    const std::size_t c = std::size_t(cfg_.channels);
    for (const auto& e : store_.all()) {
        if (e.tensor.ndim() == 4 && e.tensor.dim(0) == c && e.tensor.dim(1) == c &&
            e.tensor.dim(2) == 3) {
            n += e.tensor.size();
        }
    }
    return n;
}

} // namespace vsrt
