#include "vsrt/flow.hpp"

#include <filesystem>
#include <fstream>

#include "vsrt/errors.hpp"
#include "vsrt/params.hpp"

namespace vsrt {

Tensor ZeroFlow::flow_between(const Tensor& frames, int, int, Tape*) const {
    return Tensor(Shape{2, frames.dim(2), frames.dim(3)});
}

Tensor GroundTruthFlow::flow_between(const Tensor& frames, int target, int source, Tape*) const {
    Tensor f(Shape{2, frames.dim(2), frames.dim(3)});
    const float k = float(source - target);
    const std::size_t plane = frames.dim(2) * frames.dim(3);
    for (std::size_t i = 0; i < plane; ++i) f.data()[i] = k * dx_;
    for (std::size_t i = 0; i < plane; ++i) f.data()[plane + i] = k * dy_;
    return f;
}

SpynetLite::SpynetLite(ParamStore& store, const std::string& prefix, int levels, int hidden)
    : levels_(levels), hidden_(hidden) {
    // per-level 5-layer stack: 8 -> h -> h -> h -> h -> 2, 3x3 convs
    const int chans[] = {8, hidden, hidden, hidden, hidden, 2};
    for (int l = 0; l < levels; ++l) {
        LevelNet net;
        for (int c = 0; c < 5; ++c) {
            const std::string base = prefix + ".l" + std::to_string(l) + ".c" + std::to_string(c);
            const bool head = c == 4;
            net.w.push_back(store.add(base + ".w",
                                      {std::size_t(chans[c + 1]), std::size_t(chans[c]), 3, 3},
                                      head ? ParamStore::Init::Zero : ParamStore::Init::UniformFanIn));
            net.b.push_back(store.add(base + ".b", {std::size_t(chans[c + 1])}, ParamStore::Init::Zero));
        }
        nets_.push_back(std::move(net));
    }
}

Tensor SpynetLite::pair_flow(const Tensor& target, const Tensor& source, Tape* tape) const {
    if (target.ndim() != 3 || source.ndim() != 3 || target.dims() != source.dims()) {
        throw ShapeError("spynet pair_flow expects two [3,H,W] frames");
    }
    const std::size_t h = target.dim(1), w = target.dim(2);
    const std::size_t div = std::size_t(1) << (levels_ - 1);
    if (h % div != 0 || w % div != 0) {
        throw ShapeError("spynet: frame " + shape_str(target.dims()) + " not divisible by " +
                         std::to_string(div));
    }
    std::vector<Tensor> p1{target}, p2{source};
    for (int l = 1; l < levels_; ++l) {
        p1.push_back(ops::downsample2x_avg(p1.back(), tape));
        p2.push_back(ops::downsample2x_avg(p2.back(), tape));
    }
    Tensor flow;
    for (int l = levels_ - 1; l >= 0; --l) {
        Tensor upflow = flow.defined()
                            ? ops::scale(ops::upsample_bilinear2x(flow, tape), 2.0f, tape)
                            : Tensor(Shape{2, p1[l].dim(1), p1[l].dim(2)});
        Tensor warped = ops::bilinear_warp(p2[l], upflow, tape);
        Tensor in = ops::concat_channels(ops::concat_channels(p1[l], warped, tape), upflow, tape);
        const LevelNet& net = nets_[l];
        Tensor hcur = in;
        for (int c = 0; c < 5; ++c) {
            hcur = ops::conv2d(hcur, net.w[c], &net.b[c], 1, 1, tape);
            if (c < 4) hcur = ops::leaky_relu(hcur, 0.1f, tape);
        }
        flow = ops::add(upflow, hcur, tape);
    }
    return flow;
}

Tensor SpynetLite::flow_between(const Tensor& frames, int target, int source, Tape* tape) const {
    Tensor ft = ops::slice_frame(frames, target, tape);
    Tensor fs = ops::slice_frame(frames, source, tape);
    return pair_flow(ft, fs, tape);
}

FlowPair estimate_bidirectional(const Tensor& frames, const FlowEstimator& estimator, Tape* tape) {
    if (frames.ndim() != 4) {
        throw ShapeError("estimate_bidirectional expects [T,C,H,W], got " + shape_str(frames.dims()));
    }
    const int t = int(frames.dim(0));
    std::vector<Tensor> back, fwd;
    back.reserve(t);
    fwd.reserve(t);
    for (int i = 0; i < t; ++i) {
        back.push_back(i == 0 ? estimator.flow_between(frames, 0, 0, tape)
                              : estimator.flow_between(frames, i - 1, i, tape));
    }
    for (int i = 0; i < t; ++i) {
        fwd.push_back(i == t - 1 ? estimator.flow_between(frames, t - 1, t - 1, tape)
                                 : estimator.flow_between(frames, i + 1, i, tape));
    }
    return {ops::stack_frames(back, tape), ops::stack_frames(fwd, tape)};
}

void save_flow_pair(const FlowPair& fp, const std::string& dir, const std::string& stem) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_vsrt(fp.backward, dir + "/" + stem + "_backward.vsrt");
    save_vsrt(fp.forward, dir + "/" + stem + "_forward.vsrt");
    std::ofstream m(dir + "/" + stem + "_flow_manifest.txt");
    if (!m) throw IoError("cannot write flow manifest in " + dir);
    m << stem << "_backward " << shape_str(fp.backward.dims()) << " " << stem
      << "_backward.vsrt direction=backward\n";
    m << stem << "_forward " << shape_str(fp.forward.dims()) << " " << stem
      << "_forward.vsrt direction=forward\n";
}

FlowPair load_flow_pair(const std::string& dir, const std::string& stem) {
    std::ifstream m(dir + "/" + stem + "_flow_manifest.txt");
    if (!m) throw IoError("missing flow manifest in " + dir);
    FlowPair fp;
    std::string name, dims, file, tag;
    while (m >> name >> dims >> file >> tag) {
        Tensor t = load_vsrt(dir + "/" + file);
        if (tag == "direction=backward") {
            fp.backward = t;
        } else if (tag == "direction=forward") {
            fp.forward = t;
        } else {
            throw ParseError("flow manifest entry without a direction tag: " + name);
        }
    }
    if (!fp.backward.defined() || !fp.forward.defined()) {
        throw ParseError("flow manifest incomplete in " + dir);
    }
    return fp;
}

} // namespace vsrt
