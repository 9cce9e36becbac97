#pragma once

#include <string>
#include <vector>

#include "vsrt/config.hpp"
#include "vsrt/flow.hpp"
#include "vsrt/rng.hpp"
#include "vsrt/tensor.hpp"

namespace vsrt {

struct MotionSpec {
    float dx = 0.0f; // per-frame translation, HR pixels
    float dy = 0.0f;
    std::string kind = "gaussian-blobs";
    std::uint64_t seed = 0;
};

struct SamplePair {
    Tensor hr; // [T,3,s*H,s*W]
    Tensor lr; // [T,3,H,W]
    bool has_gt_flow = false;
    FlowPair gt_flow; // LR-resolution fields
    MotionSpec motion;
    int scale = 4;
};

// HR frames are subpixel translations of a fixed continuous pattern; the LR
// frames are its bicubic downsampling and the exact LR-scale flows come along.
SamplePair generate_sequence(const MotionSpec& spec, int frames, int hr_h, int hr_w, int scale);

// Separable Catmull-Rom (a = -0.5) cubic convolution, border replicate.
// factor in {1/4, 1/2, 1, 2, 4}; [C,H,W] or [T,C,H,W].
Tensor bicubic_resample(const Tensor& img, double factor);

// Deterministic augmentation pieces; flows are remapped with the geometry.
SamplePair hflip(const SamplePair& p);
SamplePair rot90(const SamplePair& p); // counter-clockwise; square frames only
SamplePair augment(const SamplePair& p, Rng& rng);

// Same LR window across frames; the HR window is scale x it.
SamplePair crop_lr_patches(const SamplePair& p, int size, int x0, int y0);
SamplePair crop_lr_patches_random(const SamplePair& p, int size, Rng& rng);

// P6 binary, maxval 255; floats map by round(v*255).
Tensor read_ppm(const std::string& path);           // [3,H,W] in [0,1]
void write_ppm(const Tensor& frame, const std::string& path);

struct Dataset {
    DataConfig config;
    std::vector<SamplePair> sequences;
};

Dataset generate_dataset(const DataConfig& cfg);
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

} // namespace vsrt
