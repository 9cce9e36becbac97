#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "vsrt/rng.hpp"

namespace vsrt {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& dims);
std::string shape_str(const Shape& dims);

// Dense row-major f32 tensor (last index fastest) with an optional gradient
// buffer. Copies are shallow handles; the gradient accumulates through the
// shared storage, which is what ties a parameter to its tape-computed grad.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape dims, float fill = 0.0f);

    static Tensor from(Shape dims, std::vector<float> values);
    static Tensor scalar(float v);
    static Tensor uniform(Shape dims, float lo, float hi, Rng& rng);
    static Tensor normal(Shape dims, float mean, float stddev, Rng& rng);

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& dims() const { return d_->dims; }
    std::size_t ndim() const { return d_->dims.size(); }
    std::size_t dim(std::size_t i) const { return d_->dims[i]; }
    std::size_t size() const { return d_->v.size(); }

    float* data() { return d_->v.data(); }
    const float* data() const { return d_->v.data(); }
    std::vector<float>& vec() { return d_->v; }
    const std::vector<float>& vec() const { return d_->v; }
    float item() const;
    // Reductions store their f64 accumulator here next to the f32 value;
    // finite-difference checks read it to difference below f32 resolution.
    double item_f64() const;
    void set_scalar_f64(double v) {
        d_->scalar64 = v;
        d_->has_scalar64 = true;
    }

    bool requires_grad() const { return d_ && d_->requires_grad; }
    Tensor& set_requires_grad(bool on);
    bool has_grad() const { return d_ && !d_->g.empty(); }
    void ensure_grad();
    void zero_grad();
    void drop_grad();
    float* grad_data() { return d_->g.data(); }
    const float* grad_data() const { return d_->g.data(); }
    std::vector<float>& grad_vec() { return d_->g; }
    const std::vector<float>& grad_vec() const { return d_->g; }

    Tensor clone() const;
    bool is(const Tensor& other) const { return d_ == other.d_; }
    const void* id() const { return d_.get(); }

private:
    struct Data {
        Shape dims;
        std::vector<float> v;
        std::vector<float> g;
        double scalar64 = 0.0;
        bool has_scalar64 = false;
        bool requires_grad = false;
    };
    std::shared_ptr<Data> d_;
};

// "VSRT" tensor file: magic 'VSRT', u32 version=1, u8 rank, rank x u64
// extents, then little-endian f32 payload. No padding anywhere.
void save_vsrt(const Tensor& t, const std::string& path);
Tensor load_vsrt(const std::string& path);

} // namespace vsrt
