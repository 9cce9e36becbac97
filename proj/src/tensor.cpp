#include "vsrt/tensor.hpp"

#include <cstdio>
#include <cstring>

#include "vsrt/errors.hpp"

namespace vsrt {

std::size_t numel(const Shape& dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

std::string shape_str(const Shape& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

static void check_dims(const Shape& dims) {
    for (auto d : dims) {
        if (d == 0) throw ShapeError("tensor dims must not contain a zero extent: " + shape_str(dims));
    }
}

Tensor::Tensor(Shape dims, float fill) {
    check_dims(dims);
    d_ = std::make_shared<Data>();
    d_->v.assign(numel(dims), fill);
    d_->dims = std::move(dims);
}

Tensor Tensor::from(Shape dims, std::vector<float> values) {
    check_dims(dims);
    if (numel(dims) != values.size()) {
        throw ShapeError("tensor data length " + std::to_string(values.size()) +
                         " does not match dims " + shape_str(dims));
    }
    Tensor t;
    t.d_ = std::make_shared<Data>();
    t.d_->dims = std::move(dims);
    t.d_->v = std::move(values);
    return t;
}

Tensor Tensor::scalar(float v) { return from({1}, {v}); }

Tensor Tensor::uniform(Shape dims, float lo, float hi, Rng& rng) {
    Tensor t(std::move(dims));
    for (auto& x : t.vec()) x = float(rng.uniform(lo, hi));
    return t;
}

Tensor Tensor::normal(Shape dims, float mean, float stddev, Rng& rng) {
    Tensor t(std::move(dims));
    for (auto& x : t.vec()) x = float(mean + stddev * rng.normal());
    return t;
}

float Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of size " + std::to_string(size()));
    return d_->v[0];
}

double Tensor::item_f64() const {
    if (size() != 1) throw ShapeError("item_f64() on tensor of size " + std::to_string(size()));
    return d_->has_scalar64 ? d_->scalar64 : double(d_->v[0]);
}

Tensor& Tensor::set_requires_grad(bool on) {
    d_->requires_grad = on;
    return *this;
}

void Tensor::ensure_grad() {
    if (d_->g.empty()) d_->g.assign(d_->v.size(), 0.0f);
}

void Tensor::zero_grad() {
    if (!d_->g.empty()) std::fill(d_->g.begin(), d_->g.end(), 0.0f);
}

void Tensor::drop_grad() { d_->g.clear(); }

Tensor Tensor::clone() const {
    Tensor t;
    t.d_ = std::make_shared<Data>(*d_);
    return t;
}

namespace {

struct File {
    std::FILE* f = nullptr;
    explicit File(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {}
    ~File() {
        if (f) std::fclose(f);
    }
};

} // namespace

void save_vsrt(const Tensor& t, const std::string& path) {
    File file(path, "wb");
    if (!file.f) throw IoError("cannot open for writing: " + path);
    const char magic[4] = {'V', 'S', 'R', 'T'};
    const std::uint32_t version = 1;
    const std::uint8_t rank = std::uint8_t(t.ndim());
    std::fwrite(magic, 1, 4, file.f);
    std::fwrite(&version, 4, 1, file.f);
    std::fwrite(&rank, 1, 1, file.f);
    for (auto d : t.dims()) {
        const std::uint64_t e = d;
        std::fwrite(&e, 8, 1, file.f);
    }
    if (std::fwrite(t.data(), 4, t.size(), file.f) != t.size()) {
        throw IoError("short write: " + path);
    }
}

Tensor load_vsrt(const std::string& path) {
    File file(path, "rb");
    if (!file.f) throw IoError("cannot open for reading: " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, file.f) != 4 || std::memcmp(magic, "VSRT", 4) != 0) {
        throw ParseError("bad VSRT magic in " + path);
    }
    std::uint32_t version = 0;
    if (std::fread(&version, 4, 1, file.f) != 1 || version != 1) {
        throw ParseError("unsupported VSRT version in " + path);
    }
    std::uint8_t rank = 0;
    if (std::fread(&rank, 1, 1, file.f) != 1 || rank == 0 || rank > 8) {
        throw ParseError("bad VSRT rank in " + path);
    }
    Shape dims(rank);
    for (auto& d : dims) {
        std::uint64_t e = 0;
        if (std::fread(&e, 8, 1, file.f) != 1 || e == 0) throw ParseError("bad VSRT extent in " + path);
        d = std::size_t(e);
    }
    const std::size_t n = numel(dims);
    std::vector<float> payload(n);
    const std::size_t got = std::fread(payload.data(), 4, n, file.f);
    if (got != n) {
        throw ParseError("truncated VSRT payload in " + path + ": expected " + std::to_string(n * 4) +
                         " bytes, got " + std::to_string(got * 4));
    }
    return Tensor::from(std::move(dims), std::move(payload));
}

} // namespace vsrt
