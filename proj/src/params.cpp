#include "vsrt/params.hpp"

#include <cmath>

#include "vsrt/errors.hpp"

namespace vsrt {

Tensor ParamStore::add(const std::string& name, Shape dims, Init init) {
    if (find(name)) throw ConfigError("duplicate parameter name: " + name);
    Tensor t(std::move(dims));
    t.set_requires_grad(true);
    params_.push_back({name, t, init});
    return t;
}

Tensor* ParamStore::find(const std::string& name) {
    for (auto& e : params_) {
        if (e.name == name) return &e.tensor;
    }
    return nullptr;
}

const Tensor* ParamStore::find(const std::string& name) const {
    for (const auto& e : params_) {
        if (e.name == name) return &e.tensor;
    }
    return nullptr;
}

std::size_t ParamStore::count_scalars() const {
    std::size_t n = 0;
    for (const auto& e : params_) n += e.tensor.size();
    return n;
}

void ParamStore::zero_all() {
    for (auto& e : params_) std::fill(e.tensor.vec().begin(), e.tensor.vec().end(), 0.0f);
}

void ParamStore::zero_grads() {
    for (auto& e : params_) e.tensor.zero_grad();
}

void ParamStore::init_default(Rng& rng) {
    for (auto& e : params_) {
        switch (e.init) {
        case Init::Zero:
            std::fill(e.tensor.vec().begin(), e.tensor.vec().end(), 0.0f);
            break;
        case Init::One:
            std::fill(e.tensor.vec().begin(), e.tensor.vec().end(), 1.0f);
            break;
        case Init::UniformFanIn: {
            std::size_t fan_in = 1;
            const Shape& d = e.tensor.dims();
            for (std::size_t i = 1; i < d.size(); ++i) fan_in *= d[i];
            if (d.size() == 1) fan_in = d[0];
            const float bound = float(std::sqrt(1.0 / double(fan_in)));
            for (auto& v : e.tensor.vec()) v = float(rng.uniform(-bound, bound));
            break;
        }
        }
    }
}

} // namespace vsrt
