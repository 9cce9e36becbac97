#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "vsrt/ops.hpp"
#include "vsrt/rng.hpp"
#include "vsrt/tape.hpp"
#include "vsrt/tensor.hpp"

namespace vsrt::testing {

struct FdReport {
    double max_rel_err = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
};

// Central finite differences against tape gradients. `build` composes ops on
// `inputs` with the given tape (nullptr for probe passes) and returns the
// scalar loss tensor. Differencing runs at f32 storage with the f64-carried
// scalar, step h, and a scale-aware relative error floor.
inline FdReport fd_check_graph(
    const std::function<Tensor(std::vector<Tensor>&, Tape*)>& build,
    std::vector<Tensor> inputs, double h = 1e-3) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    Tape tape;
    Tensor loss = build(inputs, &tape);
    tape.backward(loss);

    FdReport report;
    double gmax = 0.0;
    for (const auto& t : inputs) {
        if (!t.has_grad()) continue;
        for (std::size_t i = 0; i < t.size(); ++i) {
            gmax = std::max(gmax, std::abs(double(t.grad_data()[i])));
        }
    }
    // f32 intermediates put a fixed noise floor on the differenced loss, so
    // coordinates are judged relative to the gradient scale, not pointwise.
    const double floor = std::max(1e-8, 0.1 * gmax);

    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& t = inputs[ti];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const float saved = t.data()[i];
            t.data()[i] = float(double(saved) + h);
            const double fp = build(inputs, nullptr).item_f64();
            t.data()[i] = float(double(saved) - h);
            const double fm = build(inputs, nullptr).item_f64();
            t.data()[i] = saved;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = t.has_grad() ? double(t.grad_data()[i]) : 0.0;
            const double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor});
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_input = ti;
                report.worst_index = i;
            }
        }
    }
    return report;
}

inline Tensor random_tensor(Shape dims, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
    return Tensor::uniform(std::move(dims), lo, hi, rng);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(double(a.data()[i]) - double(b.data()[i])));
    }
    return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.dims() != b.dims()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.data()[i] != b.data()[i]) return false;
    }
    return true;
}

} // namespace vsrt::testing
