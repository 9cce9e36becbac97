#pragma once

#include <string>
#include <vector>

#include "vsrt/rng.hpp"
#include "vsrt/tensor.hpp"

namespace vsrt {

// Ordered, name-addressed registry of trainable tensors. Creation order is
// the iteration order, which keeps optimizers, initialization and checkpoints
// deterministic.
class ParamStore {
public:
    enum class Init { Zero, UniformFanIn, One };

    struct Entry {
        std::string name;
        Tensor tensor;
        Init init;
    };

    Tensor add(const std::string& name, Shape dims, Init init = Init::UniformFanIn);
    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
    const std::vector<Entry>& all() const { return params_; }

    std::size_t count_scalars() const;
    void zero_all();
    void zero_grads();
    // UniformFanIn draws +-sqrt(1/fan_in); fan_in is the per-output input
    // count (dims beyond the first for conv/matrix weights).
    void init_default(Rng& rng);

private:
    std::vector<Entry> params_;
};

} // namespace vsrt
