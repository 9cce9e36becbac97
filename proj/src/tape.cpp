#include "vsrt/tape.hpp"

#include "vsrt/errors.hpp"

namespace vsrt {

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw GraphError("backward requires a scalar loss");
    }
    if (!produced(loss)) {
        throw GraphError("backward through a tensor that is not on the tape");
    }
    Tensor seed = loss;
    seed.ensure_grad();
    seed.grad_vec()[0] = 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output.has_grad()) it->fn();
    }
}

} // namespace vsrt
