#pragma once

#include <functional>
#include <initializer_list>
#include <unordered_set>
#include <vector>

#include "vsrt/tensor.hpp"

namespace vsrt {

// Reverse-mode gradient tape. Ops append nodes in forward order; backward()
// replays them once in reverse, each node accumulating (+=) into its inputs'
// grad buffers so fan-out adds up naturally. One tape per thread of control.
class Tape {
public:
    void record(const char* op, const Tensor& output, std::function<void()> backward) {
        nodes_.push_back({op, output, std::move(backward)});
        produced_.insert(output.id());
    }

    bool produced(const Tensor& t) const { return produced_.count(t.id()) != 0; }

    // Seeds d(loss)/d(loss) = 1 and runs every reachable node's backward fn.
    void backward(const Tensor& loss);

    std::size_t size() const { return nodes_.size(); }
    const char* op_name(std::size_t i) const { return nodes_[i].op; }

    void clear() {
        nodes_.clear();
        produced_.clear();
    }

private:
    struct Node {
        const char* op;
        Tensor output;
        std::function<void()> fn;
    };
    std::vector<Node> nodes_;
    std::unordered_set<const void*> produced_;
};

// True when an op should record itself: a tape is active and some input is
// grad-bearing (either a leaf with requires_grad or an interior result).
inline bool taped(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    for (const Tensor* t : inputs) {
        if (t && t->defined() && t->requires_grad()) return true;
    }
    return false;
}

} // namespace vsrt
