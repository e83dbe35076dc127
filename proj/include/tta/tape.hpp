#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tta/tensor.hpp"

namespace tta {

// Gradients keyed by parameter name after backward().
using GradMap = std::unordered_map<std::string, Tensor>;

// Reverse-mode tape. Ops executed while a tape is active append one node per
// produced tensor; backward() walks the node list once in reverse, calling
// each node's pullback with the accumulated output gradient.
//
// Usage per training step:
//   Tape tape;                          // becomes the active tape
//   tape.watch(name, param);            // register leaves
//   ... run ops ...
//   GradMap grads = tape.backward(loss);
// The tape is discarded afterwards; tensors recorded on it keep a stale
// tape_id and are treated as constants by any later tape.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Marks `t` as a differentiable leaf. Returns the watched tensor (same
    // buffer, now carrying a node handle).
    Tensor watch(const std::string& name, const Tensor& t);

    // Runs reverse accumulation from a scalar loss. Interior gradients and
    // saved activations are freed as soon as their node has been processed.
    // Leaves that no gradient reached get a zero tensor of their shape.
    GradMap backward(const Tensor& loss);

    std::uint64_t id() const { return id_; }
    std::size_t num_nodes() const { return nodes_.size(); }

    static Tape* active();

    // --- recording interface used by ops ---

    // True when `t` participates in this tape's graph.
    bool tracked(const Tensor& t) const { return t.node >= 0 && t.tape_id == id_; }

    // Gradient sink handed to pullbacks. Slot numbering follows the operand
    // order the op was recorded with; contributions to untracked slots are
    // dropped, and needs() lets the pullback skip computing them at all.
    class Pull {
    public:
        void add(int slot, const Tensor& grad) const;
        bool needs(int slot) const;

    private:
        friend class Tape;
        Pull(Tape* tape, const std::vector<int>* inputs) : tape_(tape), inputs_(inputs) {}
        Tape* tape_;
        const std::vector<int>* inputs_;
    };
    using Backward = std::function<void(const Tensor& grad_out, const Pull& pull)>;

    // Appends a node for `out`. `inputs` holds the node handle per operand
    // slot, -1 for constants.
    void record(Tensor& out, std::vector<int> inputs, Backward pull);

private:
    struct Node {
        std::vector<int> inputs;
        Backward pull;       // null for leaves
        Tensor grad;         // accumulated dL/d(node value)
    };

    void accumulate(int node, const Tensor& grad);

    std::uint64_t id_;
    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, int>> leaves_;
    std::unordered_map<std::string, Shape> leaf_shapes_;
    Tape* prev_ = nullptr;
};

// Records `out = f(operands...)` on the active tape when one exists and any
// operand is tracked; otherwise leaves `out` constant. Returns whether a
// node was recorded. Slot i in the pullback refers to operands[i].
bool maybe_record(Tensor& out, std::initializer_list<const Tensor*> operands, Tape::Backward pull);

}  // namespace tta
