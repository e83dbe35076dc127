#include "tta/tape.hpp"

namespace tta {

namespace {
thread_local Tape* g_active = nullptr;
std::uint64_t g_next_tape_id = 1;

void add_into(Tensor& acc, const Tensor& g) {
    detail::check_same_shape(acc, g, "grad accumulate");
    float* a = acc.mutable_data();
    const float* b = g.data();
    const std::int64_t n = acc.numel();
    for (std::int64_t i = 0; i < n; ++i) a[i] += b[i];
}
}  // namespace

Tape::Tape() : id_(g_next_tape_id++), prev_(g_active) { g_active = this; }

Tape::~Tape() { g_active = prev_; }

Tape* Tape::active() { return g_active; }

Tensor Tape::watch(const std::string& name, const Tensor& t) {
    if (!t.defined()) throw ContractError("watch(" + name + "): undefined tensor");
    Tensor out = t;
    nodes_.push_back(Node{{}, nullptr, Tensor{}});
    out.node = static_cast<int>(nodes_.size()) - 1;
    out.tape_id = id_;
    leaves_.emplace_back(name, out.node);
    leaf_shapes_[name] = out.shape;
    return out;
}

void Tape::record(Tensor& out, std::vector<int> inputs, Backward pull) {
    nodes_.push_back(Node{std::move(inputs), std::move(pull), Tensor{}});
    out.node = static_cast<int>(nodes_.size()) - 1;
    out.tape_id = id_;
}

void Tape::Pull::add(int slot, const Tensor& grad) const {
    int node = (*inputs_)[static_cast<std::size_t>(slot)];
    if (node < 0) return;
    tape_->accumulate(node, grad);
}

bool Tape::Pull::needs(int slot) const {
    return (*inputs_)[static_cast<std::size_t>(slot)] >= 0;
}

void Tape::accumulate(int node, const Tensor& grad) {
    Node& n = nodes_[static_cast<std::size_t>(node)];
    if (!n.grad.defined())
        n.grad = grad;  // shares the buffer; add_into unshares on the next hit
    else
        add_into(n.grad, grad);
}

GradMap Tape::backward(const Tensor& loss) {
    if (!tracked(loss))
        throw ContractError("backward: loss was not recorded on this tape");
    if (loss.numel() != 1)
        throw ContractError("backward: loss must be a scalar, got " + shape_str(loss.shape));

    accumulate(loss.node, Tensor(loss.shape, 1.0f));

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.pull) continue;  // leaf
        if (n.grad.defined()) {
            Pull pull(this, &n.inputs);
            n.pull(n.grad, pull);
        }
        // Free the interior gradient and the saved activations captured by
        // the pullback as soon as they are no longer needed.
        n.grad = Tensor{};
        n.pull = nullptr;
    }

    GradMap grads;
    for (const auto& [name, node] : leaves_) {
        Node& n = nodes_[static_cast<std::size_t>(node)];
        if (n.grad.defined())
            grads[name] = n.grad;
        else
            grads[name] = Tensor(leaf_shapes_[name]);  // zeros: leaf unused by loss
        n.grad = Tensor{};
    }
    return grads;
}

bool maybe_record(Tensor& out, std::initializer_list<const Tensor*> operands, Tape::Backward pull) {
    Tape* tape = Tape::active();
    if (!tape) return false;
    std::vector<int> inputs;
    inputs.reserve(operands.size());
    bool any = false;
    for (const Tensor* t : operands) {
        if (tape->tracked(*t)) {
            inputs.push_back(t->node);
            any = true;
        } else {
            inputs.push_back(-1);
        }
    }
    if (!any) return false;
    tape->record(out, std::move(inputs), std::move(pull));
    return true;
}

}  // namespace tta
