#include "metaood/diff/tape.hpp"

#include <string>

#include "metaood/error.hpp"

namespace metaood::diff {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Matrix value, bool requires_grad) {
    return push("leaf", std::move(value), requires_grad, nullptr);
}

void Tape::check_owner(const Var& v, std::string_view op) const {
    if (v.tape_ != this) {
        throw Error(std::string(op) + ": input belongs to a different tape");
    }
}

Var Tape::record(std::string_view op, Matrix value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
    bool needs_grad = false;
    for (const Var& v : inputs) {
        check_owner(v, op);
        needs_grad = needs_grad || nodes_[v.id_].requires_grad;
    }
    return push(op, std::move(value), needs_grad, needs_grad ? std::move(fn) : nullptr);
}

Var Tape::record(std::string_view op, Matrix value, const std::vector<Var>& inputs,
                 BackwardFn fn) {
    bool needs_grad = false;
    for (const Var& v : inputs) {
        check_owner(v, op);
        needs_grad = needs_grad || nodes_[v.id_].requires_grad;
    }
    return push(op, std::move(value), needs_grad, needs_grad ? std::move(fn) : nullptr);
}

Var Tape::push(std::string_view op, Matrix value, bool requires_grad, BackwardFn fn) {
    if (!value.all_finite()) {
        throw NonFiniteError(std::string(op) + ": produced a non-finite value");
    }
    Node node;
    node.requires_grad = requires_grad;
    if (requires_grad) node.grad = Matrix(value.rows(), value.cols());
    node.value = std::move(value);
    node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    Node& node = nodes_[id];
    if (!node.requires_grad) return;
    node.grad += g;
}

void Tape::zero_grad() {
    for (Node& node : nodes_) {
        if (node.requires_grad) node.grad = Matrix(node.value.rows(), node.value.cols());
    }
}

void Tape::backward(const Var& loss) {
    check_owner(loss, "backward");
    if (loss.value().size() != 1) {
        throw DimensionError("backward: loss must be a scalar");
    }
    if (!nodes_[loss.id_].requires_grad) return;
    nodes_[loss.id_].grad[0] += 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (node.backward) node.backward(*this, i);
    }
    for (std::size_t i = 0; i <= loss.id_; ++i) {
        if (nodes_[i].requires_grad && !nodes_[i].grad.all_finite()) {
            throw NonFiniteError("backward: non-finite gradient at node " + std::to_string(i));
        }
    }
}

}  // namespace metaood::diff
