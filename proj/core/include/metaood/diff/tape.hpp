#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string_view>
#include <vector>

#include "metaood/diff/matrix.hpp"

namespace metaood::diff {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    const Matrix& grad() const;
    Shape shape() const { return value().shape(); }
    double item() const { return value().item(); }
    bool requires_grad() const;

    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Records executed ops in order and replays their local gradient rules in reverse.
///
/// A tape is single-threaded. Independent tapes share nothing and can run on
/// separate threads.
class Tape {
public:
    // Receives the tape and the id of the node whose gradient is being propagated.
    using BackwardFn = std::function<void(Tape&, std::size_t)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Matrix value, bool requires_grad = true);
    Var constant(Matrix value) { return leaf(std::move(value), false); }
    Var scalar(double v, bool requires_grad = false) { return leaf(Matrix::scalar(v), requires_grad); }

    /// Appends an op result. Inputs must live on this tape; a non-finite value raises
    /// NonFiniteError naming `op`.
    Var record(std::string_view op, Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(std::string_view op, Matrix value, const std::vector<Var>& inputs, BackwardFn fn);

    /// Reverse sweep from a scalar loss. Gradients accumulate into every node that
    /// requires them; call zero_grad() before reusing the tape for a second sweep.
    void backward(const Var& loss);
    void zero_grad();

    std::size_t size() const noexcept { return nodes_.size(); }

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// grad[id] += g when the node tracks gradients; no-op otherwise.
    void accumulate(std::size_t id, const Matrix& g);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var push(std::string_view op, Matrix value, bool requires_grad, BackwardFn fn);
    void check_owner(const Var& v, std::string_view op) const;

    std::deque<Node> nodes_;  // stable references across push_back
};

}  // namespace metaood::diff
