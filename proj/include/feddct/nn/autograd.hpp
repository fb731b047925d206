#pragma once

#include "feddct/nn/tensor.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace feddct::nn {

/// Trainable tensor with its optimizer state.
struct Parameter {
    std::string id;
    Tensor value;
    Tensor momentum;            // same shape as value
    std::optional<Tensor> grad; // populated by Tape::backward

    Parameter() = default;
    Parameter(std::string id_, Tensor value_)
        : id(std::move(id_)), value(std::move(value_)), momentum(Tensor::zeros_like(value))
    {
    }
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// tape is alive and has not been reset.
class Var {
public:
    Var() = default;

    const Tensor &value() const;
    const Shape &shape() const { return value().shape(); }
    // Gradient after backward; throws if the node received none.
    const Tensor &grad() const;
    bool has_grad() const;

    Tape &tape() const { return *tape_; }
    std::size_t index() const noexcept { return index_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape *tape, std::size_t index) : tape_(tape), index_(index) {}

    Tape *tape_ = nullptr;
    std::size_t index_ = 0;
};

struct GradContext {
    const Tensor &out_value;
    const Tensor &out_grad;
    std::span<const Tensor *const> in_values;
    // nullptr for inputs that do not require a gradient.
    std::span<Tensor *const> in_grads;
};

using BackwardFn = std::function<void(const GradContext &)>;

class AutogradError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Reverse-mode tape.
///
/// Nodes are appended in creation order and backward visits them in strict
/// reverse order, so gradient accumulation order is fixed by the order in
/// which the forward computation was recorded.
class Tape {
public:
    Tape() = default;
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    // Input that never receives a gradient.
    Var constant(Tensor value);
    // Input whose gradient is kept on the tape (e.g. smashed data at a cut).
    Var leaf(Tensor value);
    // Bound parameter; backward accumulates into param.grad.
    Var parameter(Parameter &param);

    Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn)
    {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
    }

    // root must hold a single element; its gradient is seeded with 1.
    void backward(Var root);

    struct Seed {
        Var node;
        Tensor grad;
    };
    // Seeds each node's gradient (in the given order) and propagates.
    void backward(std::span<const Seed> seeds);

    bool consumed() const noexcept { return consumed_; }
    void reset();
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    friend class Var;

    struct Node {
        Tensor value;
        std::optional<Tensor> grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
        bool keep_grad = false;
        Parameter *param = nullptr;
    };

    void check_owned(const Var &v) const;
    void propagate(std::size_t top);

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

} // namespace feddct::nn
