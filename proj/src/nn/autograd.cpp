#include "feddct/nn/autograd.hpp"

#include <algorithm>

namespace feddct::nn {

const Tensor &Var::value() const
{
    if (!tape_)
        throw AutogradError("use of an unbound Var");
    return tape_->nodes_.at(index_).value;
}

bool Var::has_grad() const { return tape_ && tape_->nodes_.at(index_).grad.has_value(); }

const Tensor &Var::grad() const
{
    if (!has_grad())
        throw AutogradError("node " + std::to_string(index_) + " has no gradient");
    return *tape_->nodes_.at(index_).grad;
}

void Tape::check_owned(const Var &v) const
{
    if (&v.tape() != this)
        throw AutogradError("Var belongs to a different tape");
    if (v.index() >= nodes_.size())
        throw AutogradError("Var refers to a node that no longer exists");
}

Var Tape::constant(Tensor value)
{
    nodes_.push_back(Node{std::move(value), std::nullopt, {}, {}, false, false, nullptr});
    return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value)
{
    nodes_.push_back(Node{std::move(value), std::nullopt, {}, {}, true, true, nullptr});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter &param)
{
    nodes_.push_back(Node{param.value, std::nullopt, {}, {}, true, true, &param});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn)
{
    if (consumed_)
        throw AutogradError("tape already consumed by backward; reset before recording");
    Node node;
    node.value = std::move(value);
    node.inputs.reserve(inputs.size());
    for (const auto &in : inputs) {
        check_owned(in);
        node.inputs.push_back(in.index());
        node.requires_grad = node.requires_grad || nodes_[in.index()].requires_grad;
    }
    if (node.requires_grad)
        node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root)
{
    check_owned(root);
    if (nodes_[root.index()].value.size() != 1)
        throw AutogradError("backward root must be a single element, got shape " +
                            shape_string(nodes_[root.index()].value.shape()));
    const Seed seed{root, Tensor(nodes_[root.index()].value.shape(), 1.0)};
    backward(std::span<const Seed>(&seed, 1));
}

void Tape::backward(std::span<const Seed> seeds)
{
    if (consumed_)
        throw AutogradError("backward called twice on the same graph without reset");
    if (seeds.empty())
        throw AutogradError("backward needs at least one seed");
    std::size_t top = 0;
    for (const auto &s : seeds) {
        check_owned(s.node);
        auto &node = nodes_[s.node.index()];
        if (s.grad.shape() != node.value.shape())
            throw ShapeError("seed gradient " + shape_string(s.grad.shape()) + " does not match node " +
                             shape_string(node.value.shape()));
        if (node.grad)
            node.grad->add_inplace(s.grad);
        else
            node.grad = s.grad;
        top = std::max(top, s.node.index());
    }
    propagate(top);
    consumed_ = true;
}

void Tape::propagate(std::size_t top)
{
    std::vector<const Tensor *> in_values;
    std::vector<Tensor *> in_grads;
    for (std::size_t i = top + 1; i-- > 0;) {
        Node &node = nodes_[i];
        if (!node.grad || !node.backward)
            continue;
        in_values.clear();
        in_grads.clear();
        for (auto j : node.inputs) {
            Node &in = nodes_[j];
            in_values.push_back(&in.value);
            if (in.requires_grad) {
                if (!in.grad)
                    in.grad = Tensor::zeros_like(in.value);
                in_grads.push_back(&*in.grad);
            } else {
                in_grads.push_back(nullptr);
            }
        }
        node.backward(GradContext{node.value, *node.grad, in_values, in_grads});
        if (!node.keep_grad)
            node.grad.reset();
    }
    for (auto &node : nodes_) {
        if (!node.param || !node.grad)
            continue;
        if (node.param->grad)
            node.param->grad->add_inplace(*node.grad);
        else
            node.param->grad = *node.grad;
    }
}

void Tape::reset()
{
    nodes_.clear();
    consumed_ = false;
}

} // namespace feddct::nn
