#include "feddct/nn/network.hpp"

#include <stdexcept>
#include <unordered_set>

namespace feddct::nn {

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers))
{
    std::unordered_set<std::string> names, ids;
    for (const auto &l : layers_) {
        if (!names.insert(l.name).second)
            throw std::invalid_argument("duplicate layer name '" + l.name + "'");
        for (const auto &p : l.params)
            if (!ids.insert(p.id).second)
                throw std::invalid_argument("duplicate parameter id '" + p.id + "'");
    }
}

Var Network::forward(Tape &tape, Var x, const ForwardContext &ctx, std::size_t begin, std::size_t end)
{
    end = std::min(end, layers_.size());
    if (begin > end)
        throw std::out_of_range("layer range [" + std::to_string(begin) + ", " + std::to_string(end) + ") is empty");
    for (std::size_t i = begin; i < end; ++i)
        x = forward_layer(tape, layers_[i], x, ctx);
    return x;
}

Shape Network::output_shape(const Shape &sample_shape, std::size_t begin, std::size_t end) const
{
    Network copy = *this;
    Tape tape;
    Shape batched{1};
    batched.insert(batched.end(), sample_shape.begin(), sample_shape.end());
    Var out = copy.forward(tape, tape.constant(Tensor(batched)), ForwardContext{}, begin, end);
    Shape s = out.shape();
    s.erase(s.begin());
    return s;
}

std::vector<Parameter *> Network::parameters()
{
    std::vector<Parameter *> out;
    for (auto &l : layers_)
        for (auto &p : l.params)
            out.push_back(&p);
    return out;
}

std::vector<const Parameter *> Network::parameters() const
{
    std::vector<const Parameter *> out;
    for (const auto &l : layers_)
        for (const auto &p : l.params)
            out.push_back(&p);
    return out;
}

std::size_t Network::parameter_count() const
{
    std::size_t n = 0;
    for (const auto *p : parameters())
        n += p->value.size();
    return n;
}

Parameter *Network::find(const std::string &id)
{
    for (auto *p : parameters())
        if (p->id == id)
            return p;
    return nullptr;
}

void Network::init(const RngStream &rng)
{
    for (auto &l : layers_)
        init_layer(l, rng);
}

void Network::zero_momentum()
{
    for (auto *p : parameters())
        p->momentum.fill(0.0);
}

std::pair<Network, Network> Network::split(std::size_t cut) const
{
    if (cut < 1 || cut >= layers_.size())
        throw std::out_of_range("cut layer " + std::to_string(cut) + " outside [1, " +
                                std::to_string(layers_.size()) + ")");
    std::vector<Layer> lower(layers_.begin(), layers_.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<Layer> upper(layers_.begin() + static_cast<std::ptrdiff_t>(cut), layers_.end());
    return {Network(std::move(lower)), Network(std::move(upper))};
}

Network Network::merge(const Network &lower, const Network &upper)
{
    std::vector<Layer> all = lower.layers_;
    all.insert(all.end(), upper.layers_.begin(), upper.layers_.end());
    return Network(std::move(all));
}

} // namespace feddct::nn
