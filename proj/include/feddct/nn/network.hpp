#pragma once

#include "feddct/nn/layers.hpp"

#include <limits>
#include <utility>
#include <vector>

namespace feddct::nn {

// Ordered stack of layers. Tape nodes hold pointers to the parameters, so a
// Network must not be moved or resized while a tape referencing it is alive.
class Network {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    Network() = default;
    explicit Network(std::vector<Layer> layers);

    std::size_t size() const noexcept { return layers_.size(); }
    Layer &layer(std::size_t i) { return layers_.at(i); }
    const Layer &layer(std::size_t i) const { return layers_.at(i); }
    const std::vector<Layer> &layers() const noexcept { return layers_; }

    // Runs layers [begin, end).
    Var forward(Tape &tape, Var x, const ForwardContext &ctx, std::size_t begin = 0, std::size_t end = npos);

    // Output shape of layers [begin, end) for a single sample of the given shape.
    Shape output_shape(const Shape &sample_shape, std::size_t begin = 0, std::size_t end = npos) const;

    std::vector<Parameter *> parameters();
    std::vector<const Parameter *> parameters() const;
    std::size_t parameter_count() const; // scalar count, biases included
    Parameter *find(const std::string &id);

    void init(const RngStream &rng);
    void zero_momentum();

    // Layers [0, cut) and [cut, size). Requires 1 <= cut < size.
    std::pair<Network, Network> split(std::size_t cut) const;
    static Network merge(const Network &lower, const Network &upper);

private:
    std::vector<Layer> layers_;
};

} // namespace feddct::nn
