#include "feddct/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace feddct::nn {

std::size_t shape_size(const Shape &shape)
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

std::string shape_string(const Shape &shape)
{
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i)
            out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill)
{
    for (auto d : shape_)
        if (d == 0)
            throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values))
{
    for (auto d : shape_)
        if (d == 0)
            throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
    if (shape_size(shape_) != data_.size())
        throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                         " values");
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_size(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const
{
    if (rank() == 0 || begin >= end || end > shape_[0])
        throw ShapeError("bad row slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         shape_string(shape_));
    const std::size_t row = data_.size() / shape_[0];
    Shape s = shape_;
    s[0] = end - begin;
    return Tensor(std::move(s), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * row),
                                                    data_.begin() + static_cast<std::ptrdiff_t>(end * row)));
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_inplace(const Tensor &other)
{
    if (other.shape_ != shape_)
        throw ShapeError("add: shape " + shape_string(other.shape_) + " vs " + shape_string(shape_));
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += other.data_[i];
}

bool Tensor::identical(const Tensor &other) const
{
    return shape_ == other.shape_ &&
           (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

double max_abs_diff(const Tensor &a, const Tensor &b)
{
    if (a.shape() != b.shape())
        throw ShapeError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace feddct::nn
