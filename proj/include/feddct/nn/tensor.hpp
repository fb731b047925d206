#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace feddct::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape &shape);
std::string shape_string(const Shape &shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Dense row-major array of doubles. Value type; copies are deep.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value);
    static Tensor zeros_like(const Tensor &other) { return Tensor(other.shape()); }

    const Shape &shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double *data() noexcept { return data_.data(); }
    const double *data() const noexcept { return data_.data(); }

    double &operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // Same values, different shape. Throws ShapeError if sizes differ.
    Tensor reshaped(Shape shape) const;

    // Rows [begin, end) along axis 0.
    Tensor slice_rows(std::size_t begin, std::size_t end) const;

    void fill(double value);
    void add_inplace(const Tensor &other);

    // Bitwise value equality including shape.
    bool identical(const Tensor &other) const;

private:
    Shape shape_;
    std::vector<double> data_;
};

double max_abs_diff(const Tensor &a, const Tensor &b);

} // namespace feddct::nn
