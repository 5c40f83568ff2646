#include "galattice/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace galattice {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, const std::vector<double>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (data_.size() != shape_size(shape_))
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                    shape_string(shape_));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
    if (shape_.size() <= 1) return 1;
    return data_.size() / shape_.back();
}

std::size_t Tensor::cols() const {
    if (shape_.empty()) return data_.size();
    return shape_.back();
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(Shape shape) {
    if (shape_size(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
}

void Tensor::resize(Shape shape, double fill) {
    shape_ = std::move(shape);
    data_.assign(shape_size(shape_), fill);
}

}  // namespace galattice
