#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace ccp {

/// Dense row-major container of 64-bit floats with an arbitrary-rank shape.
/// Invariant: product(shape) == data.size().
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v);
    static Tensor ones(std::vector<std::size_t> shape) { return full(std::move(shape), 1.0); }

    /// 2-d tensor from nested braces: Tensor::from_rows({{1,2},{3,4}}).
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool is_scalar() const { return data_.size() == 1; }

    /// Row/column counts; throws unless rank is exactly 2.
    std::size_t rows() const;
    std::size_t cols() const;

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j);
    double at3(std::size_t i, std::size_t j, std::size_t k) const;
    double& at3(std::size_t i, std::size_t j, std::size_t k);

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    /// Same data under a new shape (element count must match).
    Tensor reshaped(std::vector<std::size_t> new_shape) const;

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

/// C = A * B for 2-d tensors, written into a pre-shaped output.
void matmul_into(const Tensor& a, const Tensor& b, Tensor& out);

}  // namespace ccp
