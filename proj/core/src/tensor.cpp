#include "ccp/tensor.hpp"

#include <cmath>
#include <sstream>

#include "ccp/errors.hpp"

namespace ccp {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_product(shape_) != data_.size()) {
        throw ShapeError("tensor: " + std::to_string(data_.size()) +
                         " values do not fill shape " + shape_to_string(shape_));
    }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("from_rows: ragged initializer");
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows(): tensor has shape " + shape_str());
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols(): tensor has shape " + shape_str());
    return shape_[1];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
}

double Tensor::at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double& Tensor::at3(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (shape_product(new_shape) != data_.size()) {
        throw ShapeError("reshape: " + shape_str() + " -> " + shape_to_string(new_shape));
    }
    return Tensor(std::move(new_shape), data_);
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.data().data();
    std::fill(out.data().begin(), out.data().end(), 0.0);
    // i-k-j order keeps the inner loop contiguous in both B and C
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace ccp
