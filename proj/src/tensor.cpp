#include "sesame/tensor.hpp"

#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>

namespace sesame {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) {
      throw DimensionError("tensor shape has a zero dimension: " +
                           Tensor::shape_str(shape));
    }
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    std::ostringstream msg;
    msg << "tensor data length " << data_.size() << " does not match shape "
        << shape_str(shape_);
    throw DimensionError(msg.str());
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  return Tensor(std::move(shape));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw DimensionError("matrix literal has ragged rows");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> entries) {
  return Tensor({entries.size()}, std::vector<double>(entries));
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return data_[i * shape_[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(double)) == 0;
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

std::string Tensor::shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Tensor& t) {
  os << t.shape_str() << '[';
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) os << ", ";
    if (i >= 16) {
      os << "...";
      break;
    }
    os << t[i];
  }
  return os << ']';
}

}  // namespace sesame
