#include "mvp/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace mvp {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape");
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}

Tensor::Tensor(Shape shape, const std::vector<double>& data)
    : Tensor(std::move(shape), Buffer(data.begin(), data.end())) {}

Tensor::Tensor(Shape shape, Buffer data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (NumElements(shape_) != static_cast<int64_t>(data_.size())) {
    throw std::invalid_argument("tensor data size " +
                                std::to_string(data_.size()) +
                                " does not match shape " +
                                ShapeToString(shape_));
  }
}

Tensor Tensor::Matrix(int64_t rows, int64_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::Reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::RowSlice(int64_t begin, int64_t end) const {
  if (begin < 0 || end > rows() || begin > end) {
    throw std::out_of_range("row slice out of range");
  }
  const int64_t c = cols();
  Buffer out(data_.begin() + begin * c, data_.begin() + end * c);
  return Tensor({end - begin, c}, std::move(out));
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::Sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::MaxAbs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor Stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("Stack of zero tensors");
  Shape shape = parts.front().shape();
  Buffer data;
  data.reserve(parts.size() * parts.front().size());
  for (const Tensor& t : parts) {
    if (t.shape() != shape) throw std::invalid_argument("Stack shape mismatch");
    data.insert(data.end(), t.storage().begin(), t.storage().end());
  }
  shape.insert(shape.begin(), static_cast<int64_t>(parts.size()));
  return Tensor(std::move(shape), std::move(data));
}

Tensor ConcatRows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatRows of zero tensors");
  const int64_t c = parts.front().cols();
  int64_t r = 0;
  Buffer data;
  for (const Tensor& t : parts) {
    if (t.cols() != c) throw std::invalid_argument("ConcatRows col mismatch");
    r += t.rows();
    data.insert(data.end(), t.storage().begin(), t.storage().end());
  }
  return Tensor({r, c}, std::move(data));
}

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("MaxAbsDiff size mismatch");
  }
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

bool BitwiseEqual(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace mvp
