#ifndef MVP_TENSOR_H_
#define MVP_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace mvp {

using Shape = std::vector<int64_t>;

// Cache-line aligned storage. Vectorized kernels pick their loop split from
// the buffer address, so a fixed alignment keeps results independent of
// where the allocator places a tensor.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::string ShapeToString(const Shape& shape);
int64_t NumElements(const Shape& shape);

// Dense row-major double tensor. The last dimension is treated as columns by
// the 2-D helpers; every leading dimension folds into rows.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, const std::vector<double>& data);
  Tensor(Shape shape, Buffer data);

  static Tensor Zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor Matrix(int64_t rows, int64_t cols,
                       std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_.at(i); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  int64_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  Buffer& storage() { return data_; }
  const Buffer& storage() const { return data_; }

  double& operator[](int64_t i) { return data_[i]; }
  double operator[](int64_t i) const { return data_[i]; }
  double& at(int64_t r, int64_t c) { return data_[r * cols() + c]; }
  double at(int64_t r, int64_t c) const { return data_[r * cols() + c]; }

  // Same data, new shape; element count must agree.
  Tensor Reshaped(Shape shape) const;
  // Rows [begin, end) of the 2-D view.
  Tensor RowSlice(int64_t begin, int64_t end) const;

  void Fill(double v);
  bool AllFinite() const;
  double Sum() const;
  double MaxAbs() const;

 private:
  Shape shape_;
  Buffer data_;
};

// Stacks tensors with identical shapes along a new leading axis.
Tensor Stack(const std::vector<Tensor>& parts);
// Concatenates the 2-D row views of tensors with equal column counts.
Tensor ConcatRows(const std::vector<Tensor>& parts);

double MaxAbsDiff(const Tensor& a, const Tensor& b);
bool BitwiseEqual(const Tensor& a, const Tensor& b);

}  // namespace mvp

#endif  // MVP_TENSOR_H_
