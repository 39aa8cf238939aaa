#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pyroclass {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major n-dimensional array. Images are stored channel-first
/// (channels, height, width) with an optional leading batch extent.
///
/// A default-constructed tensor is empty (rank 0, no data) and only serves as
/// a placeholder; every factory enforces a non-empty shape with extents >= 1.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  static BasicTensor filled(Shape shape, T value);
  static BasicTensor zeros(Shape shape) { return filled(std::move(shape), T(0)); }
  /// Adopts `data`; throws ShapeError when its length disagrees with `shape`.
  static BasicTensor from(Shape shape, std::vector<T> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Multi-index access; the number of indices must equal rank().
  T& at(std::initializer_list<std::size_t> index);
  const T& at(std::initializer_list<std::size_t> index) const;

  /// Same data under a new shape of equal element count.
  BasicTensor reshaped(Shape shape) const&;
  BasicTensor reshaped(Shape shape) &&;

  /// Contiguous slice along axis 0 (e.g. one sample of a batch).
  BasicTensor slice0(std::size_t index) const;
  std::span<T> row0(std::size_t index);
  std::span<const T> row0(std::size_t index) const;

  void fill(T value);
  double sum() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>::from(shape_, std::move(out));
  }

  /// Bitwise equality of shape and contents.
  bool operator==(const BasicTensor& other) const = default;

 private:
  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {}

  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Standard matrix product of rank-2 tensors [m,k] x [k,n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace pyroclass
