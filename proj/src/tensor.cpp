#include "pyroclass/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pyroclass/error.hpp"
#include "pyroclass/kernels.hpp"

namespace pyroclass {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("invalid shape: rank 0");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("invalid shape " + shape_string(shape) + ": extents must be >= 1");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> BasicTensor<T>::filled(Shape shape, T value) {
  check_shape(shape);
  std::vector<T> data(shape_size(shape), value);
  return BasicTensor(std::move(shape), std::move(data));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from(Shape shape, std::vector<T> data) {
  check_shape(shape);
  if (data.size() != shape_size(shape)) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_string(shape));
  }
  return BasicTensor(std::move(shape), std::move(data));
}

template <typename T>
std::size_t BasicTensor<T>::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range");
  return shape_[axis];
}

template <typename T>
std::size_t BasicTensor<T>::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) throw ShapeError("index rank mismatch");
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range");
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

template <typename T>
T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) {
  return data_[offset(index)];
}

template <typename T>
const T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(index)];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const& {
  return BasicTensor(*this).reshaped(std::move(shape));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) && {
  check_shape(shape);
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return BasicTensor(std::move(shape), std::move(data_));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::slice0(std::size_t index) const {
  auto r = row0(index);
  Shape s(shape_.begin() + 1, shape_.end());
  if (s.empty()) s = {1};
  return BasicTensor(std::move(s), std::vector<T>(r.begin(), r.end()));
}

template <typename T>
std::span<T> BasicTensor<T>::row0(std::size_t index) {
  if (shape_.empty() || index >= shape_[0]) throw ShapeError("row index out of range");
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<T>(data_).subspan(index * stride, stride);
}

template <typename T>
std::span<const T> BasicTensor<T>::row0(std::size_t index) const {
  if (shape_.empty() || index >= shape_[0]) throw ShapeError("row index out of range");
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<const T>(data_).subspan(index * stride, stride);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
double BasicTensor<T>::sum() const {
  double s = 0.0;
  for (auto v : data_) s += static_cast<double>(v);
  return s;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul expects rank-2 tensors");
  const auto m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw ShapeError("matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  auto c = BasicTensor<T>::zeros({m, n});
  kernels::gemm(kernels::Trans::No, kernels::Trans::No, m, n, k, a.raw(), b.raw(), c.raw(), false);
  return c;
}

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> matmul(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> matmul(const BasicTensor<double>&, const BasicTensor<double>&);
template double max_abs_diff(const BasicTensor<float>&, const BasicTensor<float>&);
template double max_abs_diff(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace pyroclass
