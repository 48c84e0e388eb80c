#include "asvp/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "asvp/error.hpp"

namespace asvp {

std::size_t shape_size(const Shape& dims) noexcept {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ')';
  return os.str();
}

namespace {

void check_rank(const Shape& dims) {
  if (dims.empty() || dims.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got " + std::to_string(dims.size()));
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
}

}  // namespace

Tensor::Tensor(Shape dims) : Tensor(std::move(dims), 0.0) {}

Tensor::Tensor(Shape dims, double fill) : dims_(std::move(dims)) {
  check_rank(dims_);
  data_.assign(shape_size(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
  check_rank(dims_);
  if (shape_size(dims_) != data_.size()) {
    throw ShapeError("tensor " + shape_string(dims_) + " needs " + std::to_string(shape_size(dims_)) +
                     " values, got " + std::to_string(data_.size()));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= dims_.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range");
  return dims_[axis];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::reshaped(Shape dims) const { return Tensor(std::move(dims), data_); }

Tensor Tensor::batch_slice(std::size_t first, std::size_t count) const {
  if (dims_.empty() || first + count > dims_[0]) {
    throw ShapeError("batch slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + shape_string(dims_));
  }
  const std::size_t stride = data_.size() / dims_[0];
  Shape d = dims_;
  d[0] = count;
  return Tensor(std::move(d), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                                                  data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride)));
}

Tensor Tensor::stack(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  const Shape& inner = items.front().dims();
  if (inner.size() >= 4) throw ShapeError("stack would exceed rank 4");
  Shape d{items.size()};
  d.insert(d.end(), inner.begin(), inner.end());
  std::vector<double> data;
  data.reserve(shape_size(d));
  for (const auto& t : items) {
    if (t.dims() != inner) throw ShapeError("stack: inconsistent shapes");
    data.insert(data.end(), t.data_.begin(), t.data_.end());
  }
  return Tensor(std::move(d), std::move(data));
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  auto o = out.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "subtract");
  Tensor out = a;
  auto o = out.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double mean(const Tensor& t) {
  if (t.empty()) return 0.0;
  return std::accumulate(t.data().begin(), t.data().end(), 0.0) / static_cast<double>(t.size());
}

double stddev(const Tensor& t) {
  if (t.empty()) return 0.0;
  const double mu = mean(t);
  double acc = 0.0;
  for (double v : t.data()) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(t.size()));
}

double frobenius_norm_sq(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError("frobenius_norm_sq: non-finite entry");
    acc += v * v;
  }
  return acc;
}

double frobenius_norm_sq(const Matrix& m) {
  if (!m.allFinite()) throw NumericError("frobenius_norm_sq: non-finite entry");
  return m.squaredNorm();
}

Matrix matricize_sample(const Tensor& t, std::size_t b) {
  const std::size_t c_n = t.dims()[1], h_n = t.dims()[2], w_n = t.dims()[3];
  const std::size_t hw = h_n * w_n;
  Matrix m(static_cast<Eigen::Index>(hw), static_cast<Eigen::Index>(c_n));
  const double* base = t.data().data() + b * c_n * hw;
  // Column c of the (col-major) matrix is exactly channel c's contiguous plane.
  for (std::size_t c = 0; c < c_n; ++c) {
    std::copy(base + c * hw, base + (c + 1) * hw, m.col(static_cast<Eigen::Index>(c)).data());
  }
  return m;
}

void dematricize_sample(const Matrix& m, Tensor& out, std::size_t b) {
  const std::size_t c_n = out.dims()[1];
  const std::size_t hw = out.dims()[2] * out.dims()[3];
  if (static_cast<std::size_t>(m.rows()) != hw || static_cast<std::size_t>(m.cols()) != c_n) {
    throw ShapeError("dematricize: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " does not match feature map " + shape_string(out.dims()));
  }
  double* base = out.data().data() + b * c_n * hw;
  for (std::size_t c = 0; c < c_n; ++c) {
    const double* col = m.col(static_cast<Eigen::Index>(c)).data();
    std::copy(col, col + hw, base + c * hw);
  }
}

Matricized matricize(const Tensor& t) {
  Matricized out;
  if (t.rank() == 4) {
    out.origin = {t.dims()[0], t.dims()[1], t.dims()[2], t.dims()[3]};
    out.batched = true;
  } else if (t.rank() == 3) {
    out.origin = {1, t.dims()[0], t.dims()[1], t.dims()[2]};
    out.batched = false;
  } else {
    throw ShapeError("matricize expects a rank 3 or 4 feature map, got rank " + std::to_string(t.rank()));
  }
  const Tensor view = t.rank() == 4 ? t : t.reshaped({1, out.origin[1], out.origin[2], out.origin[3]});
  out.blocks.reserve(out.origin[0]);
  for (std::size_t b = 0; b < out.origin[0]; ++b) out.blocks.push_back(matricize_sample(view, b));
  return out;
}

Tensor dematricize(const Matricized& m) {
  const auto [b_n, c_n, h_n, w_n] = m.origin;
  if (m.blocks.size() != b_n) {
    throw ShapeError("dematricize: " + std::to_string(m.blocks.size()) + " blocks for batch of " +
                     std::to_string(b_n));
  }
  Tensor out({b_n, c_n, h_n, w_n});
  for (std::size_t b = 0; b < b_n; ++b) dematricize_sample(m.blocks[b], out, b);
  if (!m.batched) return out.reshaped({c_n, h_n, w_n});
  return out;
}

}  // namespace asvp
