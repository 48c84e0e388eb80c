#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace asvp {

using Shape = std::vector<std::size_t>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

std::size_t shape_size(const Shape& dims) noexcept;
std::string shape_string(const Shape& dims);

/// Dense row-major tensor of doubles, rank 1 to 4.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims);
  Tensor(Shape dims, double fill);
  Tensor(Shape dims, std::vector<double> data);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }

  // Rank-4 (B,C,H,W) element access.
  double at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((b * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }
  double& at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((b * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }

  bool all_finite() const noexcept;
  Tensor reshaped(Shape dims) const;

  /// Slice [first, first+count) along axis 0.
  Tensor batch_slice(std::size_t first, std::size_t count) const;
  /// Stack equally shaped tensors along a new leading axis.
  static Tensor stack(std::span<const Tensor> items);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape dims_;
  std::vector<double> data_;
};

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

double max_abs_diff(const Tensor& a, const Tensor& b);
double mean(const Tensor& t);
/// Population standard deviation over all entries.
double stddev(const Tensor& t);

/// Sum of squared entries; throws NumericError on non-finite input.
double frobenius_norm_sq(const Tensor& t);
double frobenius_norm_sq(const Matrix& m);

/// Feature map reshaped to one (H*W) x C matrix per batch element.
/// Row p*W+q, column c holds t[b,c,p,q].
struct Matricized {
  std::vector<Matrix> blocks;
  std::array<std::size_t, 4> origin{};  // B, C, H, W
  bool batched = true;                  // false when the source had rank 3

  std::size_t rows() const noexcept { return origin[2] * origin[3]; }
  std::size_t cols() const noexcept { return origin[1]; }
};

Matricized matricize(const Tensor& t);
Tensor dematricize(const Matricized& m);

/// One batch element as an (H*W) x C matrix, or the inverse.
Matrix matricize_sample(const Tensor& t, std::size_t b);
void dematricize_sample(const Matrix& m, Tensor& out, std::size_t b);

}  // namespace asvp
