#include <algorithm>
#include <string>
#include <vector>

#include "asvp/error.hpp"
#include "asvp/nn.hpp"

namespace asvp {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Every plane lives on a zero-bordered (H+2p) x (W+2p) grid. On that grid the
// kernel tap (ky,kx) is a constant column offset ky*Wp + kx, so a convolution
// is k*k GEMMs over shifted column ranges of the same matrix.
struct Grid {
  std::size_t h, w, pad, hp, wp, cells, start, span;

  Grid(std::size_t h_, std::size_t w_, std::size_t k)
      : h(h_), w(w_), pad(k / 2), hp(h_ + 2 * (k / 2)), wp(w_ + 2 * (k / 2)), cells(hp * wp),
        start(pad * wp + pad), span(cells - 2 * (pad * wp + pad)) {}

  Eigen::Index first() const { return static_cast<Eigen::Index>(start); }
  Eigen::Index length() const { return static_cast<Eigen::Index>(span); }
  Eigen::Index offset(std::size_t ky, std::size_t kx) const { return static_cast<Eigen::Index>(ky * wp + kx); }

  void pad_planes(const double* src, std::size_t planes, RowMat& dst) const {
    dst.setZero(static_cast<Eigen::Index>(planes), static_cast<Eigen::Index>(cells));
    for (std::size_t c = 0; c < planes; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        std::copy_n(src + (c * h + y) * w, w, dst.data() + c * cells + (y + pad) * wp + pad);
      }
    }
  }

  void crop_planes(const RowMat& src, std::size_t planes, double* dst) const {
    for (std::size_t c = 0; c < planes; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        std::copy_n(src.data() + c * cells + (y + pad) * wp + pad, w, dst + (c * h + y) * w);
      }
    }
  }
};

// weight[o][i][ky][kx] -> one (out x in) matrix per kernel tap.
std::vector<RowMat> split_taps(std::span<const double> weight, const ConvShape& s) {
  const std::size_t kk = s.kernel * s.kernel;
  std::vector<RowMat> taps(kk, RowMat(static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in)));
  for (std::size_t o = 0; o < s.out; ++o)
    for (std::size_t i = 0; i < s.in; ++i)
      for (std::size_t t = 0; t < kk; ++t) {
        taps[t](static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) = weight[(o * s.in + i) * kk + t];
      }
  return taps;
}

void check_input(const Tensor& x, const ConvShape& shape) {
  if (x.rank() != 4 || x.dims()[1] != shape.in) {
    throw ShapeError("conv2d: expected (B," + std::to_string(shape.in) + ",H,W) input, got " +
                     shape_string(x.dims()));
  }
  if (shape.kernel % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
}

}  // namespace

void conv2d_forward(const Tensor& x, std::span<const double> weight, std::span<const double> bias,
                    const ConvShape& shape, Tensor& y) {
  check_input(x, shape);
  const std::size_t b_n = x.dims()[0], h = x.dims()[2], w = x.dims()[3];
  if (y.dims() != Shape{b_n, shape.out, h, w}) y = Tensor({b_n, shape.out, h, w});
  const Grid g(h, w, shape.kernel);
  const auto taps = split_taps(weight, shape);

  RowMat xp, yp(static_cast<Eigen::Index>(shape.out), static_cast<Eigen::Index>(g.cells));
  for (std::size_t b = 0; b < b_n; ++b) {
    g.pad_planes(x.data().data() + b * shape.in * h * w, shape.in, xp);
    auto acc = yp.middleCols(g.first(), g.length());
    for (Eigen::Index o = 0; o < acc.rows(); ++o) acc.row(o).setConstant(bias[static_cast<std::size_t>(o)]);
    for (std::size_t ky = 0; ky < shape.kernel; ++ky)
      for (std::size_t kx = 0; kx < shape.kernel; ++kx) {
        acc.noalias() += taps[ky * shape.kernel + kx] * xp.middleCols(g.offset(ky, kx), g.length());
      }
    g.crop_planes(yp, shape.out, y.data().data() + b * shape.out * h * w);
  }
}

void conv2d_backward(const Tensor& x, std::span<const double> weight, const Tensor& dy, const ConvShape& shape,
                     std::span<double> dweight, std::span<double> dbias, Tensor* dx) {
  check_input(x, shape);
  const std::size_t b_n = x.dims()[0], h = x.dims()[2], w = x.dims()[3];
  if (dy.dims() != Shape{b_n, shape.out, h, w}) throw ShapeError("conv2d_backward: dy shape mismatch");
  if (dx != nullptr && dx->dims() != x.dims()) *dx = Tensor(x.dims());
  const Grid g(h, w, shape.kernel);
  const std::size_t kk = shape.kernel * shape.kernel;
  const auto taps = split_taps(weight, shape);

  std::vector<RowMat> dtaps(kk, RowMat::Zero(static_cast<Eigen::Index>(shape.out), static_cast<Eigen::Index>(shape.in)));
  Eigen::VectorXd db = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.out));
  RowMat xp, gp, dxp;
  for (std::size_t b = 0; b < b_n; ++b) {
    g.pad_planes(x.data().data() + b * shape.in * h * w, shape.in, xp);
    g.pad_planes(dy.data().data() + b * shape.out * h * w, shape.out, gp);
    const auto grad = gp.middleCols(g.first(), g.length());
    db += gp.rowwise().sum();
    if (dx != nullptr) dxp.setZero(static_cast<Eigen::Index>(shape.in), static_cast<Eigen::Index>(g.cells));
    for (std::size_t ky = 0; ky < shape.kernel; ++ky)
      for (std::size_t kx = 0; kx < shape.kernel; ++kx) {
        const std::size_t t = ky * shape.kernel + kx;
        dtaps[t].noalias() += grad * xp.middleCols(g.offset(ky, kx), g.length()).transpose();
        if (dx != nullptr) dxp.middleCols(g.offset(ky, kx), g.length()).noalias() += taps[t].transpose() * grad;
      }
    if (dx != nullptr) g.crop_planes(dxp, shape.in, dx->data().data() + b * shape.in * h * w);
  }
  for (std::size_t o = 0; o < shape.out; ++o) {
    dbias[o] += db(static_cast<Eigen::Index>(o));
    for (std::size_t i = 0; i < shape.in; ++i)
      for (std::size_t t = 0; t < kk; ++t) {
        dweight[(o * shape.in + i) * kk + t] += dtaps[t](static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i));
      }
  }
}

}  // namespace asvp
