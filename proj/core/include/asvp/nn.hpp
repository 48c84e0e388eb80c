#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "asvp/tensor.hpp"

namespace asvp {

// ---------------------------------------------------------------------------
// Convolution primitives (stride 1, zero "same" padding, odd kernel).

struct ConvShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 3;

  std::size_t weight_count() const noexcept { return out * in * kernel * kernel; }
};

/// y[b,o] = bias[o] + sum_i w[o,i] * x[b,i]. x is (B,in,H,W); y is resized to (B,out,H,W).
void conv2d_forward(const Tensor& x, std::span<const double> weight, std::span<const double> bias,
                    const ConvShape& shape, Tensor& y);

/// Accumulates into dweight/dbias; writes dx when non-null.
void conv2d_backward(const Tensor& x, std::span<const double> weight, const Tensor& dy, const ConvShape& shape,
                     std::span<double> dweight, std::span<double> dbias, Tensor* dx);

// ---------------------------------------------------------------------------
// Encoder / residual / decoder network.

enum class Activation { relu, identity };

/// head conv (in -> C), `blocks` residual blocks x + conv(act(conv(x))),
/// tail conv (C -> in) added onto the input image.
struct NetworkArch {
  std::size_t in_channels = 1;
  std::size_t channels = 16;
  std::size_t blocks = 4;
  std::size_t kernel = 3;
  Activation activation = Activation::relu;
  bool zero_init_tail = true;

  void validate() const;
  std::size_t parameter_count() const;
  std::size_t tap_count() const noexcept { return blocks; }
  std::size_t conv_count() const noexcept { return 2 * blocks + 2; }
  ConvShape conv_shape(std::size_t layer) const;

  friend bool operator==(const NetworkArch&, const NetworkArch&) = default;
};

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// head.weight, head.bias, block{i}.conv{1,2}.{weight,bias}, tail.weight, tail.bias.
std::vector<ParamSlice> parameter_layout(const NetworkArch& arch);

class Network {
 public:
  Network(NetworkArch arch, std::vector<double> params, std::uint64_t seed = 0);

  const NetworkArch& arch() const noexcept { return arch_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<ParamSlice>& layout() const noexcept { return layout_; }
  const ParamSlice& slice(const std::string& name) const;

  std::span<const double> weight(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;

  /// FNV-1a of the parameter bytes.
  std::uint64_t fingerprint() const noexcept;

 private:
  NetworkArch arch_;
  std::vector<double> params_;
  std::uint64_t seed_ = 0;
  std::vector<ParamSlice> layout_;
};

/// Weights uniform in +-1/sqrt(fan_in), zero biases, optional zero tail.
Network init_network(const NetworkArch& arch, std::uint64_t seed);

struct Tap {
  std::size_t index = 0;
  Tensor feature;
};
using TapBundle = std::vector<Tap>;

struct ForwardOutput {
  Tensor output;
  TapBundle taps;  // one per residual block, ascending
};

/// x is (B,in,H,W) or (in,H,W); the output has the same shape as x.
ForwardOutput forward(const Network& net, const Tensor& x);

// Single stages of the forward pass; composing them reproduces forward()
// bit for bit. Features are (B,C,H,W).
Tensor head_forward(const Network& net, const Tensor& x);
Tensor block_forward(const Network& net, std::size_t block, const Tensor& feature);
Tensor tail_forward(const Network& net, const Tensor& feature, const Tensor& skip);

/// Intermediate values needed for backpropagation.
///
/// A full pass starts at the image; a tail pass starts at the output of block
/// `first_block - 1` (a tap) and runs the remaining blocks plus the tail.
struct ForwardTrace {
  std::size_t first_block = 0;
  bool full = true;
  Tensor input;                   // image (full) or starting feature (tail)
  std::vector<Tensor> features;   // features[j]: input of block first_block + j; last entry feeds the tail
  std::vector<Tensor> pre;        // conv1 outputs before activation
  std::vector<Tensor> act;        // activations
  Tensor output;
};

ForwardTrace trace_forward(const Network& net, const Tensor& x);

/// Continue from the feature at `tap` through the remaining blocks and tail.
/// `skip` is the image added by the global skip (empty to omit it).
ForwardTrace trace_from_tap(const Network& net, std::size_t tap, const Tensor& feature, const Tensor& skip);

struct Backprop {
  std::vector<double> params;  // d loss / d params (all zeros for the head on tail passes)
  Tensor input;                // d loss / d trace.input, when requested
};

/// d_taps[i] is the gradient with respect to tap i (empty tensor == zero).
Backprop backward(const Network& net, const ForwardTrace& trace, const Tensor& d_output,
                  std::span<const Tensor> d_taps, bool want_input_grad);

// ---------------------------------------------------------------------------
// Losses and gradients.

/// Mean absolute difference; writes d/da into grad when non-null.
double l1_loss(const Tensor& a, const Tensor& b, Tensor* grad = nullptr);
/// Mean squared difference.
double l2_loss(const Tensor& a, const Tensor& b, Tensor* grad = nullptr);

struct LossGradients {
  Tensor d_output;              // empty == zero
  std::vector<Tensor> d_taps;   // tap_count entries, empty == zero
  std::vector<double> d_params; // direct parameter dependence, empty == zero
};

/// Scalar objective of one forward pass; fills the partial derivatives it depends on.
using Objective =
    std::function<double(const Network& net, const ForwardOutput& fwd, LossGradients& grads)>;

struct GradientResult {
  double loss = 0.0;
  std::vector<double> grad;
  Tensor input_grad;
};

/// Exact gradient of the objective with respect to the parameters (and the
/// input image when requested). Throws NumericError on non-finite values.
GradientResult value_and_grad(const Network& net, const Tensor& input, const Objective& objective,
                              bool want_input_grad = false);

// ---------------------------------------------------------------------------
// Adam.

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(std::size_t n, double learning_rate = 1e-4) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

// ---------------------------------------------------------------------------
// Checkpoints: <stem>.tensor holds the flat parameters, <stem>.json the arch.

void save_network(const std::filesystem::path& stem, const Network& net);
Network load_network(const std::filesystem::path& stem);

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

}  // namespace asvp
