#include "asvp/nn.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "asvp/error.hpp"
#include "asvp/rng.hpp"
#include "asvp/tensor_file.hpp"

namespace asvp {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "' (expected relu|identity)");
}

void NetworkArch::validate() const {
  if (in_channels == 0) throw ConfigError("arch: in_channels must be >= 1");
  if (channels == 0) throw ConfigError("arch: channels must be >= 1");
  if (blocks == 0) throw ConfigError("arch: at least one residual block is required");
  if (kernel % 2 == 0) throw ConfigError("arch: kernel size must be odd");
}

ConvShape NetworkArch::conv_shape(std::size_t layer) const {
  if (layer == 0) return {in_channels, channels, kernel};
  if (layer + 1 == conv_count()) return {channels, in_channels, kernel};
  if (layer < conv_count()) return {channels, channels, kernel};
  throw ShapeError("conv layer " + std::to_string(layer) + " out of range");
}

std::size_t NetworkArch::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < conv_count(); ++l) {
    const ConvShape s = conv_shape(l);
    n += s.weight_count() + s.out;
  }
  return n;
}

std::vector<ParamSlice> parameter_layout(const NetworkArch& arch) {
  std::vector<ParamSlice> layout;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t size) {
    layout.push_back({std::move(name), offset, size});
    offset += size;
  };
  for (std::size_t l = 0; l < arch.conv_count(); ++l) {
    std::string prefix;
    if (l == 0) {
      prefix = "head";
    } else if (l + 1 == arch.conv_count()) {
      prefix = "tail";
    } else {
      prefix = "block" + std::to_string((l - 1) / 2) + ".conv" + std::to_string((l - 1) % 2 + 1);
    }
    const ConvShape s = arch.conv_shape(l);
    add(prefix + ".weight", s.weight_count());
    add(prefix + ".bias", s.out);
  }
  return layout;
}

Network::Network(NetworkArch arch, std::vector<double> params, std::uint64_t seed)
    : arch_(arch), params_(std::move(params)), seed_(seed) {
  arch_.validate();
  if (params_.size() != arch_.parameter_count()) {
    throw ShapeError("network expects " + std::to_string(arch_.parameter_count()) + " parameters, got " +
                     std::to_string(params_.size()));
  }
  layout_ = parameter_layout(arch_);
}

const ParamSlice& Network::slice(const std::string& name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return s;
  }
  throw ConfigError("no parameter slice named '" + name + "'");
}

std::span<const double> Network::weight(std::size_t layer) const {
  const ParamSlice& s = layout_.at(2 * layer);
  return std::span<const double>(params_).subspan(s.offset, s.size);
}

std::span<const double> Network::bias(std::size_t layer) const {
  const ParamSlice& s = layout_.at(2 * layer + 1);
  return std::span<const double>(params_).subspan(s.offset, s.size);
}

std::uint64_t Network::fingerprint() const noexcept {
  return fnv1a(params_.data(), params_.size() * sizeof(double));
}

Network init_network(const NetworkArch& arch, std::uint64_t seed) {
  arch.validate();
  std::vector<double> params(arch.parameter_count(), 0.0);
  Rng rng(seed);
  const auto layout = parameter_layout(arch);
  for (std::size_t l = 0; l < arch.conv_count(); ++l) {
    const ParamSlice& w = layout[2 * l];
    if (l + 1 == arch.conv_count() && arch.zero_init_tail) continue;
    const ConvShape s = arch.conv_shape(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in * s.kernel * s.kernel));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (std::size_t i = 0; i < w.size; ++i) params[w.offset + i] = uniform(rng);
  }
  return Network(arch, std::move(params), seed);
}

namespace {

Tensor as_batch(const Tensor& x, const NetworkArch& arch) {
  if (x.rank() == 4 && x.dims()[1] == arch.in_channels) return x;
  if (x.rank() == 3 && x.dims()[0] == arch.in_channels) return x.reshaped({1, x.dims()[0], x.dims()[1], x.dims()[2]});
  throw ShapeError("network expects (B," + std::to_string(arch.in_channels) + ",H,W) input, got " +
                   shape_string(x.dims()));
}

void activate(Activation a, const Tensor& pre, Tensor& out) {
  out = pre;
  if (a == Activation::relu) {
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  }
}

void block_step(const Network& net, std::size_t b, const Tensor& in, Tensor& pre, Tensor& act, Tensor& res) {
  const NetworkArch& arch = net.arch();
  const std::size_t l1 = 1 + 2 * b, l2 = 2 + 2 * b;
  conv2d_forward(in, net.weight(l1), net.bias(l1), arch.conv_shape(l1), pre);
  activate(arch.activation, pre, act);
  conv2d_forward(act, net.weight(l2), net.bias(l2), arch.conv_shape(l2), res);
  auto r = res.data();
  auto x = in.data();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += x[i];
}

void tail_step(const Network& net, const Tensor& feature, const Tensor& skip, Tensor& out) {
  const std::size_t tail = net.arch().conv_count() - 1;
  conv2d_forward(feature, net.weight(tail), net.bias(tail), net.arch().conv_shape(tail), out);
  if (!skip.empty()) {
    if (skip.dims() != out.dims()) throw ShapeError("global skip shape mismatch");
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += skip[i];
  }
}

void run_blocks(const Network& net, ForwardTrace& t, std::size_t first) {
  for (std::size_t b = first; b < net.arch().blocks; ++b) {
    Tensor pre, act, res;
    block_step(net, b, t.features.back(), pre, act, res);
    t.pre.push_back(std::move(pre));
    t.act.push_back(std::move(act));
    t.features.push_back(std::move(res));
  }
}

void run_tail(const Network& net, ForwardTrace& t, const Tensor& skip) {
  tail_step(net, t.features.back(), skip, t.output);
}

}  // namespace

ForwardTrace trace_forward(const Network& net, const Tensor& x) {
  ForwardTrace t;
  t.full = true;
  t.first_block = 0;
  t.input = as_batch(x, net.arch());
  Tensor head;
  conv2d_forward(t.input, net.weight(0), net.bias(0), net.arch().conv_shape(0), head);
  t.features.push_back(std::move(head));
  run_blocks(net, t, 0);
  run_tail(net, t, t.input);
  return t;
}

ForwardTrace trace_from_tap(const Network& net, std::size_t tap, const Tensor& feature, const Tensor& skip) {
  const NetworkArch& arch = net.arch();
  if (tap >= arch.tap_count()) throw ShapeError("tap " + std::to_string(tap) + " out of range");
  if (feature.rank() != 4 || feature.dims()[1] != arch.channels) {
    throw ShapeError("tap feature must be (B," + std::to_string(arch.channels) + ",H,W), got " +
                     shape_string(feature.dims()));
  }
  ForwardTrace t;
  t.full = false;
  t.first_block = tap + 1;
  t.input = feature;
  t.features.push_back(feature);
  run_blocks(net, t, tap + 1);
  run_tail(net, t, skip);
  return t;
}

Tensor head_forward(const Network& net, const Tensor& x) {
  Tensor out;
  conv2d_forward(as_batch(x, net.arch()), net.weight(0), net.bias(0), net.arch().conv_shape(0), out);
  return out;
}

Tensor block_forward(const Network& net, std::size_t block, const Tensor& feature) {
  if (block >= net.arch().blocks) throw ShapeError("block " + std::to_string(block) + " out of range");
  Tensor pre, act, res;
  block_step(net, block, feature, pre, act, res);
  return res;
}

Tensor tail_forward(const Network& net, const Tensor& feature, const Tensor& skip) {
  Tensor out;
  tail_step(net, feature, skip.empty() ? skip : as_batch(skip, net.arch()), out);
  return out;
}

ForwardOutput forward(const Network& net, const Tensor& x) {
  ForwardTrace t = trace_forward(net, x);
  ForwardOutput out;
  out.taps.reserve(net.arch().blocks);
  for (std::size_t b = 0; b < net.arch().blocks; ++b) out.taps.push_back({b, std::move(t.features[b + 1])});
  out.output = x.rank() == 3 ? t.output.reshaped(x.dims()) : std::move(t.output);
  return out;
}

Backprop backward(const Network& net, const ForwardTrace& trace, const Tensor& d_output,
                  std::span<const Tensor> d_taps, bool want_input_grad) {
  const NetworkArch& arch = net.arch();
  const auto& layout = net.layout();
  Backprop bp;
  bp.params.assign(arch.parameter_count(), 0.0);
  auto wgrad = [&](std::size_t layer) {
    const ParamSlice& s = layout[2 * layer];
    return std::span<double>(bp.params).subspan(s.offset, s.size);
  };
  auto bgrad = [&](std::size_t layer) {
    const ParamSlice& s = layout[2 * layer + 1];
    return std::span<double>(bp.params).subspan(s.offset, s.size);
  };
  if (d_output.dims() != trace.output.dims()) {
    throw ShapeError("backward: d_output " + shape_string(d_output.dims()) + " vs output " +
                     shape_string(trace.output.dims()));
  }

  const std::size_t tail = arch.conv_count() - 1;
  Tensor g;
  conv2d_backward(trace.features.back(), net.weight(tail), d_output, arch.conv_shape(tail), wgrad(tail),
                  bgrad(tail), &g);

  Tensor d_act, d_in;
  const std::size_t run = trace.pre.size();
  for (std::size_t j = run; j-- > 0;) {
    const std::size_t b = trace.first_block + j;
    if (b < d_taps.size() && !d_taps[b].empty()) {
      if (d_taps[b].dims() != g.dims()) throw ShapeError("backward: tap gradient shape mismatch");
      auto gd = g.data();
      auto td = d_taps[b].data();
      for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += td[i];
    }
    const std::size_t l1 = 1 + 2 * b, l2 = 2 + 2 * b;
    conv2d_backward(trace.act[j], net.weight(l2), g, arch.conv_shape(l2), wgrad(l2), bgrad(l2), &d_act);
    if (arch.activation == Activation::relu) {
      auto da = d_act.data();
      auto pre = trace.pre[j].data();
      for (std::size_t i = 0; i < da.size(); ++i) {
        if (!(pre[i] > 0.0)) da[i] = 0.0;
      }
    }
    conv2d_backward(trace.features[j], net.weight(l1), d_act, arch.conv_shape(l1), wgrad(l1), bgrad(l1), &d_in);
    auto gd = g.data();
    auto di = d_in.data();
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += di[i];
  }

  if (trace.full) {
    Tensor d_image;
    conv2d_backward(trace.input, net.weight(0), g, arch.conv_shape(0), wgrad(0), bgrad(0),
                    want_input_grad ? &d_image : nullptr);
    if (want_input_grad) bp.input = d_image + d_output;
  } else if (want_input_grad) {
    bp.input = std::move(g);
  }
  return bp;
}

double l1_loss(const Tensor& a, const Tensor& b, Tensor* grad) {
  if (a.dims() != b.dims()) throw ShapeError("l1_loss: shape mismatch " + shape_string(a.dims()) + " vs " +
                                             shape_string(b.dims()));
  const double n = static_cast<double>(a.size());
  if (grad != nullptr && grad->dims() != a.dims()) *grad = Tensor(a.dims());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += std::abs(d);
    if (grad != nullptr) (*grad)[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
  }
  return acc / n;
}

double l2_loss(const Tensor& a, const Tensor& b, Tensor* grad) {
  if (a.dims() != b.dims()) throw ShapeError("l2_loss: shape mismatch " + shape_string(a.dims()) + " vs " +
                                             shape_string(b.dims()));
  const double n = static_cast<double>(a.size());
  if (grad != nullptr && grad->dims() != a.dims()) *grad = Tensor(a.dims());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
    if (grad != nullptr) (*grad)[i] = 2.0 * d / n;
  }
  return acc / n;
}

GradientResult value_and_grad(const Network& net, const Tensor& input, const Objective& objective,
                              bool want_input_grad) {
  const ForwardTrace trace = trace_forward(net, input);
  ForwardOutput fwd;
  fwd.output = input.rank() == 3 ? trace.output.reshaped(input.dims()) : trace.output;
  for (std::size_t b = 0; b < net.arch().blocks; ++b) fwd.taps.push_back({b, trace.features[b + 1]});

  LossGradients lg;
  GradientResult res;
  res.loss = objective(net, fwd, lg);
  if (!std::isfinite(res.loss)) throw NumericError("objective returned a non-finite loss");

  Tensor d_out = lg.d_output.empty() ? Tensor(trace.output.dims()) : lg.d_output.reshaped(trace.output.dims());
  Backprop bp = backward(net, trace, d_out, lg.d_taps, want_input_grad);
  if (!lg.d_params.empty()) {
    if (lg.d_params.size() != bp.params.size()) throw ShapeError("objective d_params has the wrong length");
    for (std::size_t i = 0; i < bp.params.size(); ++i) bp.params[i] += lg.d_params[i];
  }
  for (double g : bp.params) {
    if (!std::isfinite(g)) throw NumericError("non-finite parameter gradient");
  }
  res.grad = std::move(bp.params);
  if (want_input_grad) res.input_grad = input.rank() == 3 ? bp.input.reshaped(input.dims()) : std::move(bp.input);
  return res;
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || params.size() != s.m.size()) {
    throw ShapeError("adam_step: parameter/gradient/moment lengths differ");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

void save_network(const std::filesystem::path& stem, const Network& net) {
  const NetworkArch& a = net.arch();
  std::vector<double> values(net.params().begin(), net.params().end());
  save_tensor(stem.string() + ".tensor", Tensor({values.size()}, values));
  nlohmann::ordered_json j;
  j["arch"] = {{"in_channels", a.in_channels}, {"channels", a.channels},   {"blocks", a.blocks},
               {"kernel", a.kernel},           {"activation", to_string(a.activation)},
               {"zero_init_tail", a.zero_init_tail}};
  j["seed"] = net.seed();
  j["parameter_count"] = a.parameter_count();
  std::ofstream out(stem.string() + ".json");
  if (!out) throw IoError("cannot write checkpoint manifest '" + stem.string() + ".json'");
  out << j.dump(2) << '\n';
}

Network load_network(const std::filesystem::path& stem) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw IoError("cannot read checkpoint manifest '" + stem.string() + ".json'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest: " + std::string(e.what()));
  }
  NetworkArch a;
  try {
    const auto& ja = j.at("arch");
    a.in_channels = ja.at("in_channels").get<std::size_t>();
    a.channels = ja.at("channels").get<std::size_t>();
    a.blocks = ja.at("blocks").get<std::size_t>();
    a.kernel = ja.at("kernel").get<std::size_t>();
    a.activation = parse_activation(ja.at("activation").get<std::string>());
    a.zero_init_tail = ja.at("zero_init_tail").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest: " + std::string(e.what()));
  }
  const Tensor params = load_tensor(stem.string() + ".tensor");
  if (params.rank() != 1) throw FormatError("checkpoint parameters must be a rank-1 tensor");
  return Network(a, params.values(), j.value("seed", std::uint64_t{0}));
}

}  // namespace asvp
