#pragma once

// Minimal dense network: tanh hidden layers, identity output, reverse-mode
// gradients, Adam, and a central-difference gradient checker.
//
// All parameters live in one flat vector. Layer l occupies
//   [W_l (fan_in x fan_out, row-major) | b_l (fan_out)]
// which is also the order used by the binary weight export.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace pgl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

/// Raised when a numerical quantity that must stay finite does not.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DenseNet {
 public:
  DenseNet() = default;

  /// Zero-initialized network with the given layer widths (input first).
  explicit DenseNet(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("DenseNet needs at least an input and an output layer");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw std::invalid_argument("DenseNet layer sizes must be positive");
      offsets_.push_back(offset);
      offset += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(offset));
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  Eigen::Index param_count() const { return params_.size(); }

  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  Eigen::Map<RowMat> weights(int layer) {
    return {params_.data() + offsets_[layer], sizes_[layer], sizes_[layer + 1]};
  }
  Eigen::Map<const RowMat> weights(int layer) const {
    return {params_.data() + offsets_[layer], sizes_[layer], sizes_[layer + 1]};
  }
  Eigen::Map<Vec> bias(int layer) {
    return {params_.data() + offsets_[layer] + weight_count(layer), sizes_[layer + 1]};
  }
  Eigen::Map<const Vec> bias(int layer) const {
    return {params_.data() + offsets_[layer] + weight_count(layer), sizes_[layer + 1]};
  }

  std::size_t layer_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index weight_count(int layer) const {
    return static_cast<Eigen::Index>(sizes_[layer]) * sizes_[layer + 1];
  }

  friend bool operator==(const DenseNet& a, const DenseNet& b) {
    return a.sizes_ == b.sizes_ && a.params_ == b.params_;
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  Vec params_;
};

/// Post-activation values of every layer for a batch, input included.
struct ForwardTape {
  std::vector<Mat> activations;
  const Mat& output() const { return activations.back(); }
};

/// Batched forward pass. Rows of `inputs` are samples.
inline ForwardTape forward_batch(const DenseNet& net, const Mat& inputs) {
  if (inputs.cols() != net.input_size()) {
    throw std::invalid_argument("forward: input has " + std::to_string(inputs.cols()) + " columns, net expects " +
                                std::to_string(net.input_size()));
  }
  ForwardTape tape;
  tape.activations.reserve(net.num_layers() + 1);
  tape.activations.push_back(inputs);
  for (int l = 0; l < net.num_layers(); ++l) {
    Mat z = tape.activations.back() * net.weights(l);
    z.rowwise() += net.bias(l).transpose();
    if (l + 1 < net.num_layers()) z = z.array().tanh().matrix();
    tape.activations.push_back(std::move(z));
  }
  return tape;
}

inline Vec forward(const DenseNet& net, const Vec& input) {
  if (input.size() != net.input_size()) {
    throw std::invalid_argument("forward: input length " + std::to_string(input.size()) + " != net input size " +
                                std::to_string(net.input_size()));
  }
  Vec h = input;
  for (int l = 0; l < net.num_layers(); ++l) {
    Vec z = net.weights(l).transpose() * h + net.bias(l);
    h = (l + 1 < net.num_layers()) ? Vec(z.array().tanh().matrix()) : z;
  }
  return h;
}

/// Gradient of sum_rows <output_row, output_gradient_row> w.r.t. all parameters.
inline Vec backward_batch(const DenseNet& net, const ForwardTape& tape, const Mat& output_gradient) {
  if (output_gradient.rows() != tape.output().rows() || output_gradient.cols() != net.output_size()) {
    throw std::invalid_argument("backward: output gradient shape does not match the forward output");
  }
  Vec grad = Vec::Zero(net.param_count());
  Mat delta = output_gradient;
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    const Mat& in = tape.activations[l];
    Eigen::Map<RowMat> gw(grad.data() + net.layer_offset(l), net.layer_sizes()[l], net.layer_sizes()[l + 1]);
    gw.noalias() = in.transpose() * delta;
    Eigen::Map<Vec>(grad.data() + net.layer_offset(l) + net.weight_count(l), net.layer_sizes()[l + 1]) =
        delta.colwise().sum().transpose();
    if (l > 0) {
      Mat back = delta * net.weights(l).transpose();
      delta = back.array() * (1.0 - in.array().square());
    }
  }
  return grad;
}

inline Vec backward(const DenseNet& net, const Vec& input, const Vec& output_gradient) {
  if (output_gradient.size() != net.output_size()) {
    throw std::invalid_argument("backward: output gradient length " + std::to_string(output_gradient.size()) +
                                " != net output size " + std::to_string(net.output_size()));
  }
  auto tape = forward_batch(net, input.transpose());
  return backward_batch(net, tape, output_gradient.transpose());
}

/// Orthogonal initialization (QR of a Gaussian matrix) scaled by `hidden_gain`
/// for hidden layers and `output_gain` for the last layer. Biases are zeroed.
inline void init_orthogonal(DenseNet& net, Rng& rng, double hidden_gain = 1.0, double output_gain = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < net.num_layers(); ++l) {
    const int rows = net.layer_sizes()[l];
    const int cols = net.layer_sizes()[l + 1];
    const int big = std::max(rows, cols);
    const int small = std::min(rows, cols);
    Mat g(big, small);
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(big, small);
    // Sign fix makes the draw uniform over the orthogonal group.
    Vec d = qr.matrixQR().diagonal();
    for (int j = 0; j < small; ++j)
      if (d(j) < 0) q.col(j) *= -1.0;
    const double gain = (l + 1 == net.num_layers()) ? output_gain : hidden_gain;
    if (rows >= cols) {
      net.weights(l) = gain * q;
    } else {
      net.weights(l) = gain * q.transpose();
    }
    net.bias(l).setZero();
  }
}

struct AdamState {
  Vec first_moment;
  Vec second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_stab = 1e-8;

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : first_moment(Vec::Zero(n)), second_moment(Vec::Zero(n)) {}
};

enum class StepDirection { Descent, Ascent };

/// One bias-corrected Adam update in place. A non-finite gradient leaves both
/// the parameters and the state untouched and throws NonFiniteError.
inline void adam_step(Vec& params, const Vec& grads, AdamState& state, double learning_rate,
                      StepDirection direction = StepDirection::Descent) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment lengths differ");
  }
  if (!grads.allFinite()) throw NonFiniteError("adam_step: non-finite gradient entry");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double sign = direction == StepDirection::Ascent ? 1.0 : -1.0;
  params.array() += sign * learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon_stab);
}

/// A scalar reduction of the network output together with its gradient.
struct ScalarHead {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;

  static ScalarHead sum() {
    return {[](const Vec& y) { return y.sum(); }, [](const Vec& y) { return Vec(Vec::Ones(y.size())); }};
  }
  static ScalarHead weighted(Vec w) {
    return {[w](const Vec& y) { return w.dot(y); }, [w](const Vec&) { return w; }};
  }
  static ScalarHead half_squared_norm() {
    return {[](const Vec& y) { return 0.5 * y.squaredNorm(); }, [](const Vec& y) { return y; }};
  }
};

/// Entrywise |a - n| / max(|a|, |n|, floor), maximized over entries.
inline double max_relative_error(const Vec& analytic, const Vec& numeric, double floor = 1e-5) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("max_relative_error: length mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / denom);
  }
  return worst;
}

/// Central differences of an arbitrary scalar function of a parameter vector.
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& at, double h = 1e-5) {
  Vec x = at;
  Vec g(at.size());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + h;
    const double up = f(x);
    x(i) = orig - h;
    const double down = f(x);
    x(i) = orig;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline Vec finite_diff_gradient(const DenseNet& net, const Vec& input, const ScalarHead& head, double h = 1e-5) {
  DenseNet probe = net;
  return central_difference(
      [&](const Vec& p) {
        probe.params() = p;
        return head.value(forward(probe, input));
      },
      net.params(), h);
}

inline Vec analytic_gradient(const DenseNet& net, const Vec& input, const ScalarHead& head) {
  return backward(net, input, head.gradient(forward(net, input)));
}

inline double finite_diff_check(const DenseNet& net, const Vec& input, const ScalarHead& head, double h = 1e-5) {
  return max_relative_error(analytic_gradient(net, input, head), finite_diff_gradient(net, input, head, h));
}

// Binary export: little-endian. int32 count of layer sizes, the sizes as
// int32, then per layer the fan_in x fan_out weights row-major followed by
// the biases, all float64. Identical to the flat parameter order.

namespace detail {
inline bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const unsigned char*>(&probe) == 1;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if (!host_is_little_endian()) std::reverse(std::begin(bytes), std::end(bytes));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("weight file truncated");
  if (!host_is_little_endian()) std::reverse(std::begin(bytes), std::end(bytes));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}
}  // namespace detail

inline void write_weights(std::ostream& out, const DenseNet& net) {
  detail::write_le<std::int32_t>(out, static_cast<std::int32_t>(net.layer_sizes().size()));
  for (int s : net.layer_sizes()) detail::write_le<std::int32_t>(out, s);
  for (Eigen::Index i = 0; i < net.param_count(); ++i) detail::write_le<double>(out, net.params()(i));
}

inline void write_weights(const std::string& path, const DenseNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_weights(out, net);
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline DenseNet read_weights(std::istream& in) {
  const auto count = detail::read_le<std::int32_t>(in);
  if (count < 2 || count > 64) throw std::runtime_error("weight file: implausible layer count " + std::to_string(count));
  std::vector<int> sizes;
  for (std::int32_t i = 0; i < count; ++i) {
    const auto s = detail::read_le<std::int32_t>(in);
    if (s <= 0 || s > (1 << 20)) throw std::runtime_error("weight file: implausible layer size " + std::to_string(s));
    sizes.push_back(s);
  }
  DenseNet net(sizes);
  for (Eigen::Index i = 0; i < net.param_count(); ++i) net.params()(i) = detail::read_le<double>(in);
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("weight file: trailing bytes");
  return net;
}

inline DenseNet read_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_weights(in);
}

}  // namespace pgl
