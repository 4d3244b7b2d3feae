#include "marpo/approximator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "marpo/errors.hpp"

namespace marpo {
namespace {

constexpr const char* kCheckpointMagic = "marpo-checkpoint";
constexpr int kCheckpointVersion = 1;

// Orthogonal out x in matrix scaled by gain, via QR of a Gaussian matrix.
RowMatrix<double> orthogonal(std::size_t out, std::size_t in, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto rows = static_cast<Eigen::Index>(std::max(out, in));
  const auto cols = static_cast<Eigen::Index>(std::min(out, in));
  Eigen::MatrixXd gaussian(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) gaussian(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  RowMatrix<double> w = out >= in ? RowMatrix<double>(q) : RowMatrix<double>(q.transpose());
  return gain * w;
}

void init_network(const NetworkShape& shape, std::span<double> params, double hidden_gain,
                  double output_gain, std::mt19937_64& rng) {
  std::fill(params.begin(), params.end(), 0.0);
  const auto& widths = shape.widths();
  for (std::size_t layer = 0; layer < shape.layer_count(); ++layer) {
    const double gain = layer + 1 == shape.layer_count() ? output_gain : hidden_gain;
    const RowMatrix<double> w = orthogonal(widths[layer + 1], widths[layer], gain, rng);
    std::copy(w.data(), w.data() + w.size(), params.begin() + shape.layer_offset(layer));
  }
}

NetworkShape make_shape(std::size_t input, const NetworkConfig& config, std::size_t output) {
  std::vector<std::size_t> widths{input};
  for (std::size_t i = 0; i < config.hidden_layers; ++i) widths.push_back(config.hidden_width);
  widths.push_back(output);
  return NetworkShape(std::move(widths));
}

RowMatrix<double> as_row(std::span<const double> v) {
  RowMatrix<double> m(1, static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

void write_widths(std::ostream& out, const char* name, const NetworkShape& shape) {
  out << name << ' ' << shape.widths().size();
  for (std::size_t w : shape.widths()) out << ' ' << w;
  out << '\n';
}

NetworkShape read_widths(std::istream& in, const std::string& name) {
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != name || count < 2) {
    throw ValidationError("checkpoint: malformed '" + name + "' line");
  }
  std::vector<std::size_t> widths(count);
  for (auto& w : widths) {
    if (!(in >> w)) throw ValidationError("checkpoint: truncated '" + name + "' widths");
  }
  return NetworkShape(std::move(widths));
}

}  // namespace

NetworkShape::NetworkShape(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) {
    throw ValidationError("NetworkShape: need at least an input and an output width");
  }
  for (std::size_t w : widths_) {
    if (w == 0) throw ValidationError("NetworkShape: widths must be positive");
  }
}

std::size_t NetworkShape::parameter_count() const {
  return layer_offset(layer_count());
}

std::size_t NetworkShape::layer_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) offset += widths_[l + 1] * (widths_[l] + 1);
  return offset;
}

void mlp_backward(const NetworkShape& shape, std::span<const double> params,
                  const std::vector<RowMatrix<double>>& cache, const RowMatrix<double>& d_output,
                  std::span<double> grad) {
  if (cache.size() != shape.layer_count() + 1 || grad.size() != shape.parameter_count()) {
    throw ValidationError("mlp_backward: cache or gradient does not match the network");
  }
  const auto& widths = shape.widths();
  RowMatrix<double> delta = d_output;
  for (std::size_t layer = shape.layer_count(); layer-- > 0;) {
    const auto in = static_cast<Eigen::Index>(widths[layer]);
    const auto out = static_cast<Eigen::Index>(widths[layer + 1]);
    const std::size_t offset = shape.layer_offset(layer);
    Eigen::Map<const RowMatrix<double>> weights(params.data() + offset, out, in);
    Eigen::Map<RowMatrix<double>> d_weights(grad.data() + offset, out, in);
    Eigen::Map<Eigen::RowVectorXd> d_bias(grad.data() + offset + out * in, out);

    const RowMatrix<double>& input = cache[layer];
    d_weights.noalias() += delta.transpose() * input;
    d_bias += delta.colwise().sum();
    if (layer == 0) break;
    RowMatrix<double> d_input = delta * weights;
    // cache[layer] is tanh output of the previous layer.
    delta = d_input.array() * (1.0 - input.array().square());
  }
}

ParamSet::ParamSet(NetworkShape policy, NetworkShape value)
    : policy_(std::move(policy)),
      value_(std::move(value)),
      flat_(policy_.parameter_count() + value_.parameter_count(), 0.0) {
  if (value_.output_width() != 1) {
    throw ValidationError("ParamSet: value network must have a single output");
  }
}

std::span<const double> ParamSet::policy_params() const {
  return std::span<const double>(flat_).first(policy_.parameter_count());
}
std::span<const double> ParamSet::value_params() const {
  return std::span<const double>(flat_).subspan(policy_.parameter_count());
}
std::span<double> ParamSet::policy_params() {
  return std::span<double>(flat_).first(policy_.parameter_count());
}
std::span<double> ParamSet::value_params() {
  return std::span<double>(flat_).subspan(policy_.parameter_count());
}

ParamSet make_params(const NetworkConfig& config, std::size_t obs_dim, std::size_t action_count,
                     std::size_t state_dim, std::uint64_t seed) {
  ParamSet params(make_shape(obs_dim, config, action_count), make_shape(state_dim, config, 1));
  std::mt19937_64 rng(seed);
  init_network(params.policy_shape(), params.policy_params(), config.hidden_gain,
               config.policy_output_gain, rng);
  init_network(params.value_shape(), params.value_params(), config.hidden_gain,
               config.value_output_gain, rng);
  return params;
}

ActionDistribution::ActionDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ValidationError("ActionDistribution: empty action set");
  double total = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) {
      throw ValidationError("ActionDistribution: masses must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("ActionDistribution: masses must sum to 1");
  }
}

std::size_t ActionDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

RowMatrix<double> policy_probabilities(const ParamSet& params, const RowMatrix<double>& obs) {
  return softmax_rows<double>(mlp_forward<double>(params.policy_shape(), params.policy_params(), obs));
}

Eigen::VectorXd value_batch(const ParamSet& params, const RowMatrix<double>& states) {
  return mlp_forward<double>(params.value_shape(), params.value_params(), states).col(0);
}

ActionDistribution policy_forward(const ParamSet& params, std::span<const double> obs) {
  const RowMatrix<double> probs = policy_probabilities(params, as_row(obs));
  return ActionDistribution(std::vector<double>(probs.data(), probs.data() + probs.size()));
}

double value_forward(const ParamSet& params, std::span<const double> global_state) {
  return value_batch(params, as_row(global_state))(0);
}

std::pair<double, double> log_prob_and_entropy(const ActionDistribution& dist,
                                               std::size_t action) {
  if (action >= dist.size()) {
    throw ValidationError("log_prob_and_entropy: action index out of range");
  }
  double entropy = 0.0;
  for (double p : dist.probs()) {
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return {std::log(dist[action]), std::max(entropy, 0.0)};
}

void sgd_step(ParamSet& params, std::span<const double> grad, double learning_rate,
              OptimizerState& state) {
  if (grad.size() != params.size()) {
    throw ValidationError("sgd_step: gradient length does not match parameter count");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("sgd_step: learning rate must be finite and non-negative");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw NonFiniteGradientError("sgd_step: non-finite gradient entry");
  }
  auto theta = params.flat();
  if (state.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= learning_rate * grad[i];
    ++state.step;
    return;
  }
  if (state.first_moment.size() != theta.size()) {
    state.first_moment.assign(theta.size(), 0.0);
    state.second_moment.assign(theta.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grad[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    theta[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void write_checkpoint(std::ostream& out, const ParamSet& params) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  write_widths(out, "policy", params.policy_shape());
  write_widths(out, "value", params.value_shape());
  out << "count " << params.size() << '\n';
  char buffer[64];
  for (double v : params.flat()) {
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v, std::chars_format::hex);
    out.write(buffer, end - buffer);
    out << '\n';
  }
}

ParamSet read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) {
    throw ValidationError("checkpoint: missing header");
  }
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  }
  NetworkShape policy = read_widths(in, "policy");
  NetworkShape value = read_widths(in, "value");
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "count") throw ValidationError("checkpoint: missing count");
  ParamSet params(std::move(policy), std::move(value));
  if (count != params.size()) {
    throw ValidationError("checkpoint: parameter count does not match layer widths");
  }
  std::string token;
  for (double& v : params.flat()) {
    if (!(in >> token)) throw ValidationError("checkpoint: truncated parameter list");
    const char* first = token.data();
    const char* last = first + token.size();
    bool negative = false;
    if (first != last && *first == '-') {
      negative = true;
      ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::hex);
    if (ec != std::errc() || ptr != last) {
      if (token == "inf" || token == "-inf" || token == "nan" || token == "-nan") {
        throw ValidationError("checkpoint: non-finite parameter");
      }
      throw ValidationError("checkpoint: malformed value '" + token + "'");
    }
    if (negative) v = -v;
  }
  return params;
}

void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  write_checkpoint(out, params);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

ParamSet load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace marpo
