#ifndef MARPO_MLP_HPP_
#define MARPO_MLP_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "marpo/errors.hpp"

namespace marpo {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Layer widths of a dense tanh network: widths[0] is the input width, the
/// last entry is the (linear) output width.
class NetworkShape {
 public:
  NetworkShape() = default;
  explicit NetworkShape(std::vector<std::size_t> widths);

  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t layer_count() const { return widths_.size() - 1; }
  std::size_t parameter_count() const;
  /// Offset of layer i's weight block within this network's parameters.
  /// The bias block follows the weights.
  std::size_t layer_offset(std::size_t layer) const;
  const std::vector<std::size_t>& widths() const { return widths_; }

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;

 private:
  std::vector<std::size_t> widths_;
};

/// Forward pass over a batch of row inputs. Hidden layers use tanh, the
/// output layer is linear. When `cache` is given it receives the input and
/// every layer's output (post-activation), for use by the backward pass.
template <typename Scalar>
RowMatrix<Scalar> mlp_forward(const NetworkShape& shape, std::span<const Scalar> params,
                              const RowMatrix<Scalar>& input,
                              std::vector<RowMatrix<Scalar>>* cache = nullptr) {
  if (static_cast<std::size_t>(input.cols()) != shape.input_width()) {
    throw ValidationError("mlp_forward: input width does not match the network");
  }
  if (params.size() != shape.parameter_count()) {
    throw ValidationError("mlp_forward: parameter count does not match the network");
  }
  if (cache) {
    cache->clear();
    cache->push_back(input);
  }
  RowMatrix<Scalar> current = input;
  const auto& widths = shape.widths();
  for (std::size_t layer = 0; layer < shape.layer_count(); ++layer) {
    const auto in = static_cast<Eigen::Index>(widths[layer]);
    const auto out = static_cast<Eigen::Index>(widths[layer + 1]);
    const Scalar* base = params.data() + shape.layer_offset(layer);
    Eigen::Map<const RowMatrix<Scalar>> weights(base, out, in);
    Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> bias(base + out * in, out);

    RowMatrix<Scalar> next = current * weights.transpose();
    next.rowwise() += bias;
    if (layer + 1 < shape.layer_count()) {
      next = next.unaryExpr([](Scalar v) { using std::tanh; return tanh(v); });
    }
    current = std::move(next);
    if (cache) cache->push_back(current);
  }
  return current;
}

/// Row-wise softmax.
template <typename Scalar>
RowMatrix<Scalar> softmax_rows(const RowMatrix<Scalar>& logits) {
  RowMatrix<Scalar> probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar peak = logits.row(r).maxCoeff();
    Scalar total = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      using std::exp;
      probs(r, c) = exp(logits(r, c) - peak);
      total += probs(r, c);
    }
    probs.row(r) /= total;
  }
  return probs;
}

/// Row-wise log-softmax, computed without forming probabilities first.
template <typename Scalar>
RowMatrix<Scalar> log_softmax_rows(const RowMatrix<Scalar>& logits) {
  RowMatrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar peak = logits.row(r).maxCoeff();
    Scalar total = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      using std::exp;
      total += exp(logits(r, c) - peak);
    }
    using std::log;
    const Scalar log_norm = peak + log(total);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) out(r, c) = logits(r, c) - log_norm;
  }
  return out;
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output) and the
/// cache filled by mlp_forward.
void mlp_backward(const NetworkShape& shape, std::span<const double> params,
                  const std::vector<RowMatrix<double>>& cache, const RowMatrix<double>& d_output,
                  std::span<double> grad);

}  // namespace marpo

#endif  // MARPO_MLP_HPP_
