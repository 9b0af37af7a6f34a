// Bi-level chaotic feature transformation: logistic and tent chaotic
// branches applied as bounded residual perturbations with per-node adaptive
// strength, plus the volatility-regime gate and the center/width fusion.
#ifndef BCF_CHAOS_HPP
#define BCF_CHAOS_HPP

#include <vector>

#include "bcf/common.hpp"
#include "bcf/tensor.hpp"

namespace bcf {

enum class ChaosMap { logistic, tent };

// ---------------------------------------------------------------------------
// Raw maps

/// Logistic map r*x*(1-x) with a tensor-valued r (1x1, broadcast).
inline Tensor logistic_map(const Tensor& x, const Tensor& r) {
  Tensor one_minus = sub(Tensor::filled(1, 1, 1.0), x);
  return mul(r, mul(x, one_minus));
}

inline double logistic_map_value(double r, double x) { return r * x * (1.0 - x); }

/// Tent map at slope 2; the tensor op carries the left-branch subgradient.
inline Tensor tent_map(const Tensor& x) { return tent(x); }

inline double tent_map_value(double x) { return x < 0.5 ? 2.0 * x : 2.0 * (1.0 - x); }

// ---------------------------------------------------------------------------
// Chaotic branch

/// One chaotic branch (logistic for the center path, tent for the width
/// path). The logistic growth rate is reparameterized r = 3.57 +
/// 0.43*sigmoid(rho) so it can never leave (3.57, 4.0). Per-node
/// perturbation strength comes from a small d->16->1 network with sigmoid
/// output scaled into (0, alpha_max], or from a fixed constant in the
/// static-alpha ablation.
struct ChaosBranchParams {
  ChaosMap kind = ChaosMap::logistic;
  Tensor rho;  // 1x1, learnable (logistic only; kept for tent but unused)
  Tensor alpha_w1, alpha_b1;  // d x 16, 1 x 16
  Tensor alpha_w2, alpha_b2;  // 16 x 1, 1 x 1
  double alpha_max = 0.2;
  bool static_alpha_mode = false;
  double static_alpha = 0.1;

  // Norm-step running statistics for eval mode (no affine pair here; the
  // step is pure standardization).
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static constexpr std::size_t alpha_hidden = 16;

  void init(ChaosMap map_kind, std::size_t d, RngStream& rng) {
    kind = map_kind;
    rho = Tensor::zeros(1, 1, true);  // r starts mid-range at 3.785
    const double b1 = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> w1(d * alpha_hidden);
    for (double& v : w1) v = rng.uniform_range(-b1, b1);
    alpha_w1 = Tensor::from_values(d, alpha_hidden, std::move(w1), true);
    alpha_b1 = Tensor::zeros(1, alpha_hidden, true);
    const double b2 = 1.0 / std::sqrt(static_cast<double>(alpha_hidden));
    std::vector<double> w2(alpha_hidden);
    for (double& v : w2) v = rng.uniform_range(-b2, b2);
    alpha_w2 = Tensor::from_values(alpha_hidden, 1, std::move(w2), true);
    alpha_b2 = Tensor::zeros(1, 1, true);
    running_mean.assign(d, 0.0);
    running_var.assign(d, 1.0);
  }

  /// Learnable map parameter, always inside (3.57, 4.0).
  Tensor r() const { return add(Tensor::filled(1, 1, 3.57), scalar_mul(sigmoid(rho), 0.43)); }

  double r_value() const { return 3.57 + 0.43 * sigmoid_value(rho.values()[0]); }

  /// Per-node perturbation strength, N x 1 in (0, alpha_max].
  Tensor alpha(const Tensor& z_raw) const {
    if (static_alpha_mode)
      return Tensor::filled(z_raw.rows(), 1, static_alpha);
    Tensor h = relu(add(matmul(z_raw, alpha_w1), alpha_b1));
    Tensor a = sigmoid(add(matmul(h, alpha_w2), alpha_b2));
    return scalar_mul(a, alpha_max);
  }

  std::vector<Tensor> trainable() {
    std::vector<Tensor> p;
    if (kind == ChaosMap::logistic) p.push_back(rho);
    if (!static_alpha_mode) {
      p.push_back(alpha_w1);
      p.push_back(alpha_b1);
      p.push_back(alpha_w2);
      p.push_back(alpha_b2);
    }
    return p;
  }
};

/// Full branch pipeline: standardize per feature over nodes, squash into
/// (0,1), apply the chaotic map, rescale the result to a zero-centered
/// perturbation at feature scale ((2c-1)*sigma, the feature mean is NOT
/// re-added — the residual already carries the location), and add it back
/// with per-node strength alpha.
inline Tensor chaotic_branch(const Tensor& z_raw, ChaosBranchParams& params, bool training) {
  const std::size_t d = z_raw.cols();
  if (params.running_mean.size() != d)
    throw config_error("chaotic_branch: feature size mismatch with initialized params");

  // The node set is complete and identical in every forward, so the
  // cross-sectional statistics are well-defined in evaluation mode too.
  // Normalizing with the current batch in both modes keeps the evaluated
  // function identical to the trained one; the running buffers only track
  // the statistics for checkpoints and diagnostics.
  Tensor mean_t = mean_rows(z_raw);
  Tensor centered = sub(z_raw, mean_t);
  Tensor var_t = mean_rows(mul(centered, centered));
  if (training) {
    for (std::size_t j = 0; j < d; ++j) {
      params.running_mean[j] =
          (1.0 - params.momentum) * params.running_mean[j] + params.momentum * mean_t.values()[j];
      params.running_var[j] =
          (1.0 - params.momentum) * params.running_var[j] + params.momentum * var_t.values()[j];
    }
  }
  // sigma = sqrt(var + eps^2): equals eps for a degenerate feature,
  // indistinguishable from sqrt(var) otherwise.
  Tensor sigma = sqrt(add(var_t, Tensor::filled(1, d, params.eps * params.eps)));
  Tensor normed = div(sub(z_raw, mean_t), sigma);
  Tensor squashed = sigmoid(normed);
  Tensor chaotic = params.kind == ChaosMap::logistic ? logistic_map(squashed, params.r())
                                                     : tent_map(squashed);
  Tensor rescaled = mul(sub(scalar_mul(chaotic, 2.0), Tensor::filled(1, 1, 1.0)), sigma);
  return add(z_raw, mul(params.alpha(z_raw), rescaled));
}

// ---------------------------------------------------------------------------
// Volatility-regime gate and fusion

struct GateParams {
  Tensor w1, b1;  // d x 32, 1 x 32
  Tensor w2, b2;  // 32 x 1, 1 x 1

  static constexpr std::size_t hidden = 32;

  void init(std::size_t d, RngStream& rng) {
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> v1(d * hidden);
    for (double& v : v1) v = rng.uniform_range(-bound1, bound1);
    w1 = Tensor::from_values(d, hidden, std::move(v1), true);
    b1 = Tensor::zeros(1, hidden, true);
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    std::vector<double> v2(hidden);
    for (double& v : v2) v = rng.uniform_range(-bound2, bound2);
    w2 = Tensor::from_values(hidden, 1, std::move(v2), true);
    b2 = Tensor::zeros(1, 1, true);
  }

  std::vector<Tensor> trainable() { return {w1, b1, w2, b2}; }
};

/// g = sigmoid(FC2(relu(FC1(z_raw)))), one scalar per node in (0,1).
inline Tensor regime_gate(const Tensor& z_raw, const GateParams& gate) {
  Tensor h = relu(add(matmul(z_raw, gate.w1), gate.b1));
  return sigmoid(add(matmul(h, gate.w2), gate.b2));
}

/// [g .* z_center || (1-g) .* z_width]: the per-node snapshot embedding.
inline Tensor fuse(const Tensor& z_center, const Tensor& z_width, const Tensor& g) {
  Tensor complement = sub(Tensor::filled(1, 1, 1.0), g);
  return concat_cols(mul(g, z_center), mul(complement, z_width));
}

}  // namespace bcf

#endif  // BCF_CHAOS_HPP
