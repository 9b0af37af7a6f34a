// Recurrent cells (LSTM, GRU), the interval head and LUBE loss, the full
// BCF-GCN forward pass, the four baseline models, and JSON checkpointing.
//
// All five models share one interface: forward(window) -> per-stock
// (center, width). Rows act as the batch axis everywhere, so per-stock
// independence (baselines) and node-permutation equivariance come directly
// from the row-parallel structure of the ops.
#ifndef BCF_MODELS_HPP
#define BCF_MODELS_HPP

#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bcf/chaos.hpp"
#include "bcf/common.hpp"
#include "bcf/graph.hpp"
#include "bcf/tensor.hpp"

namespace bcf {

// ---------------------------------------------------------------------------
// LSTM / GRU stacks

struct LstmLayerParams {
  Tensor wf, wi, wc, wo;  // (hidden+input) x hidden
  Tensor bf, bi, bc, bo;  // 1 x hidden

  void init(std::size_t input, std::size_t hidden, RngStream& rng) {
    const std::size_t rows = hidden + input;
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    auto mk = [&] {
      std::vector<double> w(rows * hidden);
      for (double& v : w) v = rng.uniform_range(-bound, bound);
      return Tensor::from_values(rows, hidden, std::move(w), true);
    };
    wf = mk();
    wi = mk();
    wc = mk();
    wo = mk();
    bf = Tensor::filled(1, hidden, 1.0, true);  // forget gate starts open
    bi = Tensor::zeros(1, hidden, true);
    bc = Tensor::zeros(1, hidden, true);
    bo = Tensor::zeros(1, hidden, true);
  }

  void collect(std::vector<Tensor>& out) {
    for (const Tensor& t : {wf, wi, wc, wo, bf, bi, bc, bo}) out.push_back(t);
  }
};

struct GruLayerParams {
  Tensor wz, wr, wh;  // (hidden+input) x hidden
  Tensor bz, br, bh;  // 1 x hidden

  void init(std::size_t input, std::size_t hidden, RngStream& rng) {
    const std::size_t rows = hidden + input;
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    auto mk = [&] {
      std::vector<double> w(rows * hidden);
      for (double& v : w) v = rng.uniform_range(-bound, bound);
      return Tensor::from_values(rows, hidden, std::move(w), true);
    };
    wz = mk();
    wr = mk();
    wh = mk();
    bz = Tensor::zeros(1, hidden, true);
    br = Tensor::zeros(1, hidden, true);
    bh = Tensor::zeros(1, hidden, true);
  }

  void collect(std::vector<Tensor>& out) {
    for (const Tensor& t : {wz, wr, wh, bz, br, bh}) out.push_back(t);
  }
};

namespace detail {

inline Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, RngStream& rng) {
  std::vector<double> m(rows * cols);
  const double keep = 1.0 - rate;
  for (double& v : m) v = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  return Tensor::from_values(rows, cols, std::move(m));
}

inline std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev,
                                           const Tensor& c_prev, LstmLayerParams& p) {
  Tensor z = concat_cols(h_prev, x);
  Tensor f = sigmoid(add(matmul(z, p.wf), p.bf));
  Tensor i = sigmoid(add(matmul(z, p.wi), p.bi));
  Tensor ctil = tanh(add(matmul(z, p.wc), p.bc));
  Tensor c = add(mul(f, c_prev), mul(i, ctil));
  Tensor o = sigmoid(add(matmul(z, p.wo), p.bo));
  return {mul(o, tanh(c)), c};
}

inline Tensor gru_cell(const Tensor& x, const Tensor& h_prev, GruLayerParams& p) {
  Tensor zx = concat_cols(h_prev, x);
  Tensor z = sigmoid(add(matmul(zx, p.wz), p.bz));
  Tensor r = sigmoid(add(matmul(zx, p.wr), p.br));
  Tensor hx = concat_cols(mul(r, h_prev), x);
  Tensor htil = tanh(add(matmul(hx, p.wh), p.bh));
  Tensor one_minus_z = sub(Tensor::filled(1, 1, 1.0), z);
  return add(mul(one_minus_z, h_prev), mul(z, htil));
}

}  // namespace detail

/// Runs a stacked LSTM over the sequence and returns the final hidden state
/// of the top layer. Inverted dropout on the inter-layer activations,
/// training mode only.
inline Tensor lstm_forward(const std::vector<Tensor>& seq, std::vector<LstmLayerParams>& layers,
                           std::size_t hidden, double dropout, bool training, RngStream& rng) {
  if (seq.empty()) throw usage_error("lstm_forward: empty sequence");
  const std::size_t n = seq.front().rows();
  std::vector<Tensor> h(layers.size()), c(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h[l] = Tensor::zeros(n, hidden);
    c[l] = Tensor::zeros(n, hidden);
  }
  for (const Tensor& x_t : seq) {
    Tensor input = x_t;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto [h_new, c_new] = detail::lstm_cell(input, h[l], c[l], layers[l]);
      h[l] = h_new;
      c[l] = c_new;
      input = h_new;
      if (l + 1 < layers.size() && training && dropout > 0.0)
        input = mul(input, detail::dropout_mask(n, hidden, dropout, rng));
    }
  }
  return h.back();
}

inline Tensor gru_forward(const std::vector<Tensor>& seq, std::vector<GruLayerParams>& layers,
                          std::size_t hidden, double dropout, bool training, RngStream& rng) {
  if (seq.empty()) throw usage_error("gru_forward: empty sequence");
  const std::size_t n = seq.front().rows();
  std::vector<Tensor> h(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) h[l] = Tensor::zeros(n, hidden);
  for (const Tensor& x_t : seq) {
    Tensor input = x_t;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      h[l] = detail::gru_cell(input, h[l], layers[l]);
      input = h[l];
      if (l + 1 < layers.size() && training && dropout > 0.0)
        input = mul(input, detail::dropout_mask(n, hidden, dropout, rng));
    }
  }
  return h.back();
}

// ---------------------------------------------------------------------------
// Interval head, bounds, LUBE loss

struct IntervalHeadParams {
  Tensor center_w, center_b;  // d x 1, 1 x 1
  Tensor width_w, width_b;
  double center_scale = 0.5;
  double width_floor = 0.002;
  // Widths start near this value (in scaled-target units) so that the first
  // epochs begin well above the nominal coverage level and training narrows
  // the intervals from there.  Starting below coverage is unrecoverable: the
  // width-penalty gradient is always on, while the coverage gradient dies
  // once targets fall far outside the sigmoid's active band.  Starting only
  // slightly above it stalls instead: the initial state is then hard to beat
  // within the early-stopping patience, so runs freeze at their init.
  static constexpr double initial_width = 3.0;
  // When set, the center head reads the first half of h* and the width head
  // the second half, instead of both reading all of it.
  bool split_input = false;

  void init(std::size_t d, bool split, RngStream& rng) {
    split_input = split;
    const std::size_t in = split ? d / 2 : d;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    auto mk = [&] {
      std::vector<double> w(in);
      for (double& v : w) v = rng.uniform_range(-bound, bound);
      return Tensor::from_values(in, 1, std::move(w), true);
    };
    center_w = mk();
    center_b = Tensor::zeros(1, 1, true);
    width_w = mk();
    // softplus(b) = initial_width  =>  b = log(exp(initial_width) - 1)
    width_b = Tensor::filled(1, 1, std::log(std::exp(initial_width) - 1.0), true);
  }

  void collect(std::vector<Tensor>& out) {
    for (const Tensor& t : {center_w, center_b, width_w, width_b}) out.push_back(t);
  }
};

struct ModelOutput {
  Tensor center;  // N x 1, in [-0.5, 0.5]
  Tensor width;   // N x 1, > width floor
};

/// center = tanh(FCc(h*)) * 0.5, width = softplus(FCw(h*)) + floor.
inline ModelOutput interval_head(const Tensor& h_star, IntervalHeadParams& p) {
  Tensor hc = h_star, hw = h_star;
  if (p.split_input) {
    const std::size_t half = h_star.cols() / 2;
    hc = slice_cols(h_star, 0, half);
    hw = slice_cols(h_star, half, h_star.cols());
  }
  ModelOutput out;
  out.center = scalar_mul(tanh(add(matmul(hc, p.center_w), p.center_b)), p.center_scale);
  out.width = add(softplus(add(matmul(hw, p.width_w), p.width_b)),
                  Tensor::filled(1, 1, p.width_floor));
  for (std::size_t i = 0; i < out.center.size(); ++i) {
    if (!(std::abs(out.center.values()[i]) <= 0.5))
      throw numeric_error("interval_head: center escaped [-0.5, 0.5]");
    if (!(out.width.values()[i] >= p.width_floor))
      throw numeric_error("interval_head: width fell below the floor");
  }
  return out;
}

/// L = center - width, U = center + width.
inline std::pair<Tensor, Tensor> to_bounds(const Tensor& center, const Tensor& width) {
  return {sub(center, width), add(center, width)};
}

struct LubeConfig {
  double target_coverage = 0.90;
  double lambda_w = 30.0;
  double lambda_u = 10.0;
  double lambda_o = 15.0;
  double softness_k = 50.0;

  void validate() const {
    if (!(target_coverage > 0.0 && target_coverage < 1.0))
      throw config_error("LubeConfig: target_coverage must lie in (0,1)");
    if (!(lambda_w > 0.0 && lambda_u > 0.0 && lambda_o > 0.0))
      throw config_error("LubeConfig: lambda weights must be positive");
    if (!(softness_k > 0.0)) throw config_error("LubeConfig: softness_k must be positive");
  }
};

/// Differentiable LUBE surrogate. Coverage of each target is softened to
/// sigmoid(k(y-L)) * sigmoid(k(U-y)); the width term is normalized by the
/// training-target range, a constant captured at fit time so the loss scale
/// does not drift with the sampled batch.
inline Tensor lube_loss(const Tensor& lower, const Tensor& upper, const Tensor& y,
                        const LubeConfig& cfg, double train_target_range,
                        double* soft_picp_out = nullptr) {
  if (lower.rows() != y.rows() || upper.rows() != y.rows() || y.cols() != 1)
    throw usage_error("lube_loss: bounds and targets must be N x 1");
  if (!(train_target_range > 0.0))
    throw config_error("lube_loss: train_target_range must be positive");
  Tensor k = Tensor::filled(1, 1, cfg.softness_k);
  Tensor s = mul(sigmoid(mul(k, sub(y, lower))), sigmoid(mul(k, sub(upper, y))));
  Tensor soft_picp = mean_all(s);
  if (soft_picp_out) *soft_picp_out = soft_picp.values()[0];
  Tensor piaw = scalar_mul(mean_all(sub(upper, lower)), 1.0 / train_target_range);
  Tensor alpha = Tensor::filled(1, 1, cfg.target_coverage);
  Tensor under = relu(sub(alpha, soft_picp));
  Tensor over = relu(sub(soft_picp, alpha));
  return add(add(scalar_mul(piaw, cfg.lambda_w), scalar_mul(under, cfg.lambda_u)),
             scalar_mul(over, cfg.lambda_o));
}

// ---------------------------------------------------------------------------
// Model interface

class Model {
 public:
  virtual ~Model() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t n_stocks() const = 0;
  /// One forward pass over an N x L window of scaled returns. rng is only
  /// consumed in training mode (dropout).
  virtual ModelOutput forward(const Array2D& window, bool training, RngStream& rng) = 0;
  /// Parameters the optimizer updates under the current ablation flags.
  virtual std::vector<Tensor> trainable() = 0;
  /// All parameters, for checkpointing (ablation-disabled ones included).
  virtual std::vector<std::pair<std::string, Tensor>> named_params() = 0;
  /// Non-learnable state (running statistics).
  virtual std::vector<std::pair<std::string, std::vector<double>*>> named_buffers() = 0;

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& t : trainable()) n += t.size();
    return n;
  }
};

namespace detail {

inline Tensor window_column(const Array2D& window, std::size_t t) {
  std::vector<double> col(window.rows);
  for (std::size_t i = 0; i < window.rows; ++i) col[i] = window(i, t);
  return Tensor::from_values(window.rows, 1, std::move(col));
}

inline Tensor window_time_mean(const Array2D& window) {
  std::vector<double> m(window.rows, 0.0);
  for (std::size_t i = 0; i < window.rows; ++i) {
    for (std::size_t t = 0; t < window.cols; ++t) m[i] += window(i, t);
    m[i] /= static_cast<double>(window.cols);
  }
  return Tensor::from_values(window.rows, 1, std::move(m));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// BCF-GCN

struct BcfDims {
  std::size_t embed = 16;        // per-timestep 1 -> embed feature lift
  std::size_t hidden_graph = 64;
  std::size_t hidden_lstm = 128;
  std::size_t lstm_layers = 2;
  double dropout = 0.15;
  bool head_split = false;
  bool literal_normalization = false;  // D^-1 (A+I) D^-1 propagation variant
};

struct AblationFlags {
  bool static_alpha = false;
  bool no_log_chaos = false;
  bool no_regime_gate = false;
  bool no_tent_chaos = false;

  bool any() const { return static_alpha || no_log_chaos || no_regime_gate || no_tent_chaos; }
};

class BcfGcnModel : public Model {
 public:
  /// Initialization draws from rng in a fixed component order regardless of
  /// ablation flags, so variants stay sample-aligned with the full model.
  BcfGcnModel(const MarketGraph& graph, const BcfDims& dims, const AblationFlags& flags,
              RngStream& rng)
      : dims_(dims), flags_(flags), n_(graph.n_nodes()) {
    const Array2D P = dims.literal_normalization
                          ? normalize_adjacency(graph.adjacency, false)
                          : graph.propagation;
    prop_ = Tensor::from_array(P);
    const double bound = 1.0;  // fan_in = 1 for the scalar return lift
    std::vector<double> ew(dims.embed);
    for (double& v : ew) v = rng.uniform_range(-bound, bound);
    embed_w_ = Tensor::from_values(1, dims.embed, std::move(ew), true);
    embed_b_ = Tensor::zeros(1, dims.embed, true);
    gcn1_.init(dims.embed, dims.hidden_graph, rng);
    gcn2_.init(dims.hidden_graph, dims.hidden_graph, rng);
    chaos_log_.init(ChaosMap::logistic, dims.hidden_graph, rng);
    chaos_tent_.init(ChaosMap::tent, dims.hidden_graph, rng);
    gate_.init(dims.hidden_graph, rng);
    lstm_.resize(dims.lstm_layers);
    for (std::size_t l = 0; l < dims.lstm_layers; ++l)
      lstm_[l].init(l == 0 ? 2 * dims.hidden_graph : dims.hidden_lstm, dims.hidden_lstm, rng);
    head_.init(dims.hidden_lstm, dims.head_split, rng);
    chaos_log_.static_alpha_mode = flags.static_alpha;
    chaos_tent_.static_alpha_mode = flags.static_alpha;
  }

  std::string kind() const override { return "BCF-GCN"; }
  std::size_t n_stocks() const override { return n_; }

  ModelOutput forward(const Array2D& window, bool training, RngStream& rng) override {
    if (window.rows != n_)
      throw config_error("BcfGcnModel: window has " + std::to_string(window.rows) +
                         " stocks, model was built for " + std::to_string(n_));
    std::vector<Tensor> seq;
    seq.reserve(window.cols);
    for (std::size_t t = 0; t < window.cols; ++t) {
      Tensor x = detail::window_column(window, t);
      Tensor e = add(matmul(x, embed_w_), embed_b_);
      Tensor h1 = gcn_layer_forward(prop_, e, gcn1_, training);
      Tensor h2 = gcn_layer_forward(prop_, h1, gcn2_, training);
      Tensor z_raw = clip_embedding(h2);
      Tensor z_center = flags_.no_log_chaos ? z_raw : chaotic_branch(z_raw, chaos_log_, training);
      Tensor z_width = flags_.no_tent_chaos ? z_raw : chaotic_branch(z_raw, chaos_tent_, training);
      Tensor g = flags_.no_regime_gate ? Tensor::filled(n_, 1, 0.5)
                                       : regime_gate(z_raw, gate_);
      seq.push_back(fuse(z_center, z_width, g));
    }
    Tensor h_star = lstm_forward(seq, lstm_, dims_.hidden_lstm, dims_.dropout, training, rng);
    return interval_head(h_star, head_);
  }

  std::vector<Tensor> trainable() override {
    std::vector<Tensor> p{embed_w_, embed_b_};
    for (auto& t : gcn1_.trainable()) p.push_back(t);
    for (auto& t : gcn2_.trainable()) p.push_back(t);
    if (!flags_.no_log_chaos)
      for (auto& t : chaos_log_.trainable()) p.push_back(t);
    if (!flags_.no_tent_chaos)
      for (auto& t : chaos_tent_.trainable()) p.push_back(t);
    if (!flags_.no_regime_gate)
      for (auto& t : gate_.trainable()) p.push_back(t);
    for (auto& l : lstm_) l.collect(p);
    head_.collect(p);
    return p;
  }

  std::vector<std::pair<std::string, Tensor>> named_params() override {
    std::vector<std::pair<std::string, Tensor>> p;
    p.emplace_back("embed.weight", embed_w_);
    p.emplace_back("embed.bias", embed_b_);
    auto add_gcn = [&p](const std::string& prefix, GcnLayerParams& g) {
      p.emplace_back(prefix + ".weight", g.weight);
      p.emplace_back(prefix + ".bias", g.bias);
      p.emplace_back(prefix + ".norm.gamma", g.norm.gamma);
      p.emplace_back(prefix + ".norm.beta", g.norm.beta);
    };
    add_gcn("gcn1", gcn1_);
    add_gcn("gcn2", gcn2_);
    auto add_chaos = [&p](const std::string& prefix, ChaosBranchParams& c) {
      p.emplace_back(prefix + ".rho", c.rho);
      p.emplace_back(prefix + ".alpha_w1", c.alpha_w1);
      p.emplace_back(prefix + ".alpha_b1", c.alpha_b1);
      p.emplace_back(prefix + ".alpha_w2", c.alpha_w2);
      p.emplace_back(prefix + ".alpha_b2", c.alpha_b2);
    };
    add_chaos("chaos_log", chaos_log_);
    add_chaos("chaos_tent", chaos_tent_);
    p.emplace_back("gate.w1", gate_.w1);
    p.emplace_back("gate.b1", gate_.b1);
    p.emplace_back("gate.w2", gate_.w2);
    p.emplace_back("gate.b2", gate_.b2);
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
      const std::string pre = "lstm." + std::to_string(l);
      p.emplace_back(pre + ".wf", lstm_[l].wf);
      p.emplace_back(pre + ".wi", lstm_[l].wi);
      p.emplace_back(pre + ".wc", lstm_[l].wc);
      p.emplace_back(pre + ".wo", lstm_[l].wo);
      p.emplace_back(pre + ".bf", lstm_[l].bf);
      p.emplace_back(pre + ".bi", lstm_[l].bi);
      p.emplace_back(pre + ".bc", lstm_[l].bc);
      p.emplace_back(pre + ".bo", lstm_[l].bo);
    }
    p.emplace_back("head.center_w", head_.center_w);
    p.emplace_back("head.center_b", head_.center_b);
    p.emplace_back("head.width_w", head_.width_w);
    p.emplace_back("head.width_b", head_.width_b);
    return p;
  }

  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers() override {
    return {
        {"gcn1.norm.running_mean", &gcn1_.norm.running_mean},
        {"gcn1.norm.running_var", &gcn1_.norm.running_var},
        {"gcn2.norm.running_mean", &gcn2_.norm.running_mean},
        {"gcn2.norm.running_var", &gcn2_.norm.running_var},
        {"chaos_log.running_mean", &chaos_log_.running_mean},
        {"chaos_log.running_var", &chaos_log_.running_var},
        {"chaos_tent.running_mean", &chaos_tent_.running_mean},
        {"chaos_tent.running_var", &chaos_tent_.running_var},
    };
  }

  const AblationFlags& flags() const { return flags_; }
  double logistic_r() const { return chaos_log_.r_value(); }

 private:
  BcfDims dims_;
  AblationFlags flags_;
  std::size_t n_;
  Tensor prop_;
  Tensor embed_w_, embed_b_;
  GcnLayerParams gcn1_, gcn2_;
  ChaosBranchParams chaos_log_, chaos_tent_;
  GateParams gate_;
  std::vector<LstmLayerParams> lstm_;
  IntervalHeadParams head_;
};

// ---------------------------------------------------------------------------
// Baselines

struct BaselineDims {
  std::size_t hidden = 64;
  std::size_t layers = 2;  // recurrent baselines
  double dropout = 0.10;
};

/// Per-stock recurrent baseline: each stock's own return sequence, weights
/// shared across stocks. Rows never interact, so stock i's output cannot
/// depend on any other stock's data.
class LstmBaselineModel : public Model {
 public:
  LstmBaselineModel(std::size_t n_stocks, const BaselineDims& dims, RngStream& rng)
      : dims_(dims), n_(n_stocks) {
    layers_.resize(dims.layers);
    for (std::size_t l = 0; l < dims.layers; ++l)
      layers_[l].init(l == 0 ? 1 : dims.hidden, dims.hidden, rng);
    head_.init(dims.hidden, false, rng);
  }

  std::string kind() const override { return "LSTM"; }
  std::size_t n_stocks() const override { return n_; }

  ModelOutput forward(const Array2D& window, bool training, RngStream& rng) override {
    if (window.rows != n_) throw config_error("LstmBaselineModel: stock count mismatch");
    std::vector<Tensor> seq;
    seq.reserve(window.cols);
    for (std::size_t t = 0; t < window.cols; ++t) seq.push_back(detail::window_column(window, t));
    Tensor h_star = lstm_forward(seq, layers_, dims_.hidden, dims_.dropout, training, rng);
    return interval_head(h_star, head_);
  }

  std::vector<Tensor> trainable() override {
    std::vector<Tensor> p;
    for (auto& l : layers_) l.collect(p);
    head_.collect(p);
    return p;
  }

  std::vector<std::pair<std::string, Tensor>> named_params() override {
    std::vector<std::pair<std::string, Tensor>> p;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::string pre = "lstm." + std::to_string(l);
      p.emplace_back(pre + ".wf", layers_[l].wf);
      p.emplace_back(pre + ".wi", layers_[l].wi);
      p.emplace_back(pre + ".wc", layers_[l].wc);
      p.emplace_back(pre + ".wo", layers_[l].wo);
      p.emplace_back(pre + ".bf", layers_[l].bf);
      p.emplace_back(pre + ".bi", layers_[l].bi);
      p.emplace_back(pre + ".bc", layers_[l].bc);
      p.emplace_back(pre + ".bo", layers_[l].bo);
    }
    p.emplace_back("head.center_w", head_.center_w);
    p.emplace_back("head.center_b", head_.center_b);
    p.emplace_back("head.width_w", head_.width_w);
    p.emplace_back("head.width_b", head_.width_b);
    return p;
  }

  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers() override {
    return {};
  }

 private:
  BaselineDims dims_;
  std::size_t n_;
  std::vector<LstmLayerParams> layers_;
  IntervalHeadParams head_;
};

class GruBaselineModel : public Model {
 public:
  GruBaselineModel(std::size_t n_stocks, const BaselineDims& dims, RngStream& rng)
      : dims_(dims), n_(n_stocks) {
    layers_.resize(dims.layers);
    for (std::size_t l = 0; l < dims.layers; ++l)
      layers_[l].init(l == 0 ? 1 : dims.hidden, dims.hidden, rng);
    head_.init(dims.hidden, false, rng);
  }

  std::string kind() const override { return "GRU"; }
  std::size_t n_stocks() const override { return n_; }

  ModelOutput forward(const Array2D& window, bool training, RngStream& rng) override {
    if (window.rows != n_) throw config_error("GruBaselineModel: stock count mismatch");
    std::vector<Tensor> seq;
    seq.reserve(window.cols);
    for (std::size_t t = 0; t < window.cols; ++t) seq.push_back(detail::window_column(window, t));
    Tensor h_star = gru_forward(seq, layers_, dims_.hidden, dims_.dropout, training, rng);
    return interval_head(h_star, head_);
  }

  std::vector<Tensor> trainable() override {
    std::vector<Tensor> p;
    for (auto& l : layers_) l.collect(p);
    head_.collect(p);
    return p;
  }

  std::vector<std::pair<std::string, Tensor>> named_params() override {
    std::vector<std::pair<std::string, Tensor>> p;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::string pre = "gru." + std::to_string(l);
      p.emplace_back(pre + ".wz", layers_[l].wz);
      p.emplace_back(pre + ".wr", layers_[l].wr);
      p.emplace_back(pre + ".wh", layers_[l].wh);
      p.emplace_back(pre + ".bz", layers_[l].bz);
      p.emplace_back(pre + ".br", layers_[l].br);
      p.emplace_back(pre + ".bh", layers_[l].bh);
    }
    p.emplace_back("head.center_w", head_.center_w);
    p.emplace_back("head.center_b", head_.center_b);
    p.emplace_back("head.width_w", head_.width_w);
    p.emplace_back("head.width_b", head_.width_b);
    return p;
  }

  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers() override {
    return {};
  }

 private:
  BaselineDims dims_;
  std::size_t n_;
  std::vector<GruLayerParams> layers_;
  IntervalHeadParams head_;
};

/// Static-snapshot GCN baseline: two graph convolutions over the window's
/// time-averaged returns.
class GcnBaselineModel : public Model {
 public:
  GcnBaselineModel(const MarketGraph& graph, const BaselineDims& dims, RngStream& rng)
      : n_(graph.n_nodes()) {
    prop_ = Tensor::from_array(graph.propagation);
    gcn1_.init(1, dims.hidden, rng);
    gcn2_.init(dims.hidden, dims.hidden, rng);
    head_.init(dims.hidden, false, rng);
  }

  std::string kind() const override { return "GCN"; }
  std::size_t n_stocks() const override { return n_; }

  ModelOutput forward(const Array2D& window, bool training, RngStream&) override {
    if (window.rows != n_) throw config_error("GcnBaselineModel: stock count mismatch");
    Tensor x = detail::window_time_mean(window);
    Tensor h1 = gcn_layer_forward(prop_, x, gcn1_, training);
    Tensor h2 = gcn_layer_forward(prop_, h1, gcn2_, training);
    return interval_head(h2, head_);
  }

  std::vector<Tensor> trainable() override {
    std::vector<Tensor> p;
    for (auto& t : gcn1_.trainable()) p.push_back(t);
    for (auto& t : gcn2_.trainable()) p.push_back(t);
    head_.collect(p);
    return p;
  }

  std::vector<std::pair<std::string, Tensor>> named_params() override {
    std::vector<std::pair<std::string, Tensor>> p;
    auto add_gcn = [&p](const std::string& prefix, GcnLayerParams& g) {
      p.emplace_back(prefix + ".weight", g.weight);
      p.emplace_back(prefix + ".bias", g.bias);
      p.emplace_back(prefix + ".norm.gamma", g.norm.gamma);
      p.emplace_back(prefix + ".norm.beta", g.norm.beta);
    };
    add_gcn("gcn1", gcn1_);
    add_gcn("gcn2", gcn2_);
    p.emplace_back("head.center_w", head_.center_w);
    p.emplace_back("head.center_b", head_.center_b);
    p.emplace_back("head.width_w", head_.width_w);
    p.emplace_back("head.width_b", head_.width_b);
    return p;
  }

  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers() override {
    return {
        {"gcn1.norm.running_mean", &gcn1_.norm.running_mean},
        {"gcn1.norm.running_var", &gcn1_.norm.running_var},
        {"gcn2.norm.running_mean", &gcn2_.norm.running_mean},
        {"gcn2.norm.running_var", &gcn2_.norm.running_var},
    };
  }

 private:
  std::size_t n_;
  Tensor prop_;
  GcnLayerParams gcn1_, gcn2_;
  IntervalHeadParams head_;
};

/// Hypergraph baseline: two hypergraph convolutions over time-averaged
/// features.
class HgnnBaselineModel : public Model {
 public:
  HgnnBaselineModel(const Hypergraph& hg, const BaselineDims& dims, RngStream& rng)
      : n_(hg.n_nodes()) {
    prop_ = Tensor::from_array(hg.propagation());
    hgnn1_.init(1, dims.hidden, rng);
    hgnn2_.init(dims.hidden, dims.hidden, rng);
    head_.init(dims.hidden, false, rng);
  }

  std::string kind() const override { return "HGNN"; }
  std::size_t n_stocks() const override { return n_; }

  ModelOutput forward(const Array2D& window, bool, RngStream&) override {
    if (window.rows != n_) throw config_error("HgnnBaselineModel: stock count mismatch");
    Tensor x = detail::window_time_mean(window);
    Tensor h1 = hgnn_layer_forward(prop_, x, hgnn1_);
    Tensor h2 = hgnn_layer_forward(prop_, h1, hgnn2_);
    return interval_head(h2, head_);
  }

  std::vector<Tensor> trainable() override {
    std::vector<Tensor> p{hgnn1_.weight, hgnn2_.weight};
    head_.collect(p);
    return p;
  }

  std::vector<std::pair<std::string, Tensor>> named_params() override {
    return {
        {"hgnn1.weight", hgnn1_.weight},
        {"hgnn2.weight", hgnn2_.weight},
        {"head.center_w", head_.center_w},
        {"head.center_b", head_.center_b},
        {"head.width_w", head_.width_w},
        {"head.width_b", head_.width_b},
    };
  }

  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers() override {
    return {};
  }

 private:
  std::size_t n_;
  Tensor prop_;
  HgnnLayerParams hgnn1_, hgnn2_;
  IntervalHeadParams head_;
};

// ---------------------------------------------------------------------------
// Checkpointing

/// In-memory copy of every parameter and buffer, used for best-validation
/// restore during training.
struct ParamSnapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> buffers;
};

inline ParamSnapshot snapshot_params(Model& model) {
  ParamSnapshot s;
  for (auto& [name, t] : model.named_params()) s.params.push_back(t.values());
  for (auto& [name, b] : model.named_buffers()) s.buffers.push_back(*b);
  return s;
}

inline void restore_params(Model& model, const ParamSnapshot& s) {
  auto params = model.named_params();
  auto buffers = model.named_buffers();
  if (params.size() != s.params.size() || buffers.size() != s.buffers.size())
    throw error("restore_params: snapshot does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].second.values().size() != s.params[i].size())
      throw error("restore_params: parameter size drifted");
    params[i].second.values() = s.params[i];
  }
  for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i].second = s.buffers[i];
}

/// Writes a single JSON document of named parameter arrays plus identifying
/// metadata. Doubles survive the round trip bit-exactly (shortest-round-trip
/// decimal serialization).
inline void save_checkpoint(Model& model, const std::string& path, std::uint64_t seed,
                            const std::string& config_hash) {
  nlohmann::json doc;
  doc["kind"] = model.kind();
  doc["seed"] = seed;
  doc["config_hash"] = config_hash;
  nlohmann::json params = nlohmann::json::object();
  for (auto& [name, t] : model.named_params()) {
    params[name] = {{"rows", t.rows()}, {"cols", t.cols()}, {"values", t.values()}};
  }
  doc["params"] = std::move(params);
  nlohmann::json buffers = nlohmann::json::object();
  for (auto& [name, b] : model.named_buffers()) buffers[name] = *b;
  doc["buffers"] = std::move(buffers);
  std::ofstream out(path);
  if (!out) throw data_error("save_checkpoint: cannot open '" + path + "' for writing");
  out << doc.dump(1) << '\n';
}

struct CheckpointInfo {
  std::string kind;
  std::uint64_t seed = 0;
  std::string config_hash;
};

inline CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("read_checkpoint_info: cannot open '" + path + "'");
  nlohmann::json doc = nlohmann::json::parse(in);
  CheckpointInfo info;
  info.kind = doc.at("kind").get<std::string>();
  info.seed = doc.at("seed").get<std::uint64_t>();
  info.config_hash = doc.at("config_hash").get<std::string>();
  return info;
}

inline void load_checkpoint(Model& model, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("load_checkpoint: cannot open '" + path + "'");
  nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.at("kind").get<std::string>() != model.kind())
    throw config_error("load_checkpoint: checkpoint kind '" +
                       doc.at("kind").get<std::string>() + "' does not match model '" +
                       model.kind() + "'");
  const auto& params = doc.at("params");
  for (auto& [name, t] : model.named_params()) {
    if (!params.contains(name))
      throw data_error("load_checkpoint: missing parameter '" + name + "'");
    const auto& entry = params.at(name);
    if (entry.at("rows").get<std::size_t>() != t.rows() ||
        entry.at("cols").get<std::size_t>() != t.cols())
      throw data_error("load_checkpoint: shape mismatch for '" + name + "'");
    auto vals = entry.at("values").get<std::vector<double>>();
    if (vals.size() != t.size())
      throw data_error("load_checkpoint: size mismatch for '" + name + "'");
    t.values() = std::move(vals);
  }
  const auto& buffers = doc.at("buffers");
  for (auto& [name, b] : model.named_buffers()) {
    if (!buffers.contains(name))
      throw data_error("load_checkpoint: missing buffer '" + name + "'");
    auto vals = buffers.at(name).get<std::vector<double>>();
    if (vals.size() != b->size())
      throw data_error("load_checkpoint: buffer size mismatch for '" + name + "'");
    *b = std::move(vals);
  }
}

/// Order-insensitive digest of all parameter and buffer values; used by the
/// no-test-time-learning audit.
inline std::string checkpoint_digest(Model& model) {
  std::string blob;
  for (auto& [name, t] : model.named_params()) {
    blob += name;
    for (double v : t.values()) blob += format_double(v) + ",";
  }
  for (auto& [name, b] : model.named_buffers()) {
    blob += name;
    for (double v : *b) blob += format_double(v) + ",";
  }
  return hex_u64(fnv1a64(blob));
}

}  // namespace bcf

#endif  // BCF_MODELS_HPP
