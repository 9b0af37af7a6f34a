// Experiment orchestration: config schema with JSON round-trip and dotted
// overrides, deterministic data preparation, the snapshot-sampled training
// loop, rolling one-step evaluation, multi-step price backtesting, the
// ablation grid, and multi-seed runs.
//
// One run is single-threaded and fully determined by (config, seed). The one
// RNG stream per run is consumed in a fixed order: model init, then per-epoch
// index sampling, then dropout draws.
#ifndef BCF_HARNESS_HPP
#define BCF_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bcf/common.hpp"
#include "bcf/data.hpp"
#include "bcf/graph.hpp"
#include "bcf/metrics.hpp"
#include "bcf/models.hpp"
#include "bcf/tensor.hpp"

namespace bcf {

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
  std::string model = "BCF-GCN";  // BCF-GCN | LSTM | GRU | GCN | HGNN
  std::uint64_t seed = 42;        // run seed: init, sampling, dropout

  // data
  std::string data_source = "synthetic";  // synthetic | csv
  std::string csv_path;
  SyntheticConfig synthetic;
  SplitSpec split;

  // graph
  double corr_threshold = 0.30;
  bool symmetric_normalization = true;
  std::size_t hyperedge_clusters = 3;

  // architecture
  BcfDims bcf;
  BaselineDims baseline;
  AblationFlags ablation;

  // training
  std::size_t max_epochs = 0;  // 0: per-model default (200 proposed, 60/60/80/120 baselines)
  double lr = 0.001;
  double weight_decay = 0.0001;
  double clip_norm = 3.0;
  std::size_t train_snapshots = 40;
  std::size_t val_snapshots = 20;
  std::size_t early_stop_patience = 40;
  double scheduler_factor = 0.5;
  std::size_t scheduler_patience = 10;
  double min_lr = 1e-5;

  LubeConfig lube;
  MetricsConfig metrics;
  std::size_t horizon = 5;  // multi-step backtest depth

  std::size_t resolved_max_epochs() const {
    if (max_epochs > 0) return max_epochs;
    if (model == "BCF-GCN") return 200;
    if (model == "LSTM" || model == "GRU") return 60;
    if (model == "GCN") return 80;
    if (model == "HGNN") return 120;
    return 200;
  }

  void validate() const {
    static const std::vector<std::string> kinds{"BCF-GCN", "LSTM", "GRU", "GCN", "HGNN"};
    if (std::find(kinds.begin(), kinds.end(), model) == kinds.end())
      throw config_error("config field 'model' must be one of BCF-GCN, LSTM, GRU, GCN, HGNN");
    if (data_source != "synthetic" && data_source != "csv")
      throw config_error("config field 'data.source' must be 'synthetic' or 'csv'");
    if (data_source == "csv" && csv_path.empty())
      throw config_error("config field 'data.csv_path' is required when data.source is 'csv'");
    if (ablation.any() && model != "BCF-GCN")
      throw config_error("ablation flags are only valid with the BCF-GCN model");
    if (!(lr > 0.0)) throw config_error("config field 'train.lr' must be positive");
    if (!(clip_norm > 0.0)) throw config_error("config field 'train.clip_norm' must be positive");
    if (train_snapshots == 0 || val_snapshots == 0)
      throw config_error("config fields 'train.train_snapshots'/'val_snapshots' must be >= 1");
    if (early_stop_patience == 0)
      throw config_error("config field 'train.early_stop_patience' must be >= 1");
    if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0))
      throw config_error("config field 'train.scheduler_factor' must lie in (0,1)");
    if (horizon == 0) throw config_error("config field 'eval.horizon' must be >= 1");
    split.validate();
    if (data_source == "synthetic") synthetic.validate();
    lube.validate();
    metrics.validate();
  }
};

namespace detail {

template <typename T>
T json_field(const nlohmann::json& j, const std::string& qualified, const std::string& key,
             T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error("config field '" + qualified + "' has the wrong type");
  }
}

inline void check_keys(const nlohmann::json& j, const std::string& prefix,
                       const std::vector<std::string>& allowed) {
  if (!j.is_object())
    throw config_error("config section '" + prefix + "' must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw config_error("unknown config field '" +
                         (prefix.empty() ? key : prefix + "." + key) + "'");
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["model"] = c.model;
  j["seed"] = c.seed;
  j["data"] = {
      {"source", c.data_source},
      {"csv_path", c.csv_path},
      {"lookback", c.split.lookback},
      {"train_frac", c.split.train_frac},
      {"val_frac", c.split.val_frac},
      {"test_frac", c.split.test_frac},
      {"synthetic",
       {{"n_stocks", c.synthetic.n_stocks},
        {"sector_sizes", c.synthetic.sector_sizes},
        {"n_days", c.synthetic.n_days},
        {"factor_vol", c.synthetic.factor_vol},
        {"idio_vol", c.synthetic.idio_vol},
        {"regime_switch_prob", c.synthetic.regime_switch_prob},
        {"high_vol_multiplier", c.synthetic.high_vol_multiplier},
        {"factor_persistence", c.synthetic.factor_persistence},
        {"seed", c.synthetic.seed}}},
  };
  j["graph"] = {{"threshold", c.corr_threshold},
                {"symmetric_normalization", c.symmetric_normalization},
                {"hyperedge_clusters", c.hyperedge_clusters}};
  j["arch"] = {{"embed", c.bcf.embed},
               {"hidden_graph", c.bcf.hidden_graph},
               {"hidden_lstm", c.bcf.hidden_lstm},
               {"lstm_layers", c.bcf.lstm_layers},
               {"dropout", c.bcf.dropout},
               {"head_split", c.bcf.head_split},
               {"literal_normalization", c.bcf.literal_normalization},
               {"baseline_hidden", c.baseline.hidden},
               {"baseline_layers", c.baseline.layers},
               {"baseline_dropout", c.baseline.dropout}};
  j["ablation"] = {{"static_alpha", c.ablation.static_alpha},
                   {"no_log_chaos", c.ablation.no_log_chaos},
                   {"no_regime_gate", c.ablation.no_regime_gate},
                   {"no_tent_chaos", c.ablation.no_tent_chaos}};
  j["train"] = {{"max_epochs", c.max_epochs},
                {"lr", c.lr},
                {"weight_decay", c.weight_decay},
                {"clip_norm", c.clip_norm},
                {"train_snapshots", c.train_snapshots},
                {"val_snapshots", c.val_snapshots},
                {"early_stop_patience", c.early_stop_patience},
                {"scheduler_factor", c.scheduler_factor},
                {"scheduler_patience", c.scheduler_patience},
                {"min_lr", c.min_lr}};
  j["lube"] = {{"target_coverage", c.lube.target_coverage},
               {"lambda_w", c.lube.lambda_w},
               {"lambda_u", c.lube.lambda_u},
               {"lambda_o", c.lube.lambda_o},
               {"softness_k", c.lube.softness_k}};
  j["metrics"] = {{"winkler_alpha", c.metrics.winkler_alpha},
                  {"cwc_gamma", c.metrics.cwc_gamma},
                  {"cwc_eta", c.metrics.cwc_eta},
                  {"piaw_epsilon", c.metrics.piaw_epsilon},
                  {"dm_lag", c.metrics.dm_lag}};
  j["eval"] = {{"horizon", c.horizon}};
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::json_field;
  ExperimentConfig c;
  check_keys(j, "", {"model", "seed", "data", "graph", "arch", "ablation", "train", "lube",
                     "metrics", "eval"});
  c.model = json_field(j, "model", "model", c.model);
  c.seed = json_field(j, "seed", "seed", c.seed);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"source", "csv_path", "lookback", "train_frac", "val_frac",
                           "test_frac", "synthetic"});
    c.data_source = json_field(d, "data.source", "source", c.data_source);
    c.csv_path = json_field(d, "data.csv_path", "csv_path", c.csv_path);
    c.split.lookback = json_field(d, "data.lookback", "lookback", c.split.lookback);
    c.split.train_frac = json_field(d, "data.train_frac", "train_frac", c.split.train_frac);
    c.split.val_frac = json_field(d, "data.val_frac", "val_frac", c.split.val_frac);
    c.split.test_frac = json_field(d, "data.test_frac", "test_frac", c.split.test_frac);
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      check_keys(s, "data.synthetic",
                 {"n_stocks", "sector_sizes", "n_days", "factor_vol", "idio_vol",
                  "regime_switch_prob", "high_vol_multiplier", "factor_persistence", "seed"});
      c.synthetic.n_stocks = json_field(s, "data.synthetic.n_stocks", "n_stocks",
                                        c.synthetic.n_stocks);
      c.synthetic.sector_sizes = json_field(s, "data.synthetic.sector_sizes", "sector_sizes",
                                            c.synthetic.sector_sizes);
      c.synthetic.n_days = json_field(s, "data.synthetic.n_days", "n_days", c.synthetic.n_days);
      c.synthetic.factor_vol = json_field(s, "data.synthetic.factor_vol", "factor_vol",
                                          c.synthetic.factor_vol);
      c.synthetic.idio_vol = json_field(s, "data.synthetic.idio_vol", "idio_vol",
                                        c.synthetic.idio_vol);
      c.synthetic.regime_switch_prob =
          json_field(s, "data.synthetic.regime_switch_prob", "regime_switch_prob",
                     c.synthetic.regime_switch_prob);
      c.synthetic.high_vol_multiplier =
          json_field(s, "data.synthetic.high_vol_multiplier", "high_vol_multiplier",
                     c.synthetic.high_vol_multiplier);
      c.synthetic.factor_persistence =
          json_field(s, "data.synthetic.factor_persistence", "factor_persistence",
                     c.synthetic.factor_persistence);
      c.synthetic.seed = json_field(s, "data.synthetic.seed", "seed", c.synthetic.seed);
    }
  }
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    check_keys(g, "graph", {"threshold", "symmetric_normalization", "hyperedge_clusters"});
    c.corr_threshold = json_field(g, "graph.threshold", "threshold", c.corr_threshold);
    c.symmetric_normalization = json_field(g, "graph.symmetric_normalization",
                                           "symmetric_normalization", c.symmetric_normalization);
    c.hyperedge_clusters = json_field(g, "graph.hyperedge_clusters", "hyperedge_clusters",
                                      c.hyperedge_clusters);
  }
  if (j.contains("arch")) {
    const auto& a = j.at("arch");
    check_keys(a, "arch",
               {"embed", "hidden_graph", "hidden_lstm", "lstm_layers", "dropout", "head_split",
                "literal_normalization", "baseline_hidden", "baseline_layers",
                "baseline_dropout"});
    c.bcf.embed = json_field(a, "arch.embed", "embed", c.bcf.embed);
    c.bcf.hidden_graph = json_field(a, "arch.hidden_graph", "hidden_graph", c.bcf.hidden_graph);
    c.bcf.hidden_lstm = json_field(a, "arch.hidden_lstm", "hidden_lstm", c.bcf.hidden_lstm);
    c.bcf.lstm_layers = json_field(a, "arch.lstm_layers", "lstm_layers", c.bcf.lstm_layers);
    c.bcf.dropout = json_field(a, "arch.dropout", "dropout", c.bcf.dropout);
    c.bcf.head_split = json_field(a, "arch.head_split", "head_split", c.bcf.head_split);
    c.bcf.literal_normalization = json_field(a, "arch.literal_normalization",
                                             "literal_normalization", c.bcf.literal_normalization);
    c.baseline.hidden = json_field(a, "arch.baseline_hidden", "baseline_hidden",
                                   c.baseline.hidden);
    c.baseline.layers = json_field(a, "arch.baseline_layers", "baseline_layers",
                                   c.baseline.layers);
    c.baseline.dropout = json_field(a, "arch.baseline_dropout", "baseline_dropout",
                                    c.baseline.dropout);
  }
  if (j.contains("ablation")) {
    const auto& f = j.at("ablation");
    check_keys(f, "ablation", {"static_alpha", "no_log_chaos", "no_regime_gate", "no_tent_chaos"});
    c.ablation.static_alpha = json_field(f, "ablation.static_alpha", "static_alpha",
                                         c.ablation.static_alpha);
    c.ablation.no_log_chaos = json_field(f, "ablation.no_log_chaos", "no_log_chaos",
                                         c.ablation.no_log_chaos);
    c.ablation.no_regime_gate = json_field(f, "ablation.no_regime_gate", "no_regime_gate",
                                           c.ablation.no_regime_gate);
    c.ablation.no_tent_chaos = json_field(f, "ablation.no_tent_chaos", "no_tent_chaos",
                                          c.ablation.no_tent_chaos);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train",
               {"max_epochs", "lr", "weight_decay", "clip_norm", "train_snapshots",
                "val_snapshots", "early_stop_patience", "scheduler_factor", "scheduler_patience",
                "min_lr"});
    c.max_epochs = json_field(t, "train.max_epochs", "max_epochs", c.max_epochs);
    c.lr = json_field(t, "train.lr", "lr", c.lr);
    c.weight_decay = json_field(t, "train.weight_decay", "weight_decay", c.weight_decay);
    c.clip_norm = json_field(t, "train.clip_norm", "clip_norm", c.clip_norm);
    c.train_snapshots = json_field(t, "train.train_snapshots", "train_snapshots",
                                   c.train_snapshots);
    c.val_snapshots = json_field(t, "train.val_snapshots", "val_snapshots", c.val_snapshots);
    c.early_stop_patience = json_field(t, "train.early_stop_patience", "early_stop_patience",
                                       c.early_stop_patience);
    c.scheduler_factor = json_field(t, "train.scheduler_factor", "scheduler_factor",
                                    c.scheduler_factor);
    c.scheduler_patience = json_field(t, "train.scheduler_patience", "scheduler_patience",
                                      c.scheduler_patience);
    c.min_lr = json_field(t, "train.min_lr", "min_lr", c.min_lr);
  }
  if (j.contains("lube")) {
    const auto& l = j.at("lube");
    check_keys(l, "lube", {"target_coverage", "lambda_w", "lambda_u", "lambda_o", "softness_k"});
    c.lube.target_coverage = json_field(l, "lube.target_coverage", "target_coverage",
                                        c.lube.target_coverage);
    c.lube.lambda_w = json_field(l, "lube.lambda_w", "lambda_w", c.lube.lambda_w);
    c.lube.lambda_u = json_field(l, "lube.lambda_u", "lambda_u", c.lube.lambda_u);
    c.lube.lambda_o = json_field(l, "lube.lambda_o", "lambda_o", c.lube.lambda_o);
    c.lube.softness_k = json_field(l, "lube.softness_k", "softness_k", c.lube.softness_k);
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    check_keys(m, "metrics", {"winkler_alpha", "cwc_gamma", "cwc_eta", "piaw_epsilon", "dm_lag"});
    c.metrics.winkler_alpha = json_field(m, "metrics.winkler_alpha", "winkler_alpha",
                                         c.metrics.winkler_alpha);
    c.metrics.cwc_gamma = json_field(m, "metrics.cwc_gamma", "cwc_gamma", c.metrics.cwc_gamma);
    c.metrics.cwc_eta = json_field(m, "metrics.cwc_eta", "cwc_eta", c.metrics.cwc_eta);
    c.metrics.piaw_epsilon = json_field(m, "metrics.piaw_epsilon", "piaw_epsilon",
                                        c.metrics.piaw_epsilon);
    c.metrics.dm_lag = json_field(m, "metrics.dm_lag", "dm_lag", c.metrics.dm_lag);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e, "eval", {"horizon"});
    c.horizon = json_field(e, "eval.horizon", "horizon", c.horizon);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("load_config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("load_config: '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// Applies one `dotted.key=value` override onto a config JSON document. The
/// value is parsed as JSON when possible (numbers, booleans, arrays) and kept
/// as a string otherwise. The path must already exist: overrides can change
/// settings, not invent them.
inline void apply_override(nlohmann::json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw usage_error("override '" + spec + "' is not of the form key.path=value");
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  const auto keys = split(path, '.');
  nlohmann::json* node = &doc;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->contains(keys[i]))
      throw config_error("override names unknown config field '" + path + "'");
    node = &node->at(keys[i]);
  }
  if (!node->is_object() || !node->contains(keys.back()))
    throw config_error("override names unknown config field '" + path + "'");
  (*node)[keys.back()] = value;
}

/// Stable digest of the fully resolved config; identical configs hash
/// identically regardless of key order in the source file.
inline std::string config_hash(const ExperimentConfig& c) {
  return hex_u64(fnv1a64(config_to_json(c).dump()));
}

// ---------------------------------------------------------------------------
// Data preparation

struct DataContext {
  PricePanel panel;    // cleaned price panel
  ReturnPanel returns; // raw simple returns
  SplitResult split;
  ScalerStats scaler;  // fitted on the training segment only
  ReturnPanel scaled;  // full panel scaled with training statistics
  MarketGraph graph;
  std::optional<Hypergraph> hypergraph;
  std::size_t lookback = 40;
  // Valid prediction targets (return indices with a full lookback window).
  std::vector<std::size_t> train_targets, val_targets, test_targets;
  double train_target_range = 0.0;

  std::size_t n_stocks() const { return panel.n_stocks(); }
  /// Date on which return-step t realizes.
  const std::string& target_date(std::size_t t) const { return returns.dates[t]; }
  /// Last observed price before return-step t happens.
  double base_price(std::size_t i, std::size_t t) const { return panel.prices(i, t); }
  /// Price after return-step t has realized.
  double realized_price(std::size_t i, std::size_t t) const { return panel.prices(i, t + 1); }
};

inline DataContext prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  DataContext ctx;
  PricePanel raw = cfg.data_source == "synthetic" ? synthesize_panel(cfg.synthetic)
                                                  : load_price_csv(cfg.csv_path);
  ctx.panel = clean_panel(raw);
  ctx.returns = compute_returns(ctx.panel);
  ctx.split = chronological_split(ctx.returns, cfg.split);
  ctx.scaler = fit_scaler(ctx.split.train);
  ctx.scaled = apply_scaler(ctx.returns, ctx.scaler);
  ctx.graph = build_correlation_graph(ctx.split.train, cfg.corr_threshold,
                                      cfg.symmetric_normalization);
  if (cfg.model == "HGNN")
    ctx.hypergraph = build_hypergraph(ctx.split.train, cfg.hyperedge_clusters);
  ctx.lookback = cfg.split.lookback;
  for (std::size_t t = ctx.lookback; t < ctx.split.train_span.end; ++t)
    ctx.train_targets.push_back(t);
  for (std::size_t t = ctx.split.val_span.begin; t < ctx.split.val_span.end; ++t)
    ctx.val_targets.push_back(t);
  for (std::size_t t = ctx.split.test_span.begin; t < ctx.split.test_span.end; ++t)
    ctx.test_targets.push_back(t);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t t : ctx.train_targets) {
    for (std::size_t i = 0; i < ctx.scaled.n_stocks(); ++i) {
      lo = std::min(lo, ctx.scaled.returns(i, t));
      hi = std::max(hi, ctx.scaled.returns(i, t));
    }
  }
  ctx.train_target_range = hi - lo;
  if (!(ctx.train_target_range > 0.0))
    throw data_error("prepare_data: training targets are constant; nothing to fit");
  return ctx;
}

inline std::unique_ptr<Model> make_model(const ExperimentConfig& cfg, const DataContext& ctx,
                                         RngStream& rng) {
  if (cfg.model == "BCF-GCN")
    return std::make_unique<BcfGcnModel>(ctx.graph, cfg.bcf, cfg.ablation, rng);
  if (cfg.model == "LSTM")
    return std::make_unique<LstmBaselineModel>(ctx.n_stocks(), cfg.baseline, rng);
  if (cfg.model == "GRU")
    return std::make_unique<GruBaselineModel>(ctx.n_stocks(), cfg.baseline, rng);
  if (cfg.model == "GCN")
    return std::make_unique<GcnBaselineModel>(ctx.graph, cfg.baseline, rng);
  if (cfg.model == "HGNN") {
    if (!ctx.hypergraph)
      throw config_error("make_model: data context was prepared without a hypergraph");
    return std::make_unique<HgnnBaselineModel>(*ctx.hypergraph, cfg.baseline, rng);
  }
  throw config_error("make_model: unknown model kind '" + cfg.model + "'");
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  bool is_best = false;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t stop_epoch = 0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::size_t> pick_snapshots(std::size_t pool, std::size_t want, RngStream& rng,
                                               bool& warned, std::vector<std::string>& warnings,
                                               const char* which) {
  if (pool == 0) throw data_error(std::string("train: no valid ") + which + " targets");
  if (pool >= want) return rng.sample_without_replacement(pool, want);
  if (!warned) {
    warnings.push_back(std::string(which) + " pool smaller than snapshots per epoch (" +
                       std::to_string(pool) + " < " + std::to_string(want) +
                       "); sampling with replacement");
    warned = true;
  }
  return rng.sample_with_replacement(pool, want);
}

inline Tensor target_column(const DataContext& ctx, std::size_t t) {
  const std::size_t n = ctx.scaled.n_stocks();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = ctx.scaled.returns(i, t);
  return Tensor::from_values(n, 1, std::move(y));
}

}  // namespace detail

/// Snapshot-sampled training with plateau LR decay, early stopping, and
/// best-validation restore. The model is left holding the best-validation
/// parameters (and running statistics) when this returns.
inline TrainLog train_model(Model& model, const DataContext& ctx, const ExperimentConfig& cfg,
                            RngStream& rng) {
  TrainLog log;
  auto params = model.trainable();
  AdamState adam;
  adam.cfg = AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  PlateauScheduler sched{cfg.lr, cfg.scheduler_factor, static_cast<int>(cfg.scheduler_patience),
                         cfg.min_lr};
  ParamSnapshot best = snapshot_params(model);
  std::size_t since_best = 0;
  bool train_warned = false, val_warned = false;
  const std::size_t max_epochs = cfg.resolved_max_epochs();

  // The validation snapshot set is drawn once, up front. Re-drawing it per
  // epoch would make consecutive validation losses incomparable (each epoch
  // would score a different slice of the segment), reducing early stopping
  // and best-checkpoint selection to sampling noise.
  const auto va_idx = detail::pick_snapshots(ctx.val_targets.size(), cfg.val_snapshots, rng,
                                             val_warned, log.warnings, "validation");

  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    // Fixed RNG order within the epoch: train indices, then dropout draws.
    const auto tr_idx = detail::pick_snapshots(ctx.train_targets.size(), cfg.train_snapshots,
                                               rng, train_warned, log.warnings, "training");
    const double lr_used = sched.lr;
    adam.cfg.lr = lr_used;

    double train_loss = 0.0;
    for (std::size_t j : tr_idx) {
      const std::size_t t = ctx.train_targets[j];
      if (t >= ctx.split.train_span.end)
        throw error("train_model: sampled a target outside the training segment");
      const Array2D window = make_window(ctx.scaled, t, ctx.lookback);
      ModelOutput out = model.forward(window, true, rng);
      auto [lo, up] = to_bounds(out.center, out.width);
      Tensor loss = lube_loss(lo, up, detail::target_column(ctx, t), cfg.lube,
                              ctx.train_target_range);
      backward(loss);
      clip_grad_norm(params, cfg.clip_norm);
      adam_step(params, adam);
      train_loss += loss.item();
    }
    train_loss /= static_cast<double>(tr_idx.size());

    double val_loss = 0.0;
    for (std::size_t j : va_idx) {
      const std::size_t t = ctx.val_targets[j];
      if (t < ctx.split.val_span.begin || t >= ctx.split.val_span.end)
        throw error("train_model: sampled a target outside the validation segment");
      const Array2D window = make_window(ctx.scaled, t, ctx.lookback);
      ModelOutput out = model.forward(window, false, rng);
      auto [lo, up] = to_bounds(out.center, out.width);
      val_loss += lube_loss(lo, up, detail::target_column(ctx, t), cfg.lube,
                            ctx.train_target_range)
                      .item();
    }
    val_loss /= static_cast<double>(va_idx.size());

    const bool is_best = val_loss < log.best_val_loss;
    if (is_best) {
      log.best_val_loss = val_loss;
      log.best_epoch = epoch;
      best = snapshot_params(model);
      since_best = 0;
    } else {
      ++since_best;
    }
    sched.observe(val_loss);
    log.epochs.push_back({epoch, train_loss, val_loss, lr_used, is_best});
    log.stop_epoch = epoch;
    if (since_best >= cfg.early_stop_patience) {
      log.stopped_early = true;
      break;
    }
  }
  restore_params(model, best);
  return log;
}

inline void write_train_log_csv(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("write_train_log_csv: cannot open '" + path + "' for writing");
  out << "epoch,train_loss,val_loss,lr,is_best\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss)
        << ',' << format_double(e.lr) << ',' << (e.is_best ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Rolling one-step evaluation

struct ForecastRow {
  std::string date;
  std::string ticker;
  double lower = 0.0;
  double center = 0.0;
  double upper = 0.0;
  double level = 0.0;  // nominal coverage of the interval
};

struct EvalResult {
  std::vector<ForecastRow> forecasts;  // scaled-return space, step-major
  std::vector<double> winkler_series;  // per-observation Winkler, aligned with forecasts
  MetricsReport report;
  std::size_t audit_violations = 0;
};

namespace detail {

/// Directional-accuracy and Theil pair pools that never mix observations
/// across stocks (or across forecast paths).
struct DirectionPools {
  std::size_t dstat_match = 0, dstat_total = 0;
  double theil_num = 0.0, theil_den = 0.0;

  static int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

  void add_series(const std::vector<double>& y, const std::vector<double>& yhat) {
    for (std::size_t t = 1; t < y.size(); ++t) {
      if (sign_of(y[t] - y[t - 1]) == sign_of(yhat[t] - yhat[t - 1])) ++dstat_match;
      ++dstat_total;
      theil_num += (y[t] - yhat[t]) * (y[t] - yhat[t]);
      theil_den += (y[t] - y[t - 1]) * (y[t] - y[t - 1]);
    }
  }

  void apply(MetricsReport& r) const {
    std::vector<std::string> extra;
    if (dstat_total == 0) {
      r.dstat = std::numeric_limits<double>::quiet_NaN();
      extra.push_back("dstat_undefined");
    } else {
      r.dstat = static_cast<double>(dstat_match) / static_cast<double>(dstat_total);
    }
    if (theil_den == 0.0) {
      r.theils_u = std::numeric_limits<double>::quiet_NaN();
      extra.push_back("theils_u_undefined");
    } else {
      r.theils_u = std::sqrt(theil_num / theil_den);
    }
    for (const auto& f : extra) {
      if (!r.flags.empty()) r.flags += ';';
      r.flags += f;
    }
  }
};

inline void append_flag(MetricsReport& r, const std::string& flag) {
  if (!r.flags.empty()) r.flags += ';';
  r.flags += flag;
}

}  // namespace detail

/// One-step-ahead forecasts over the whole test segment with frozen
/// parameters. Metrics pool every (stock, step) pair; DStat and Theil's U are
/// accumulated per stock so that no pair crosses stock boundaries.
inline EvalResult rolling_evaluate(Model& model, const DataContext& ctx,
                                   const ExperimentConfig& cfg, RngStream& rng) {
  EvalResult res;
  const std::string digest_before = checkpoint_digest(model);
  const std::size_t n = ctx.n_stocks();
  std::vector<double> lo_flat, up_flat, c_flat, y_flat;
  std::vector<std::vector<double>> y_per_stock(n), c_per_stock(n);
  for (std::size_t t : ctx.test_targets) {
    const WindowAuditRecord audit = audit_window(t, ctx.lookback);
    if (audit.window_end > audit.target) ++res.audit_violations;
    const Array2D window = make_window(ctx.scaled, t, ctx.lookback);
    ModelOutput out = model.forward(window, false, rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = out.center.values()[i];
      const double w = out.width.values()[i];
      const double y = ctx.scaled.returns(i, t);
      res.forecasts.push_back({ctx.target_date(t), ctx.panel.tickers[i], c - w, c, c + w,
                               cfg.lube.target_coverage});
      lo_flat.push_back(c - w);
      up_flat.push_back(c + w);
      c_flat.push_back(c);
      y_flat.push_back(y);
      y_per_stock[i].push_back(y);
      c_per_stock[i].push_back(c);
    }
  }
  if (res.audit_violations > 0)
    throw error("rolling_evaluate: a window leaked data at or after its target");
  if (checkpoint_digest(model) != digest_before)
    throw error("rolling_evaluate: model state changed during evaluation");
  res.winkler_series = winkler_losses(lo_flat, up_flat, y_flat, cfg.metrics);
  res.report = build_metrics_report(model.kind(), std::to_string(cfg.seed), "D1", "return",
                                    lo_flat, up_flat, c_flat, y_flat, cfg.metrics);
  detail::DirectionPools pools;
  for (std::size_t i = 0; i < n; ++i) pools.add_series(y_per_stock[i], c_per_stock[i]);
  pools.apply(res.report);
  detail::append_flag(res.report, "pool=scaled-returns");
  return res;
}

inline void write_forecasts_csv(const std::vector<ForecastRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("write_forecasts_csv: cannot open '" + path + "' for writing");
  out << "date,ticker,lower,center,upper,level\n";
  for (const auto& r : rows) {
    out << r.date << ',' << r.ticker << ',' << format_double(r.lower) << ','
        << format_double(r.center) << ',' << format_double(r.upper) << ','
        << format_double(r.level) << '\n';
  }
}

/// Realized per-observation Winkler losses, the input the DM test consumes.
inline void write_losses_csv(const EvalResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("write_losses_csv: cannot open '" + path + "' for writing");
  out << "date,ticker,winkler\n";
  for (std::size_t i = 0; i < res.forecasts.size(); ++i) {
    out << res.forecasts[i].date << ',' << res.forecasts[i].ticker << ','
        << format_double(res.winkler_series[i]) << '\n';
  }
}

struct LossSeries {
  std::vector<std::string> keys;  // date|ticker, in file order
  std::vector<double> values;
};

inline LossSeries read_losses_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("read_losses_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw data_error("read_losses_csv: '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "date,ticker,winkler")
    throw data_error("read_losses_csv: '" + path + "' has unexpected header '" + line + "'");
  LossSeries s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 3)
      throw data_error("read_losses_csv: '" + path + "' line " + std::to_string(lineno) +
                       " does not have 3 columns");
    try {
      s.values.push_back(std::stod(cells[2]));
    } catch (const std::exception&) {
      throw data_error("read_losses_csv: '" + path + "' line " + std::to_string(lineno) +
                       " has a non-numeric loss");
    }
    s.keys.push_back(cells[0] + "|" + cells[1]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Multi-step price-level backtest

struct BacktestRow {
  std::string date;  // date of the realized price at this horizon step
  std::string ticker;
  std::size_t h = 0;  // 1-based horizon step
  double lower = 0.0;
  double center = 0.0;
  double upper = 0.0;
  double realized = 0.0;
};

struct BacktestResult {
  MetricsReport d1;
  MetricsReport d1d5;
  std::vector<BacktestRow> rows;  // anchor-major, horizon-minor, stock-minor
  std::vector<std::string> warnings;
};

/// Recursive closed-loop backtest in price space. The point path extends by
/// the model's own centers; the interval half-width at step h is the h=1
/// width scaled by sqrt(h), applied to the return before the price map.
inline BacktestResult multi_step_backtest(Model& model, const DataContext& ctx,
                                          const ExperimentConfig& cfg, RngStream& rng) {
  BacktestResult res;
  const std::string digest_before = checkpoint_digest(model);
  const std::size_t n = ctx.n_stocks();
  const std::size_t test_end = ctx.split.test_span.end;
  bool truncated = false;

  std::vector<double> d1_lo, d1_up, d1_c, d1_y;
  std::vector<double> all_lo, all_up, all_c, all_y;
  std::vector<std::vector<double>> d1_y_stock(n), d1_c_stock(n);
  detail::DirectionPools d1_pools, path_pools;
  // Per-anchor path series (with the shared base price prepended) feed the
  // D1-D5 directional pools.
  std::vector<std::vector<double>> path_y(n), path_c(n);

  for (std::size_t t : ctx.test_targets) {
    const std::size_t hmax = std::min<std::size_t>(cfg.horizon, test_end - t);
    if (hmax < cfg.horizon) truncated = true;
    Array2D window = make_window(ctx.scaled, t, ctx.lookback);
    std::vector<double> path_price(n), width1(n);
    for (std::size_t i = 0; i < n; ++i) {
      path_price[i] = ctx.base_price(i, t);
      path_y[i].assign(1, path_price[i]);
      path_c[i].assign(1, path_price[i]);
    }
    for (std::size_t h = 1; h <= hmax; ++h) {
      ModelOutput out = model.forward(window, false, rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double c = out.center.values()[i];
        if (h == 1) width1[i] = out.width.values()[i];
        const double spread = width1[i] * std::sqrt(static_cast<double>(h));
        const double r_c = invert_scaler_value(c, i, ctx.scaler);
        const double r_lo = invert_scaler_value(c - spread, i, ctx.scaler);
        const double r_up = invert_scaler_value(c + spread, i, ctx.scaler);
        const double base = path_price[i];
        const double p_lo = base * (1.0 + r_lo);
        const double p_c = base * (1.0 + r_c);
        const double p_up = base * (1.0 + r_up);
        const double realized = ctx.realized_price(i, t + h - 1);
        res.rows.push_back({ctx.target_date(t + h - 1), ctx.panel.tickers[i], h, p_lo, p_c,
                            p_up, realized});
        path_price[i] = p_c;
        path_y[i].push_back(realized);
        path_c[i].push_back(p_c);
        all_lo.push_back(p_lo);
        all_up.push_back(p_up);
        all_c.push_back(p_c);
        all_y.push_back(realized);
        if (h == 1) {
          d1_lo.push_back(p_lo);
          d1_up.push_back(p_up);
          d1_c.push_back(p_c);
          d1_y.push_back(realized);
          d1_y_stock[i].push_back(realized);
          d1_c_stock[i].push_back(p_c);
        }
      }
      if (h < hmax) {
        // Slide the window forward onto the model's own scaled centers.
        Array2D next(window.rows, window.cols);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k + 1 < window.cols; ++k) next(i, k) = window(i, k + 1);
          next(i, window.cols - 1) = out.center.values()[i];
        }
        window = next;
      }
    }
    for (std::size_t i = 0; i < n; ++i) path_pools.add_series(path_y[i], path_c[i]);
  }
  if (truncated)
    res.warnings.push_back("final anchors truncated: fewer than horizon steps remained");
  if (checkpoint_digest(model) != digest_before)
    throw error("multi_step_backtest: model state changed during evaluation");

  const std::string seed_text = std::to_string(cfg.seed);
  res.d1 = build_metrics_report(model.kind(), seed_text, "D1", "price", d1_lo, d1_up, d1_c,
                                d1_y, cfg.metrics);
  for (std::size_t i = 0; i < n; ++i) d1_pools.add_series(d1_y_stock[i], d1_c_stock[i]);
  d1_pools.apply(res.d1);
  detail::append_flag(res.d1, "pool=prices");

  const std::string tag = "D1-D" + std::to_string(cfg.horizon);
  res.d1d5 = build_metrics_report(model.kind(), seed_text, tag, "price", all_lo, all_up, all_c,
                                  all_y, cfg.metrics);
  path_pools.apply(res.d1d5);
  detail::append_flag(res.d1d5, "pool=prices");
  if (truncated) detail::append_flag(res.d1d5, "truncated_horizon");
  return res;
}

inline void write_backtest_csv(const std::vector<BacktestRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("write_backtest_csv: cannot open '" + path + "' for writing");
  out << "date,ticker,horizon,lower,center,upper,realized\n";
  for (const auto& r : rows) {
    out << r.date << ',' << r.ticker << ',' << r.h << ',' << format_double(r.lower) << ','
        << format_double(r.center) << ',' << format_double(r.upper) << ','
        << format_double(r.realized) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Ablation grid and multi-seed runs

struct AblationRun {
  std::string variant;
  MetricsReport report;
  TrainLog log;
  std::size_t trainable_parameters = 0;
};

inline std::vector<std::pair<std::string, AblationFlags>> ablation_grid() {
  return {
      {"Full (Proposed)", {}},
      {"Static Alpha", {.static_alpha = true}},
      {"No Log Chaos", {.no_log_chaos = true}},
      {"No Regime Gate", {.no_regime_gate = true}},
      {"No Tent Chaos", {.no_tent_chaos = true}},
  };
}

/// Trains and evaluates the five ablation variants on identical data and
/// seed. Component construction order is fixed, so every variant starts from
/// the same initialization draws.
inline std::vector<AblationRun> run_ablation(const ExperimentConfig& base,
                                             const DataContext& ctx) {
  if (base.model != "BCF-GCN")
    throw config_error("run_ablation: ablations apply to the BCF-GCN model only");
  std::vector<AblationRun> runs;
  for (const auto& [label, flags] : ablation_grid()) {
    ExperimentConfig cfg = base;
    cfg.ablation = flags;
    RngStream rng(cfg.seed);
    auto model = make_model(cfg, ctx, rng);
    AblationRun run;
    run.variant = label;
    run.log = train_model(*model, ctx, cfg, rng);
    EvalResult ev = rolling_evaluate(*model, ctx, cfg, rng);
    run.report = ev.report;
    run.report.model = label;
    run.trainable_parameters = model->parameter_count();
    runs.push_back(std::move(run));
  }
  return runs;
}

struct SeedRun {
  std::uint64_t seed = 0;
  MetricsReport report;
  TrainLog log;
};

inline std::vector<SeedRun> multi_seed_run(const ExperimentConfig& base,
                                           const DataContext& ctx,
                                           const std::vector<std::uint64_t>& seeds = {42, 123,
                                                                                      456}) {
  if (seeds.empty()) throw usage_error("multi_seed_run: need at least one seed");
  std::vector<SeedRun> runs;
  for (std::uint64_t s : seeds) {
    ExperimentConfig cfg = base;
    cfg.seed = s;
    RngStream rng(s);
    auto model = make_model(cfg, ctx, rng);
    SeedRun run;
    run.seed = s;
    run.log = train_model(*model, ctx, cfg, rng);
    run.report = rolling_evaluate(*model, ctx, cfg, rng).report;
    runs.push_back(std::move(run));
  }
  return runs;
}

/// Mean and population-std summary rows over a set of per-seed reports.
inline std::pair<MetricsReport, MetricsReport> summarize_reports(
    const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw usage_error("summarize_reports: empty report list");
  auto collect = [&](auto field) {
    std::vector<double> v;
    v.reserve(reports.size());
    for (const auto& r : reports) v.push_back(field(r));
    return v;
  };
  MetricsReport mean = reports.front(), sd = reports.front();
  mean.seed = "mean";
  sd.seed = "std";
  mean.flags.clear();
  sd.flags.clear();
  auto set = [&](double MetricsReport::* member) {
    const auto v = collect([&](const MetricsReport& r) { return r.*member; });
    mean.*member = mean_of(v);
    sd.*member = stddev_of(v);
  };
  set(&MetricsReport::picp);
  set(&MetricsReport::piaw);
  set(&MetricsReport::winkler);
  set(&MetricsReport::cwc);
  set(&MetricsReport::smape);
  set(&MetricsReport::dstat);
  set(&MetricsReport::theils_u);
  return {mean, sd};
}

inline void write_metrics_csv(const std::vector<MetricsReport>& reports,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("write_metrics_csv: cannot open '" + path + "' for writing");
  out << metrics_csv_header() << '\n';
  for (const auto& r : reports) out << metrics_csv_row(r) << '\n';
}

// ---------------------------------------------------------------------------
// Reference widths

/// Mean test-set Winkler of a constant-width interval centered at zero whose
/// half-width is calibrated on the training targets to the given empirical
/// coverage. A sanity yardstick for learned intervals.
inline double constant_width_baseline_winkler(const DataContext& ctx, const MetricsConfig& mcfg,
                                              double coverage = 0.90) {
  if (!(coverage > 0.0 && coverage < 1.0))
    throw config_error("constant_width_baseline_winkler: coverage must lie in (0,1)");
  std::vector<double> magnitudes;
  for (std::size_t t : ctx.train_targets)
    for (std::size_t i = 0; i < ctx.scaled.n_stocks(); ++i)
      magnitudes.push_back(std::abs(ctx.scaled.returns(i, t)));
  if (magnitudes.empty())
    throw data_error("constant_width_baseline_winkler: no training targets");
  std::sort(magnitudes.begin(), magnitudes.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(coverage * static_cast<double>(magnitudes.size())));
  const double half_width = magnitudes[std::min(rank == 0 ? 0 : rank - 1,
                                                magnitudes.size() - 1)];
  std::vector<double> lo, up, y;
  for (std::size_t t : ctx.test_targets) {
    for (std::size_t i = 0; i < ctx.scaled.n_stocks(); ++i) {
      lo.push_back(-half_width);
      up.push_back(half_width);
      y.push_back(ctx.scaled.returns(i, t));
    }
  }
  return winkler(lo, up, y, mcfg);
}

}  // namespace bcf

#endif  // BCF_HARNESS_HPP
