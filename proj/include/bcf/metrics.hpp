// Interval-forecast evaluation metrics and the Diebold-Mariano test over
// per-observation interval-score (Winkler) losses.
//
// All functions are pure; the only state is the MetricsConfig carrying the
// Winkler miscoverage level, the coverage-penalty constants and the PIAW
// range epsilon.
#ifndef BCF_METRICS_HPP
#define BCF_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "bcf/common.hpp"

namespace bcf {

struct MetricsConfig {
  double winkler_alpha = 0.10;  // miscoverage level; score factor is 2/alpha
  double cwc_gamma = 0.90;      // nominal coverage below which CWC inflates
  double cwc_eta = 50.0;        // penalty sharpness
  double piaw_epsilon = 1e-8;   // guards the range normalization
  // Diebold-Mariano truncation lag; <0 means floor(n^(1/3)).
  long long dm_lag = -1;

  void validate() const {
    if (!(winkler_alpha > 0.0 && winkler_alpha < 1.0))
      throw config_error("MetricsConfig: winkler_alpha must lie in (0,1)");
    if (!(cwc_gamma > 0.0 && cwc_gamma < 1.0))
      throw config_error("MetricsConfig: cwc_gamma must lie in (0,1)");
    if (!(cwc_eta > 0.0)) throw config_error("MetricsConfig: cwc_eta must be positive");
    if (!(piaw_epsilon > 0.0)) throw config_error("MetricsConfig: piaw_epsilon must be positive");
  }
};

namespace detail {

inline void check_interval_args(const std::vector<double>& lower,
                                const std::vector<double>& upper,
                                const std::vector<double>& y, const char* fn) {
  if (y.empty()) throw usage_error(std::string(fn) + ": empty input");
  if (lower.size() != y.size() || upper.size() != y.size())
    throw usage_error(std::string(fn) + ": length mismatch");
}

}  // namespace detail

/// Fraction of observations inside their interval (bounds inclusive).
inline double picp(const std::vector<double>& lower, const std::vector<double>& upper,
                   const std::vector<double>& y) {
  detail::check_interval_args(lower, upper, y, "picp");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (lower[i] <= y[i] && y[i] <= upper[i]) ++covered;
  return static_cast<double>(covered) / static_cast<double>(y.size());
}

/// Mean interval width normalized by the observed range of y (plus epsilon).
inline double piaw(const std::vector<double>& lower, const std::vector<double>& upper,
                   const std::vector<double>& y, const MetricsConfig& cfg = {}) {
  detail::check_interval_args(lower, upper, y, "piaw");
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  const double range = *mx - *mn + cfg.piaw_epsilon;
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (upper[i] - lower[i]) / range;
  return s / static_cast<double>(y.size());
}

/// Per-observation interval scores: width, plus (2/alpha) times the miss
/// distance when the observation falls outside.
inline std::vector<double> winkler_losses(const std::vector<double>& lower,
                                          const std::vector<double>& upper,
                                          const std::vector<double>& y,
                                          const MetricsConfig& cfg = {}) {
  detail::check_interval_args(lower, upper, y, "winkler");
  const double penalty = 2.0 / cfg.winkler_alpha;
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double wi = upper[i] - lower[i];
    if (y[i] < lower[i]) wi += penalty * (lower[i] - y[i]);
    else if (y[i] > upper[i]) wi += penalty * (y[i] - upper[i]);
    w[i] = wi;
  }
  return w;
}

inline double winkler(const std::vector<double>& lower, const std::vector<double>& upper,
                      const std::vector<double>& y, const MetricsConfig& cfg = {}) {
  const auto losses = winkler_losses(lower, upper, y, cfg);
  return mean_of(losses);
}

/// Coverage-width criterion: PIAW when coverage meets the nominal level,
/// otherwise PIAW inflated by exp(-eta*(PICP - gamma)) (> 1 in that branch).
inline double cwc(double picp_val, double piaw_val, const MetricsConfig& cfg = {}) {
  if (picp_val >= cfg.cwc_gamma) return piaw_val;
  return piaw_val * std::exp(-cfg.cwc_eta * (picp_val - cfg.cwc_gamma));
}

/// Symmetric MAPE: mean of |y - yhat| / ((|y| + |yhat|)/2); a 0/0 term is 0.
inline double smape(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.empty()) throw usage_error("smape: empty input");
  if (y.size() != yhat.size()) throw usage_error("smape: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double denom = (std::abs(y[i]) + std::abs(yhat[i])) / 2.0;
    if (denom > 0.0) s += std::abs(y[i] - yhat[i]) / denom;
  }
  return s / static_cast<double>(y.size());
}

/// Directional accuracy: fraction of consecutive steps where the predicted
/// change has the same sign as the realized change, with sign(0) = 0 (so a
/// flat prediction matches a flat realization).
inline double dstat(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size()) throw usage_error("dstat: length mismatch");
  if (y.size() < 2) throw usage_error("dstat: needs at least 2 points");
  auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
  std::size_t match = 0;
  for (std::size_t t = 1; t < y.size(); ++t)
    if (sgn(y[t] - y[t - 1]) == sgn(yhat[t] - yhat[t - 1])) ++match;
  return static_cast<double>(match) / static_cast<double>(y.size() - 1);
}

/// Theil's U against the random-walk baseline yhat_t = y_{t-1}. The first
/// step has no naive forecast and is excluded from both MSEs.
inline double theils_u(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size()) throw usage_error("theils_u: length mismatch");
  if (y.size() < 2) throw usage_error("theils_u: needs at least 2 points");
  double mse_model = 0.0, mse_naive = 0.0;
  for (std::size_t t = 1; t < y.size(); ++t) {
    const double em = yhat[t] - y[t];
    const double en = y[t - 1] - y[t];
    mse_model += em * em;
    mse_naive += en * en;
  }
  if (mse_naive == 0.0)
    throw data_error("theils_u: naive MSE is zero (constant series); statistic undefined");
  return std::sqrt(mse_model / mse_naive);
}

// ---------------------------------------------------------------------------
// Diebold-Mariano

struct DmResult {
  double stat = 0.0;
  double p_value = 1.0;
  std::string better = "none";  // "A", "B", or "none"
};

/// Tests equal predictive accuracy of two loss series (per-observation
/// Winkler scores). d_t = lossA_t - lossB_t; the statistic is
/// mean(d)/sqrt(omega/n) with a Newey-West long-run variance (Bartlett
/// kernel, lag = floor(n^(1/3)) unless overridden). Negative statistic
/// favours A. p is two-sided from the standard normal.
inline DmResult diebold_mariano(const std::vector<double>& loss_a,
                                const std::vector<double>& loss_b,
                                const MetricsConfig& cfg = {}) {
  if (loss_a.size() != loss_b.size()) throw usage_error("diebold_mariano: length mismatch");
  const std::size_t n = loss_a.size();
  if (n < 30) throw usage_error("diebold_mariano: needs at least 30 observations");

  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = loss_a[i] - loss_b[i];
  const double dbar = mean_of(d);

  const long long lag =
      cfg.dm_lag >= 0 ? cfg.dm_lag
                      : static_cast<long long>(std::floor(std::cbrt(static_cast<double>(n))));
  auto autocov = [&](std::size_t l) {
    double s = 0.0;
    for (std::size_t t = l; t < n; ++t) s += (d[t] - dbar) * (d[t - l] - dbar);
    return s / static_cast<double>(n);
  };
  double omega = autocov(0);
  for (long long l = 1; l <= lag && static_cast<std::size_t>(l) < n; ++l) {
    const double w = 1.0 - static_cast<double>(l) / (static_cast<double>(lag) + 1.0);
    omega += 2.0 * w * autocov(static_cast<std::size_t>(l));
  }

  DmResult r;
  if (omega <= 0.0) {
    // Degenerate loss differential with no variation.
    if (dbar == 0.0) {
      r.stat = 0.0;
      r.p_value = 1.0;
      r.better = "none";
    } else {
      r.stat = dbar < 0.0 ? -std::numeric_limits<double>::infinity()
                          : std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
      r.better = dbar < 0.0 ? "A" : "B";
    }
    return r;
  }
  r.stat = dbar / std::sqrt(omega / static_cast<double>(n));
  // Two-sided normal tail: 2*(1 - Phi(|stat|)) = erfc(|stat|/sqrt(2)).
  r.p_value = std::erfc(std::abs(r.stat) / std::sqrt(2.0));
  if (r.stat < 0.0) r.better = "A";
  else if (r.stat > 0.0) r.better = "B";
  else r.better = "none";
  return r;
}

// ---------------------------------------------------------------------------
// Report assembly and CSV serialization

struct MetricsReport {
  std::string model;
  std::string seed;     // a seed number, or "mean"/"std" for summary rows
  std::string horizon;  // e.g. "D1", "D1-D5"
  std::string level;    // "return" or "price"
  std::size_t n = 0;
  double picp = 0.0;
  double piaw = 0.0;
  double winkler = 0.0;
  double cwc = 0.0;
  double smape = 0.0;
  double dstat = 0.0;
  double theils_u = 0.0;
  std::string flags;  // semicolon-joined degenerate-case markers, may be empty
};

/// Computes the full metric set for one forecast series. The point forecast
/// entering SMAPE/DStat/Theil is the interval center. Degenerate cases
/// (constant y) surface as flags instead of exceptions.
inline MetricsReport build_metrics_report(const std::string& model, const std::string& seed,
                                          const std::string& horizon, const std::string& level,
                                          const std::vector<double>& lower,
                                          const std::vector<double>& upper,
                                          const std::vector<double>& center,
                                          const std::vector<double>& y,
                                          const MetricsConfig& cfg = {}) {
  detail::check_interval_args(lower, upper, y, "build_metrics_report");
  if (center.size() != y.size()) throw usage_error("build_metrics_report: length mismatch");
  MetricsReport r;
  r.model = model;
  r.seed = seed;
  r.horizon = horizon;
  r.level = level;
  r.n = y.size();
  r.picp = picp(lower, upper, y);
  r.piaw = piaw(lower, upper, y, cfg);
  r.winkler = winkler(lower, upper, y, cfg);
  r.cwc = cwc(r.picp, r.piaw, cfg);
  r.smape = smape(y, center);

  std::vector<std::string> flags;
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  if (*mx - *mn == 0.0) flags.push_back("degenerate_y_range");
  if (y.size() >= 2) {
    r.dstat = dstat(y, center);
    try {
      r.theils_u = theils_u(y, center);
    } catch (const data_error&) {
      r.theils_u = std::numeric_limits<double>::quiet_NaN();
      flags.push_back("theils_u_undefined");
    }
  } else {
    r.dstat = std::numeric_limits<double>::quiet_NaN();
    r.theils_u = std::numeric_limits<double>::quiet_NaN();
    flags.push_back("too_short_for_directional");
  }
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (i) r.flags += ';';
    r.flags += flags[i];
  }
  return r;
}

inline std::string metrics_csv_header() {
  return "model,seed,horizon,level,n,picp,piaw,winkler,cwc,smape,dstat,theils_u,flags";
}

inline std::string metrics_csv_row(const MetricsReport& r) {
  std::string row;
  row += r.model;
  row += ',';
  row += r.seed;
  row += ',';
  row += r.horizon;
  row += ',';
  row += r.level;
  row += ',';
  row += std::to_string(r.n);
  for (double v : {r.picp, r.piaw, r.winkler, r.cwc, r.smape, r.dstat, r.theils_u}) {
    row += ',';
    row += format_double(v);
  }
  row += ',';
  row += r.flags;
  return row;
}

}  // namespace bcf

#endif  // BCF_METRICS_HPP
