// Price-panel ingestion, cleaning, return computation, chronological
// splitting, train-only scaling, window construction, the ADF stationarity
// diagnostic, and the synthetic sector-factor panel generator.
//
// Leakage discipline: everything fitted from history (scaler, graphs) takes
// a TrainSegment, a distinct type that physically contains only the training
// slice, so downstream code cannot accidentally read validation or test data.
#ifndef BCF_DATA_HPP
#define BCF_DATA_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bcf/common.hpp"

namespace bcf {

// ---------------------------------------------------------------------------
// Panels

struct PricePanel {
  std::vector<std::string> tickers;  // fixed order, shared by all stages
  std::vector<std::string> dates;    // ISO, strictly ascending
  Array2D prices;                    // N x T
  // Raw panels may carry missing cells; cleaning removes them all.
  std::vector<std::uint8_t> missing;  // N*T mask, empty once clean

  std::size_t n_stocks() const { return tickers.size(); }
  std::size_t n_days() const { return dates.size(); }
  bool is_missing(std::size_t i, std::size_t t) const {
    return !missing.empty() && missing[i * n_days() + t] != 0;
  }
};

struct ReturnPanel {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;  // date on which each return realizes (T-1)
  Array2D returns;                 // N x (T-1)

  std::size_t n_stocks() const { return tickers.size(); }
  std::size_t n_steps() const { return dates.size(); }
};

/// A physically separate copy of the training slice of a return panel.
/// Scaler fitting and graph construction accept only this type.
struct TrainSegment {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;
  Array2D returns;  // N x train_len

  std::size_t n_stocks() const { return tickers.size(); }
  std::size_t n_steps() const { return dates.size(); }
};

/// Half-open index range [begin, end) into the full return panel's steps.
struct SegmentSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
};

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline bool parse_price_cell(const std::string& cell, double& out) {
  if (cell.empty()) return false;  // missing
  std::size_t pos = 0;
  out = std::stod(cell, &pos);
  while (pos < cell.size() && (cell[pos] == ' ' || cell[pos] == '\t')) ++pos;
  if (pos != cell.size()) throw std::invalid_argument("trailing characters");
  return true;
}

}  // namespace detail

/// Reads a `date,TICKER1,...,TICKERN` CSV. Empty cells become missing marks;
/// dates must be strictly ascending; the panel must have at least 2 tickers
/// and 50 rows.
inline PricePanel load_price_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("load_price_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw data_error("load_price_csv: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line, ',');
  if (header.size() < 3)
    throw data_error("load_price_csv: need at least 2 ticker columns, got " +
                     std::to_string(header.size() > 0 ? header.size() - 1 : 0));
  if (trim(header[0]) != "date")
    throw data_error("load_price_csv: first header column must be 'date'");

  PricePanel panel;
  for (std::size_t i = 1; i < header.size(); ++i) {
    auto t = trim(header[i]);
    if (t.empty()) throw data_error("load_price_csv: empty ticker name in header");
    panel.tickers.push_back(t);
  }
  const std::size_t n = panel.tickers.size();

  std::vector<std::vector<double>> rows;         // per day, length n
  std::vector<std::vector<std::uint8_t>> marks;  // per day, length n
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != n + 1)
      throw data_error("load_price_csv: line " + std::to_string(line_no) + ": expected " +
                       std::to_string(n + 1) + " columns, got " + std::to_string(cells.size()));
    auto date = trim(cells[0]);
    if (date.empty())
      throw data_error("load_price_csv: line " + std::to_string(line_no) + ": empty date");
    if (!panel.dates.empty()) {
      if (date == panel.dates.back())
        throw data_error("load_price_csv: line " + std::to_string(line_no) +
                         ": duplicate date '" + date + "'");
      if (date < panel.dates.back())
        throw data_error("load_price_csv: line " + std::to_string(line_no) +
                         ": dates not ascending ('" + date + "' after '" + panel.dates.back() +
                         "')");
    }
    std::vector<double> vals(n, 0.0);
    std::vector<std::uint8_t> miss(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      try {
        double v = 0.0;
        if (detail::parse_price_cell(trim(cells[i + 1]), v)) vals[i] = v;
        else miss[i] = 1;
      } catch (const std::exception&) {
        throw data_error("load_price_csv: line " + std::to_string(line_no) +
                         ": unparseable value '" + trim(cells[i + 1]) + "' for ticker " +
                         panel.tickers[i]);
      }
    }
    panel.dates.push_back(date);
    rows.push_back(std::move(vals));
    marks.push_back(std::move(miss));
  }
  if (panel.dates.size() < 50)
    throw data_error("load_price_csv: need at least 50 rows, got " +
                     std::to_string(panel.dates.size()));

  const std::size_t T = panel.dates.size();
  panel.prices = Array2D(n, T);
  panel.missing.assign(n * T, 0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      panel.prices(i, t) = rows[t][i];
      panel.missing[i * T + t] = marks[t][i];
    }
  return panel;
}

inline void write_price_csv(const PricePanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("write_price_csv: cannot open '" + path + "' for writing");
  out << "date";
  for (const auto& t : panel.tickers) out << ',' << t;
  out << '\n';
  for (std::size_t t = 0; t < panel.n_days(); ++t) {
    out << panel.dates[t];
    for (std::size_t i = 0; i < panel.n_stocks(); ++i) {
      out << ',';
      if (!panel.is_missing(i, t)) out << format_double(panel.prices(i, t));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Cleaning and returns

/// Drops days with more than max_missing_frac missing stocks, then fills the
/// remaining gaps per stock forward first, backward second. The result has
/// no missing cells and strictly positive prices.
inline PricePanel clean_panel(const PricePanel& raw, double max_missing_frac = 0.10) {
  const std::size_t n = raw.n_stocks();
  const std::size_t T = raw.n_days();
  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t miss = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (raw.is_missing(i, t)) ++miss;
    if (static_cast<double>(miss) <= max_missing_frac * static_cast<double>(n))
      keep.push_back(t);
  }
  if (keep.empty()) throw data_error("clean_panel: every day exceeds the missing threshold");

  PricePanel out;
  out.tickers = raw.tickers;
  out.dates.reserve(keep.size());
  for (std::size_t t : keep) out.dates.push_back(raw.dates[t]);
  const std::size_t Tk = keep.size();
  out.prices = Array2D(n, Tk);
  std::vector<std::uint8_t> miss(n * Tk, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < Tk; ++k) {
      out.prices(i, k) = raw.prices(i, keep[k]);
      miss[i * Tk + k] = raw.is_missing(i, keep[k]) ? 1 : 0;
    }

  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t k = 0; k < Tk; ++k)
      if (!miss[i * Tk + k]) { any = true; break; }
    if (!any)
      throw data_error("clean_panel: ticker " + out.tickers[i] + " has no observed prices");
    // Forward fill, then backward fill for any leading gap.
    double last = 0.0;
    bool have = false;
    for (std::size_t k = 0; k < Tk; ++k) {
      if (!miss[i * Tk + k]) {
        last = out.prices(i, k);
        have = true;
      } else if (have) {
        out.prices(i, k) = last;
        miss[i * Tk + k] = 0;
      }
    }
    have = false;
    for (std::size_t k = Tk; k-- > 0;) {
      if (!miss[i * Tk + k]) {
        last = out.prices(i, k);
        have = true;
      } else if (have) {
        out.prices(i, k) = last;
        miss[i * Tk + k] = 0;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < Tk; ++k)
      if (!(out.prices(i, k) > 0.0))
        throw data_error("clean_panel: non-positive price for ticker " + out.tickers[i] +
                         " on " + out.dates[k]);
  out.missing.clear();
  return out;
}

/// Simple returns r[i][t] = p[i][t+1]/p[i][t] - 1.
inline ReturnPanel compute_returns(const PricePanel& panel) {
  if (!panel.missing.empty())
    for (std::uint8_t m : panel.missing)
      if (m) throw data_error("compute_returns: panel has missing cells; clean it first");
  const std::size_t n = panel.n_stocks();
  const std::size_t T = panel.n_days();
  if (T < 2) throw data_error("compute_returns: need at least 2 days");
  ReturnPanel rp;
  rp.tickers = panel.tickers;
  rp.dates.assign(panel.dates.begin() + 1, panel.dates.end());
  rp.returns = Array2D(n, T - 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const double p0 = panel.prices(i, t);
      if (p0 == 0.0) throw data_error("compute_returns: zero price for ticker " +
                                      panel.tickers[i] + " on " + panel.dates[t]);
      rp.returns(i, t) = panel.prices(i, t + 1) / p0 - 1.0;
      if (!std::isfinite(rp.returns(i, t)))
        throw data_error("compute_returns: non-finite return for ticker " + panel.tickers[i]);
    }
  return rp;
}

// ---------------------------------------------------------------------------
// Chronological split

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  std::size_t lookback = 40;

  void validate() const {
    if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0))
      throw config_error("SplitSpec: fractions must be positive");
    const double s = train_frac + val_frac + test_frac;
    if (std::abs(s - 1.0) > 1e-9)
      throw config_error("SplitSpec: fractions must sum to 1");
    if (lookback == 0) throw config_error("SplitSpec: lookback must be positive");
  }
};

struct SplitResult {
  TrainSegment train;    // physical copy of the training columns
  SegmentSpan train_span;  // indices into the full panel, [0, train_end)
  SegmentSpan val_span;
  SegmentSpan test_span;
};

/// Contiguous chronological split at the given fractions; sizes are floored
/// and the remainder goes to the test segment.
inline SplitResult chronological_split(const ReturnPanel& panel, const SplitSpec& spec) {
  spec.validate();
  const std::size_t T = panel.n_steps();
  const auto train_len = static_cast<std::size_t>(
      std::floor(spec.train_frac * static_cast<double>(T)));
  const auto val_len = static_cast<std::size_t>(
      std::floor(spec.val_frac * static_cast<double>(T)));
  if (train_len < spec.lookback + 1)
    throw data_error("chronological_split: train segment has " + std::to_string(train_len) +
                     " steps, needs at least lookback+1 = " + std::to_string(spec.lookback + 1));
  if (val_len == 0 || T - train_len - val_len == 0)
    throw data_error("chronological_split: empty validation or test segment");

  SplitResult r;
  r.train_span = {0, train_len};
  r.val_span = {train_len, train_len + val_len};
  r.test_span = {train_len + val_len, T};

  r.train.tickers = panel.tickers;
  r.train.dates.assign(panel.dates.begin(),
                       panel.dates.begin() + static_cast<std::ptrdiff_t>(train_len));
  r.train.returns = Array2D(panel.n_stocks(), train_len);
  for (std::size_t i = 0; i < panel.n_stocks(); ++i)
    for (std::size_t t = 0; t < train_len; ++t)
      r.train.returns(i, t) = panel.returns(i, t);
  return r;
}

// ---------------------------------------------------------------------------
// Scaling

struct ScalerStats {
  std::vector<double> mean;
  std::vector<double> std;  // population; zero replaced by 1 with a flag
  std::vector<std::uint8_t> degenerate;

  bool any_degenerate() const {
    for (auto d : degenerate)
      if (d) return true;
    return false;
  }
};

/// Per-stock z-score statistics from the training segment only.
inline ScalerStats fit_scaler(const TrainSegment& train) {
  if (train.n_steps() == 0) throw data_error("fit_scaler: empty training segment");
  const std::size_t n = train.n_stocks();
  const std::size_t T = train.n_steps();
  ScalerStats s;
  s.mean.resize(n);
  s.std.resize(n);
  s.degenerate.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (std::size_t t = 0; t < T; ++t) m += train.returns(i, t);
    m /= static_cast<double>(T);
    double var = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double d = train.returns(i, t) - m;
      var += d * d;
    }
    var /= static_cast<double>(T);
    s.mean[i] = m;
    s.std[i] = std::sqrt(var);
    if (s.std[i] == 0.0) {
      s.std[i] = 1.0;
      s.degenerate[i] = 1;
    }
  }
  return s;
}

inline ReturnPanel apply_scaler(const ReturnPanel& panel, const ScalerStats& stats) {
  if (stats.mean.size() != panel.n_stocks())
    throw config_error("apply_scaler: stock count mismatch");
  ReturnPanel out = panel;
  for (std::size_t i = 0; i < panel.n_stocks(); ++i)
    for (std::size_t t = 0; t < panel.n_steps(); ++t)
      out.returns(i, t) = (panel.returns(i, t) - stats.mean[i]) / stats.std[i];
  return out;
}

inline double apply_scaler_value(double raw, std::size_t stock, const ScalerStats& stats) {
  return (raw - stats.mean[stock]) / stats.std[stock];
}

inline double invert_scaler_value(double scaled, std::size_t stock, const ScalerStats& stats) {
  return scaled * stats.std[stock] + stats.mean[stock];
}

// ---------------------------------------------------------------------------
// Windowing

/// Strictly past input block for predicting step t: columns t-L .. t-1.
inline Array2D make_window(const ReturnPanel& scaled, std::size_t t, std::size_t lookback) {
  if (t < lookback)
    throw usage_error("make_window: target index " + std::to_string(t) +
                      " has fewer than lookback=" + std::to_string(lookback) + " past steps");
  if (t >= scaled.n_steps())
    throw usage_error("make_window: target index out of range");
  const std::size_t n = scaled.n_stocks();
  Array2D w(n, lookback);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < lookback; ++k)
      w(i, k) = scaled.returns(i, t - lookback + k);
  return w;
}

/// One row of the leakage audit: the data range a prediction actually read.
struct WindowAuditRecord {
  std::size_t target = 0;
  std::size_t window_begin = 0;
  std::size_t window_end = 0;  // exclusive; must be <= target
};

inline WindowAuditRecord audit_window(std::size_t t, std::size_t lookback) {
  return WindowAuditRecord{t, t - lookback, t};
}

// ---------------------------------------------------------------------------
// Augmented Dickey-Fuller

struct AdfResult {
  double stat = 0.0;
  bool reject_unit_root = false;  // at the 5% level
  std::size_t lag = 0;
};

namespace detail {

/// Solves the symmetric system S x = b by Gaussian elimination with partial
/// pivoting. S is k x k row-major and is destroyed.
inline std::vector<double> solve_linear(std::vector<double> S, std::vector<double> b,
                                        std::size_t k) {
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(S[r * k + col]) > std::abs(S[piv * k + col])) piv = r;
    if (std::abs(S[piv * k + col]) < 1e-12)
      throw numeric_error("adf_statistic: singular regression matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < k; ++c) std::swap(S[col * k + c], S[piv * k + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < k; ++r) {
      const double f = S[r * k + col] / S[col * k + col];
      for (std::size_t c = col; c < k; ++c) S[r * k + c] -= f * S[col * k + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(k);
  for (std::size_t r = k; r-- > 0;) {
    double acc = b[r];
    for (std::size_t c = r + 1; c < k; ++c) acc -= S[r * k + c] * x[c];
    x[r] = acc / S[r * k + r];
  }
  return x;
}

}  // namespace detail

/// Constant-only ADF regression: delta_y_t on [1, y_{t-1}, delta_y_{t-1..t-p}]
/// with p = min(max_lag, floor(12*(n/100)^0.25)). The statistic is the
/// t-ratio on y_{t-1}, compared to the -2.86 critical value at 5%.
inline AdfResult adf_statistic(const std::vector<double>& series,
                               std::size_t max_lag = 100) {
  const std::size_t n = series.size();
  if (n < 25) throw usage_error("adf_statistic: series must have at least 25 points");
  const auto schwert = static_cast<std::size_t>(
      std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
  const std::size_t p = std::min(max_lag, schwert);

  std::vector<double> dy(n - 1);
  for (std::size_t t = 1; t < n; ++t) dy[t - 1] = series[t] - series[t - 1];

  // Rows are observations t = p+1 .. n-1 (indices into the series).
  const std::size_t rows = n - 1 - p;
  const std::size_t cols = 2 + p;  // constant, y_{t-1}, p lagged differences
  if (rows <= cols) throw usage_error("adf_statistic: series too short for the lag order");

  std::vector<double> X(rows * cols);
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = p + 1 + r;
    X[r * cols + 0] = 1.0;
    X[r * cols + 1] = series[t - 1];
    for (std::size_t l = 1; l <= p; ++l) X[r * cols + 1 + l] = dy[t - 1 - l];
    y[r] = dy[t - 1];
  }

  std::vector<double> XtX(cols * cols, 0.0);
  std::vector<double> Xty(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t a = 0; a < cols; ++a) {
      Xty[a] += X[r * cols + a] * y[r];
      for (std::size_t b = a; b < cols; ++b) XtX[a * cols + b] += X[r * cols + a] * X[r * cols + b];
    }
  }
  for (std::size_t a = 0; a < cols; ++a)
    for (std::size_t b = 0; b < a; ++b) XtX[a * cols + b] = XtX[b * cols + a];

  const auto beta = detail::solve_linear(XtX, Xty, cols);

  double rss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double fit = 0.0;
    for (std::size_t a = 0; a < cols; ++a) fit += X[r * cols + a] * beta[a];
    const double e = y[r] - fit;
    rss += e * e;
  }
  const double s2 = rss / static_cast<double>(rows - cols);

  // Variance of beta[1] needs [(X'X)^-1]_{11}: solve XtX v = e_1.
  std::vector<double> e1(cols, 0.0);
  e1[1] = 1.0;
  std::vector<double> XtX_copy(cols * cols, 0.0);
  for (std::size_t r2 = 0; r2 < rows; ++r2)
    for (std::size_t a = 0; a < cols; ++a)
      for (std::size_t b = 0; b < cols; ++b)
        XtX_copy[a * cols + b] += X[r2 * cols + a] * X[r2 * cols + b];
  const auto v = detail::solve_linear(std::move(XtX_copy), std::move(e1), cols);
  const double se = std::sqrt(s2 * v[1]);
  if (!(se > 0.0)) throw numeric_error("adf_statistic: zero standard error");

  AdfResult res;
  res.stat = beta[1] / se;
  res.lag = p;
  res.reject_unit_root = res.stat < -2.86;
  return res;
}

/// Fixed critical values for the constant-only case (1%/5%/10%).
inline double adf_critical_value(int percent) {
  switch (percent) {
    case 1: return -3.43;
    case 5: return -2.86;
    case 10: return -2.57;
  }
  throw usage_error("adf_critical_value: level must be 1, 5, or 10");
}

// ---------------------------------------------------------------------------
// Synthetic panel

struct SyntheticConfig {
  std::size_t n_stocks = 12;
  std::vector<std::size_t> sector_sizes = {4, 4, 4};
  std::size_t n_days = 1500;
  double factor_vol = 0.015;        // per-sector common factor
  double idio_vol = 0.008;          // per-stock noise
  double regime_switch_prob = 0.02; // per-day Markov switch probability
  double high_vol_multiplier = 2.5; // volatility scale in the high regime
  double factor_persistence = 0.4;  // AR(1) coefficient of each sector factor
  std::uint64_t seed = 42;

  void validate() const {
    std::size_t sum = 0;
    for (std::size_t s : sector_sizes) {
      if (s == 0) throw config_error("SyntheticConfig: empty sector block");
      sum += s;
    }
    if (sum != n_stocks)
      throw config_error("SyntheticConfig: sector sizes sum to " + std::to_string(sum) +
                         ", expected n_stocks=" + std::to_string(n_stocks));
    if (!(factor_vol > 0.0) || !(idio_vol > 0.0))
      throw config_error("SyntheticConfig: volatilities must be positive");
    if (!(regime_switch_prob >= 0.0 && regime_switch_prob <= 1.0))
      throw config_error("SyntheticConfig: regime_switch_prob must lie in [0,1]");
    if (!(high_vol_multiplier > 0.0))
      throw config_error("SyntheticConfig: high_vol_multiplier must be positive");
    if (!(factor_persistence >= 0.0 && factor_persistence < 1.0))
      throw config_error("SyntheticConfig: factor_persistence must lie in [0,1)");
    if (n_days < 50) throw config_error("SyntheticConfig: need at least 50 days");
  }
};

namespace detail {

// Civil-calendar conversion (Gregorian, proleptic); days are relative to
// 1970-01-01.
inline void civil_from_days(long long z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned long long>(z - era * 146097);
  const unsigned long long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long yy = static_cast<long long>(yoe) + era * 400;
  const unsigned long long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned long long mp = (5 * doy + 2) / 153;
  d = static_cast<unsigned>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<unsigned>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yy + (m <= 2 ? 1 : 0));
}

inline std::string iso_date_from_serial(long long days_since_epoch) {
  int y;
  unsigned m, d;
  civil_from_days(days_since_epoch, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
  return buf;
}

inline bool is_weekend(long long days_since_epoch) {
  // 1970-01-01 was a Thursday: weekday = (serial + 4) mod 7, Sunday = 0.
  const long long wd = ((days_since_epoch + 4) % 7 + 7) % 7;
  return wd == 0 || wd == 6;
}

}  // namespace detail

/// Sector-factor return generator with a market-wide two-state volatility
/// regime. Returns are r = m_t * (factor_sector + idio), where m_t follows a
/// Markov chain over {1, high_vol_multiplier}. A pure function of its config.
inline PricePanel synthesize_panel(const SyntheticConfig& cfg) {
  cfg.validate();
  RngStream rng(cfg.seed);
  const std::size_t n = cfg.n_stocks;
  const std::size_t T = cfg.n_days;
  const std::size_t S = cfg.sector_sizes.size();

  std::vector<std::size_t> sector_of(n);
  {
    std::size_t idx = 0;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t k = 0; k < cfg.sector_sizes[s]; ++k) sector_of[idx++] = s;
  }

  PricePanel panel;
  panel.tickers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "S%02zuN%02zu", sector_of[i] + 1, i + 1);
    panel.tickers.emplace_back(buf);
  }

  // Trading days: consecutive weekdays starting 2015-01-02 (a Friday).
  panel.dates.reserve(T);
  long long serial = 16437;  // 2015-01-02
  while (panel.dates.size() < T) {
    if (!detail::is_weekend(serial)) panel.dates.push_back(detail::iso_date_from_serial(serial));
    ++serial;
  }

  panel.prices = Array2D(n, T);
  std::vector<double> price(n);
  for (std::size_t i = 0; i < n; ++i) {
    price[i] = 50.0 + 10.0 * static_cast<double>(i % 7);
    panel.prices(i, 0) = price[i];
  }

  bool high_regime = false;
  // Each sector factor follows an AR(1) with the marginal variance held at
  // factor_vol^2, giving returns a persistent, cross-sectionally shared
  // component like real sector momentum.
  const double phi = cfg.factor_persistence;
  const double innov_scale = cfg.factor_vol * std::sqrt(1.0 - phi * phi);
  std::vector<double> factor(S, 0.0);
  for (std::size_t t = 1; t < T; ++t) {
    if (rng.uniform() < cfg.regime_switch_prob) high_regime = !high_regime;
    const double mult = high_regime ? cfg.high_vol_multiplier : 1.0;
    for (std::size_t s = 0; s < S; ++s) factor[s] = phi * factor[s] + innov_scale * rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      double r = mult * (factor[sector_of[i]] + cfg.idio_vol * rng.normal());
      if (r < -0.5) r = -0.5;  // keeps prices positive under extreme draws
      price[i] *= 1.0 + r;
      panel.prices(i, t) = price[i];
    }
  }
  return panel;
}

}  // namespace bcf

#endif  // BCF_DATA_HPP
