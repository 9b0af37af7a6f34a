// Command-line front end: data synthesis and ingestion, training,
// evaluation, backtesting, ablations, multi-seed runs, Diebold-Mariano
// comparison, and report assembly.
//
// Exit codes: 0 success, 1 usage error, 2 data/config error. Every number the
// CLI prints is the library-computed value, displayed at 4 decimals; CSVs
// keep full precision.
#ifndef BCF_CLI_HPP
#define BCF_CLI_HPP

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bcf/harness.hpp"

namespace bcf {

inline constexpr const char* kArtifactVersion = "0.1.0";

namespace cli_detail {

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
#if defined(_WIN32)
  gmtime_s(&tm_utc, &now);
#else
  gmtime_r(&now, &tm_utc);
#endif
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline std::string default_out_root() {
  if (const char* env = std::getenv("BCFGCN_OUT"); env && *env) return env;
  return "runs";
}

/// Resolves the final config: file (or defaults), then --set overrides, then
/// the --seed shortcut.
inline ExperimentConfig resolve_config(const std::string& config_path,
                                       const std::vector<std::string>& overrides,
                                       long long seed_override) {
  nlohmann::json doc;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw data_error("config file '" + config_path + "' does not exist");
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("config file '" + config_path + "' is not valid JSON: " + e.what());
    }
    // Fill unspecified sections with defaults so overrides can target them.
    nlohmann::json full = config_to_json(config_from_json(doc));
    doc = std::move(full);
  } else {
    doc = config_to_json(ExperimentConfig{});
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed_override >= 0) doc["seed"] = static_cast<std::uint64_t>(seed_override);
  return config_from_json(doc);
}

/// Creates `<out>/<run-id>/`, refusing to reuse an existing directory unless
/// forced.
inline std::filesystem::path ensure_run_dir(const std::string& out_root,
                                            const std::string& run_id, bool force) {
  std::filesystem::path dir = std::filesystem::path(out_root) / run_id;
  if (std::filesystem::exists(dir)) {
    if (!force)
      throw data_error("run directory '" + dir.string() +
                       "' already exists; pass --force to overwrite");
  } else {
    std::filesystem::create_directories(dir);
  }
  return dir;
}

inline void write_manifest(const std::filesystem::path& dir, nlohmann::json manifest) {
  manifest["artifact_version"] = kArtifactVersion;
  manifest["created_utc"] = utc_timestamp();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw data_error("cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(1) << '\n';
}

inline void write_config_json(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
  std::ofstream out(dir / "config.json");
  if (!out) throw data_error("cannot write config in '" + dir.string() + "'");
  out << config_to_json(cfg).dump(1) << '\n';
}

inline std::string run_id_for(const std::string& prefix, const ExperimentConfig& cfg) {
  return prefix + "-seed" + std::to_string(cfg.seed) + "-" + config_hash(cfg).substr(0, 8);
}

/// Renders rows as a fixed-width text table; numeric cells arrive already
/// formatted.
inline std::string render_table(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], row[c].size());
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      out += cells[c];
      out.append(width[c] - cells[c].size(), ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  emit(header);
  std::vector<std::string> rule(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) rule[c] = std::string(width[c], '-');
  emit(rule);
  for (const auto& row : rows) emit(row);
  return out;
}

inline std::string fmt4(double v) { return format_fixed(v, 4); }

inline std::vector<std::string> report_display_row(const MetricsReport& r) {
  return {r.model, r.seed,          r.horizon,      r.level,        std::to_string(r.n),
          fmt4(r.picp), fmt4(r.piaw), fmt4(r.winkler), fmt4(r.cwc), fmt4(r.smape),
          fmt4(r.dstat), fmt4(r.theils_u), r.flags};
}

inline const std::vector<std::string>& report_display_header() {
  static const std::vector<std::string> h{"model", "seed",    "horizon", "level", "n",
                                          "picp",  "piaw",    "winkler", "cwc",   "smape",
                                          "dstat", "theils_u", "flags"};
  return h;
}

// --- report assembly -------------------------------------------------------

struct ParsedMetricsRow {
  MetricsReport report;
  std::string source_file;
};

inline std::vector<ParsedMetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("report: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw data_error("report: '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_csv_header())
    throw data_error("report: '" + path + "' does not have the expected metrics header");
  std::vector<ParsedMetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 13)
      throw data_error("report: '" + path + "' line " + std::to_string(lineno) +
                       " has the wrong number of columns");
    MetricsReport r;
    r.model = cells[0];
    r.seed = cells[1];
    r.horizon = cells[2];
    r.level = cells[3];
    try {
      r.n = static_cast<std::size_t>(std::stoull(cells[4]));
      r.picp = std::stod(cells[5]);
      r.piaw = std::stod(cells[6]);
      r.winkler = std::stod(cells[7]);
      r.cwc = std::stod(cells[8]);
      r.smape = std::stod(cells[9]);
      r.dstat = std::stod(cells[10]);
      r.theils_u = std::stod(cells[11]);
    } catch (const std::exception&) {
      throw data_error("report: '" + path + "' line " + std::to_string(lineno) +
                       " has a non-numeric metric cell");
    }
    r.flags = cells[12];
    rows.push_back({std::move(r), path});
  }
  return rows;
}

/// Sort key: model, then numeric seed (summary rows last), then horizon.
inline bool report_row_less(const ParsedMetricsRow& a, const ParsedMetricsRow& b) {
  auto seed_rank = [](const std::string& s) -> std::pair<int, std::uint64_t> {
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(c); }))
      return {0, std::stoull(s)};
    if (s == "mean") return {1, 0};
    if (s == "std") return {2, 0};
    return {3, 0};
  };
  const auto& x = a.report;
  const auto& y = b.report;
  if (x.model != y.model) return x.model < y.model;
  const auto rx = seed_rank(x.seed), ry = seed_rank(y.seed);
  if (rx != ry) return rx < ry;
  if (x.horizon != y.horizon) return x.horizon < y.horizon;
  return x.level < y.level;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Subcommand bodies

namespace cli_detail {

inline int cmd_synth(const ExperimentConfig& cfg, const std::string& out_root, bool force) {
  if (cfg.data_source != "synthetic")
    throw config_error("synth requires data.source = 'synthetic'");
  PricePanel panel = synthesize_panel(cfg.synthetic);
  const std::string run_id = run_id_for("synth", cfg);
  const auto dir = ensure_run_dir(out_root, run_id, force);
  write_price_csv(panel, (dir / "prices.csv").string());
  write_config_json(dir, cfg);
  write_manifest(dir, {{"command", "synth"},
                       {"run_id", run_id},
                       {"config_hash", config_hash(cfg)},
                       {"seed", cfg.synthetic.seed},
                       {"n_stocks", panel.n_stocks()},
                       {"n_days", panel.n_days()},
                       {"files", {"prices.csv", "config.json"}}});
  std::cout << "wrote " << (dir / "prices.csv").string() << " (" << panel.n_stocks()
            << " stocks x " << panel.n_days() << " days)\n";
  return 0;
}

inline int cmd_ingest(const std::string& csv_path, const std::string& out_root, bool force) {
  PricePanel raw = load_price_csv(csv_path);
  PricePanel clean = clean_panel(raw);
  ReturnPanel returns = compute_returns(clean);
  const std::string run_id =
      "ingest-" + hex_u64(fnv1a64(csv_path + ":" + std::to_string(clean.n_days()))).substr(0, 8);
  const auto dir = ensure_run_dir(out_root, run_id, force);
  write_price_csv(clean, (dir / "prices.csv").string());
  nlohmann::json adf = nlohmann::json::object();
  std::cout << "cleaned panel: " << clean.n_stocks() << " stocks x " << clean.n_days()
            << " days (" << raw.n_days() - clean.n_days() << " days dropped)\n";
  for (std::size_t i = 0; i < clean.n_stocks(); ++i) {
    std::vector<double> series(returns.n_steps());
    for (std::size_t t = 0; t < series.size(); ++t) series[t] = returns.returns(i, t);
    try {
      const AdfResult r = adf_statistic(series);
      adf[clean.tickers[i]] = {{"stat", r.stat},
                               {"lag", r.lag},
                               {"reject_unit_root_5pct", r.reject_unit_root}};
      std::cout << "  " << clean.tickers[i] << ": adf=" << fmt4(r.stat)
                << (r.reject_unit_root ? " (stationary at 5%)" : " (unit root not rejected)")
                << "\n";
    } catch (const error& e) {
      adf[clean.tickers[i]] = {{"error", e.what()}};
      std::cout << "  " << clean.tickers[i] << ": adf unavailable (" << e.what() << ")\n";
    }
  }
  write_manifest(dir, {{"command", "ingest"},
                       {"run_id", run_id},
                       {"source_csv", csv_path},
                       {"n_stocks", clean.n_stocks()},
                       {"n_days", clean.n_days()},
                       {"adf", adf},
                       {"files", {"prices.csv"}}});
  std::cout << "wrote " << (dir / "prices.csv").string() << "\n";
  return 0;
}

inline int cmd_train(const ExperimentConfig& cfg, const std::string& out_root, bool force) {
  DataContext ctx = prepare_data(cfg);
  RngStream rng(cfg.seed);
  auto model = make_model(cfg, ctx, rng);
  TrainLog log = train_model(*model, ctx, cfg, rng);
  const std::string run_id = run_id_for(cfg.model, cfg);
  const auto dir = ensure_run_dir(out_root, run_id, force);
  write_config_json(dir, cfg);
  save_checkpoint(*model, (dir / "checkpoint.json").string(), cfg.seed, config_hash(cfg));
  write_train_log_csv(log, (dir / "trainlog.csv").string());
  write_manifest(dir, {{"command", "train"},
                       {"run_id", run_id},
                       {"config_hash", config_hash(cfg)},
                       {"seed", cfg.seed},
                       {"model", cfg.model},
                       {"best_epoch", log.best_epoch},
                       {"best_val_loss", log.best_val_loss},
                       {"stop_epoch", log.stop_epoch},
                       {"stopped_early", log.stopped_early},
                       {"warnings", log.warnings},
                       {"files", {"config.json", "checkpoint.json", "trainlog.csv"}}});
  std::cout << "run " << dir.string() << ": best epoch " << log.best_epoch << " (val loss "
            << fmt4(log.best_val_loss) << "), stopped at epoch " << log.stop_epoch
            << (log.stopped_early ? " (early)" : "") << "\n";
  return 0;
}

/// Rebuilds the data and model of an existing training run and loads its
/// checkpoint.
inline std::pair<ExperimentConfig, std::unique_ptr<Model>> reload_run(
    const std::filesystem::path& run_dir, DataContext& ctx_out) {
  const auto config_path = run_dir / "config.json";
  const auto ckpt_path = run_dir / "checkpoint.json";
  if (!std::filesystem::exists(config_path))
    throw data_error("run directory '" + run_dir.string() + "' has no config.json");
  if (!std::filesystem::exists(ckpt_path))
    throw data_error("run directory '" + run_dir.string() +
                     "' has no checkpoint.json; train first");
  ExperimentConfig cfg = load_config(config_path.string());
  const CheckpointInfo info = read_checkpoint_info(ckpt_path.string());
  if (info.config_hash != config_hash(cfg))
    throw data_error("checkpoint in '" + run_dir.string() +
                     "' was produced under a different config");
  ctx_out = prepare_data(cfg);
  RngStream rng(cfg.seed);
  auto model = make_model(cfg, ctx_out, rng);
  load_checkpoint(*model, ckpt_path.string());
  return {cfg, std::move(model)};
}

inline int cmd_eval(const std::string& run_dir_arg) {
  const std::filesystem::path dir(run_dir_arg);
  DataContext ctx;
  auto [cfg, model] = reload_run(dir, ctx);
  RngStream rng(cfg.seed);
  EvalResult res = rolling_evaluate(*model, ctx, cfg, rng);
  write_forecasts_csv(res.forecasts, (dir / "forecasts.csv").string());
  write_losses_csv(res, (dir / "losses.csv").string());
  write_metrics_csv({res.report}, (dir / "metrics.csv").string());
  std::cout << render_table(report_display_header(), {report_display_row(res.report)});
  std::cout << "wrote " << (dir / "forecasts.csv").string() << ", losses.csv, metrics.csv\n";
  return 0;
}

inline int cmd_backtest(const std::string& run_dir_arg, long long horizon_override) {
  const std::filesystem::path dir(run_dir_arg);
  DataContext ctx;
  auto [cfg, model] = reload_run(dir, ctx);
  if (horizon_override > 0) cfg.horizon = static_cast<std::size_t>(horizon_override);
  RngStream rng(cfg.seed);
  BacktestResult res = multi_step_backtest(*model, ctx, cfg, rng);
  write_backtest_csv(res.rows, (dir / "backtest.csv").string());
  write_metrics_csv({res.d1, res.d1d5}, (dir / "backtest_metrics.csv").string());
  std::cout << render_table(report_display_header(),
                            {report_display_row(res.d1), report_display_row(res.d1d5)});
  for (const auto& w : res.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "wrote " << (dir / "backtest.csv").string() << ", backtest_metrics.csv\n";
  return 0;
}

inline int cmd_ablate(const ExperimentConfig& cfg, const std::string& out_root, bool force) {
  if (cfg.model != "BCF-GCN") throw config_error("ablate requires model = 'BCF-GCN'");
  DataContext ctx = prepare_data(cfg);
  const auto runs = run_ablation(cfg, ctx);
  const std::string run_id = run_id_for("ablate", cfg);
  const auto dir = ensure_run_dir(out_root, run_id, force);
  write_config_json(dir, cfg);
  std::vector<MetricsReport> reports;
  nlohmann::json variants = nlohmann::json::array();
  std::vector<std::vector<std::string>> display;
  for (const auto& r : runs) {
    reports.push_back(r.report);
    variants.push_back({{"variant", r.variant},
                        {"trainable_parameters", r.trainable_parameters},
                        {"best_epoch", r.log.best_epoch},
                        {"best_val_loss", r.log.best_val_loss}});
    display.push_back(report_display_row(r.report));
  }
  write_metrics_csv(reports, (dir / "ablation_metrics.csv").string());
  write_manifest(dir, {{"command", "ablate"},
                       {"run_id", run_id},
                       {"config_hash", config_hash(cfg)},
                       {"seed", cfg.seed},
                       {"variants", variants},
                       {"files", {"config.json", "ablation_metrics.csv"}}});
  std::cout << render_table(report_display_header(), display);
  std::cout << "wrote " << (dir / "ablation_metrics.csv").string() << "\n";
  return 0;
}

inline int cmd_seeds(const ExperimentConfig& cfg, const std::string& out_root,
                     const std::string& seeds_arg, bool force) {
  std::vector<std::uint64_t> seeds;
  for (const auto& tok : split(seeds_arg, ',')) {
    const std::string s = trim(tok);
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(c); }))
      throw usage_error("--seeds expects a comma-separated list of non-negative integers");
    seeds.push_back(std::stoull(s));
  }
  DataContext ctx = prepare_data(cfg);
  const auto runs = multi_seed_run(cfg, ctx, seeds);
  const std::string run_id = run_id_for("seeds-" + cfg.model, cfg);
  const auto dir = ensure_run_dir(out_root, run_id, force);
  write_config_json(dir, cfg);
  std::vector<MetricsReport> reports;
  for (const auto& r : runs) reports.push_back(r.report);
  auto [mean_row, std_row] = summarize_reports(reports);
  std::vector<MetricsReport> with_summary = reports;
  with_summary.push_back(mean_row);
  with_summary.push_back(std_row);
  write_metrics_csv(with_summary, (dir / "seeds_metrics.csv").string());
  // Per-seed training summary: seed, model, best epoch, best loss, headline metrics.
  {
    std::ofstream out(dir / "seeds_summary.csv");
    if (!out) throw data_error("cannot write seeds_summary.csv");
    out << "seed,model,epoch,loss,picp,piaw,winkler,cwc\n";
    for (const auto& r : runs) {
      out << r.seed << ',' << cfg.model << ',' << r.log.best_epoch << ','
          << format_double(r.log.best_val_loss) << ',' << format_double(r.report.picp) << ','
          << format_double(r.report.piaw) << ',' << format_double(r.report.winkler) << ','
          << format_double(r.report.cwc) << '\n';
    }
  }
  write_manifest(dir, {{"command", "seeds"},
                       {"run_id", run_id},
                       {"config_hash", config_hash(cfg)},
                       {"seeds", seeds},
                       {"model", cfg.model},
                       {"files", {"config.json", "seeds_metrics.csv", "seeds_summary.csv"}}});
  std::vector<std::vector<std::string>> display;
  for (const auto& r : with_summary) display.push_back(report_display_row(r));
  std::cout << render_table(report_display_header(), display);
  std::cout << "wrote " << (dir / "seeds_metrics.csv").string() << ", seeds_summary.csv\n";
  return 0;
}

inline int cmd_dm(const std::string& a_path, const std::string& b_path, long long lag) {
  const LossSeries a = read_losses_csv(a_path);
  const LossSeries b = read_losses_csv(b_path);
  if (a.keys != b.keys)
    throw data_error("dm: loss files cover different (date, ticker) observations; "
                     "they must come from runs over the same test data");
  MetricsConfig mcfg;
  mcfg.dm_lag = static_cast<int>(lag);
  const DmResult r = diebold_mariano(a.values, b.values, mcfg);
  std::cout << "DM=" << fmt4(r.stat) << " p=" << fmt4(r.p_value) << " better=" << r.better
            << "\n";
  std::cout << "full_precision DM=" << format_double(r.stat) << " p="
            << format_double(r.p_value) << " n=" << a.values.size() << "\n";
  return 0;
}

inline int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  static const std::vector<std::string> candidates{
      "metrics.csv", "backtest_metrics.csv", "ablation_metrics.csv", "seeds_metrics.csv"};
  std::vector<ParsedMetricsRow> rows;
  for (const auto& rd : run_dirs) {
    bool found = false;
    for (const auto& name : candidates) {
      const auto path = std::filesystem::path(rd) / name;
      if (!std::filesystem::exists(path)) continue;
      const auto parsed = read_metrics_csv(path.string());
      rows.insert(rows.end(), parsed.begin(), parsed.end());
      found = true;
    }
    if (!found)
      throw data_error("report: run directory '" + rd + "' contains no metrics CSV");
  }
  std::stable_sort(rows.begin(), rows.end(), report_row_less);
  std::filesystem::create_directories(out_dir);
  const auto csv_path = std::filesystem::path(out_dir) / "report.csv";
  {
    std::ofstream out(csv_path);
    if (!out) throw data_error("report: cannot write '" + csv_path.string() + "'");
    out << metrics_csv_header() << '\n';
    for (const auto& r : rows) out << metrics_csv_row(r.report) << '\n';
  }
  std::vector<std::vector<std::string>> display;
  for (const auto& r : rows) display.push_back(report_display_row(r.report));
  const std::string table = render_table(report_display_header(), display);
  const auto txt_path = std::filesystem::path(out_dir) / "report.txt";
  {
    std::ofstream out(txt_path);
    if (!out) throw data_error("report: cannot write '" + txt_path.string() + "'");
    out << table;
  }
  std::cout << table;
  std::cout << "wrote " << csv_path.string() << ", report.txt\n";
  return 0;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Dispatch

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Prediction-interval forecasting for stock panels: graph encoder with "
               "bi-level chaotic fusion, LSTM aggregation, and LUBE-trained interval heads"};
  app.require_subcommand(1);

  std::string config_path, out_root = cli_detail::default_out_root();
  std::vector<std::string> overrides;
  long long seed_override = -1;
  bool force = false;

  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) {
      sub->add_option("--config", config_path, "experiment config JSON (defaults when omitted)");
      sub->add_option("--set", overrides,
                      "dotted-key config override, e.g. --set train.max_epochs=60");
      sub->add_option("--seed", seed_override, "override the run seed");
    }
    sub->add_option("--out", out_root, "output root directory (env BCFGCN_OUT, default runs/)");
    sub->add_flag("--force", force, "overwrite an existing run directory");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic sector-factor price panel");
  add_common(synth);

  std::string ingest_csv;
  auto* ingest = app.add_subcommand("ingest", "validate and clean a raw price CSV");
  ingest->add_option("--csv", ingest_csv, "raw price CSV (date,TICKER,... header)")->required();
  add_common(ingest, false);

  auto* train = app.add_subcommand("train", "train a model and save its checkpoint");
  add_common(train);

  std::string run_dir_arg;
  auto* eval = app.add_subcommand("eval", "rolling one-step evaluation of a trained run");
  eval->add_option("--run", run_dir_arg, "training run directory")->required();

  long long horizon_override = -1;
  auto* backtest = app.add_subcommand("backtest", "multi-step price-level backtest of a run");
  backtest->add_option("--run", run_dir_arg, "training run directory")->required();
  backtest->add_option("--horizon", horizon_override, "override the backtest horizon");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate the five ablation variants");
  add_common(ablate);

  std::string seeds_arg = "42,123,456";
  auto* seeds = app.add_subcommand("seeds", "full train+eval across seeds with summary rows");
  seeds->add_option("--seeds", seeds_arg, "comma-separated seed list (default 42,123,456)");
  add_common(seeds);

  std::string dm_a, dm_b;
  long long dm_lag = -1;
  auto* dm = app.add_subcommand("dm", "Diebold-Mariano comparison of two loss files");
  dm->add_option("--a", dm_a, "losses.csv of model A")->required();
  dm->add_option("--b", dm_b, "losses.csv of model B")->required();
  dm->add_option("--lag", dm_lag, "Newey-West lag (-1: floor(n^(1/3)))");

  std::vector<std::string> report_dirs;
  std::string report_out = ".";
  auto* report = app.add_subcommand("report", "merge run metrics into comparison tables");
  report->add_option("dirs", report_dirs, "run directories to merge")->required();
  report->add_option("--out", report_out, "directory for report.csv / report.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed() || train->parsed() || ablate->parsed() || seeds->parsed()) {
      const ExperimentConfig cfg =
          cli_detail::resolve_config(config_path, overrides, seed_override);
      if (synth->parsed()) return cli_detail::cmd_synth(cfg, out_root, force);
      if (train->parsed()) return cli_detail::cmd_train(cfg, out_root, force);
      if (ablate->parsed()) return cli_detail::cmd_ablate(cfg, out_root, force);
      return cli_detail::cmd_seeds(cfg, out_root, seeds_arg, force);
    }
    if (ingest->parsed()) return cli_detail::cmd_ingest(ingest_csv, out_root, force);
    if (eval->parsed()) return cli_detail::cmd_eval(run_dir_arg);
    if (backtest->parsed()) return cli_detail::cmd_backtest(run_dir_arg, horizon_override);
    if (dm->parsed()) return cli_detail::cmd_dm(dm_a, dm_b, dm_lag);
    if (report->parsed()) return cli_detail::cmd_report(report_dirs, report_out);
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace bcf

#endif  // BCF_CLI_HPP
