// Correlation-threshold market graph, its normalized propagation operator,
// GCN layer forward with per-snapshot node normalization, tanh embedding
// clipping, and the clustering-based hypergraph with its HGNN layer forward.
//
// Both graph builders accept only TrainSegment (never the full panel), which
// is what enforces the no-look-ahead discipline at the type level.
#ifndef BCF_GRAPH_HPP
#define BCF_GRAPH_HPP

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "bcf/common.hpp"
#include "bcf/data.hpp"
#include "bcf/tensor.hpp"

namespace bcf {

// ---------------------------------------------------------------------------
// Correlation graph

struct MarketGraph {
  std::vector<std::string> tickers;
  Array2D adjacency;    // binary, zero diagonal, symmetric
  Array2D propagation;  // normalized (A+I)
  double threshold = 0.30;
  bool symmetric_normalization = true;
  std::string source = "train-returns";
  std::vector<std::string> warnings;

  std::size_t n_nodes() const { return tickers.size(); }
};

/// Pearson correlation of two equal-length series; a zero-variance side
/// makes the correlation 0 by convention (flagged by the caller).
inline double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw usage_error("pearson_correlation: length mismatch or empty");
  const double ma = mean_of(a), mb = mean_of(b);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double da = a[t] - ma, db = b[t] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

/// Normalizes A (symmetric, zero diagonal) into the propagation operator.
/// Default is the symmetric half-power form D^{-1/2}(A+I)D^{-1/2}; the
/// literal flag selects D^{-1}(A+I)D^{-1} instead for comparison runs.
inline Array2D normalize_adjacency(const Array2D& A, bool symmetric_half = true) {
  const std::size_t n = A.rows;
  if (A.cols != n) throw config_error("normalize_adjacency: adjacency must be square");
  for (std::size_t i = 0; i < n; ++i) {
    if (A(i, i) != 0.0) throw config_error("normalize_adjacency: diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j)
      if (A(i, j) != A(j, i)) throw config_error("normalize_adjacency: adjacency must be symmetric");
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;  // self-loop
    for (std::size_t j = 0; j < n; ++j) d += A(i, j);
    deg[i] = d;
  }
  Array2D P(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double a = A(i, j) + (i == j ? 1.0 : 0.0);
      if (a == 0.0) continue;
      P(i, j) = symmetric_half ? a / std::sqrt(deg[i] * deg[j]) : a / (deg[i] * deg[j]);
    }
  return P;
}

/// Thresholded absolute-Pearson adjacency over training returns, plus the
/// normalized propagation operator.
inline MarketGraph build_correlation_graph(const TrainSegment& train, double threshold = 0.30,
                                           bool symmetric_half = true) {
  const std::size_t n = train.n_stocks();
  if (train.n_steps() < 30)
    throw data_error("build_correlation_graph: need at least 30 training observations");
  MarketGraph g;
  g.tickers = train.tickers;
  g.threshold = threshold;
  g.symmetric_normalization = symmetric_half;
  g.adjacency = Array2D(n, n);

  std::vector<std::vector<double>> series(n);
  std::vector<bool> degenerate(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    series[i].resize(train.n_steps());
    for (std::size_t t = 0; t < train.n_steps(); ++t) series[i][t] = train.returns(i, t);
    if (stddev_of(series[i]) == 0.0) {
      degenerate[i] = true;
      g.warnings.push_back("zero-variance returns for " + train.tickers[i] +
                           "; correlations set to 0");
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = (degenerate[i] || degenerate[j])
                           ? 0.0
                           : pearson_correlation(series[i], series[j]);
      if (std::abs(c) >= threshold) {
        g.adjacency(i, j) = 1.0;
        g.adjacency(j, i) = 1.0;
      }
    }
  g.propagation = normalize_adjacency(g.adjacency, symmetric_half);
  return g;
}

/// Edge list (`src,dst` ticker pairs), ordered by index pair.
inline void write_edge_list_csv(const MarketGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("write_edge_list_csv: cannot open '" + path + "'");
  out << "src,dst\n";
  for (std::size_t i = 0; i < g.n_nodes(); ++i)
    for (std::size_t j = i + 1; j < g.n_nodes(); ++j)
      if (g.adjacency(i, j) != 0.0) out << g.tickers[i] << ',' << g.tickers[j] << '\n';
}

// ---------------------------------------------------------------------------
// Node normalization (batch norm over the node axis)

struct NodeNormParams {
  Tensor gamma;  // 1 x d, learnable
  Tensor beta;   // 1 x d, learnable
  std::vector<double> running_mean;  // buffers for eval mode
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  void init(std::size_t d) {
    gamma = Tensor::filled(1, d, 1.0, true);
    beta = Tensor::zeros(1, d, true);
    running_mean.assign(d, 0.0);
    running_var.assign(d, 1.0);
  }
};

/// Standardizes each feature across the N nodes of one snapshot (training
/// mode, differentiable through the batch statistics) or with the running
/// statistics (eval mode), then applies the affine pair.
inline Tensor node_norm(const Tensor& x, NodeNormParams& p, bool training) {
  const std::size_t d = x.cols();
  if (p.running_mean.size() != d) throw config_error("node_norm: feature size mismatch");
  Tensor mean_t, var_t;
  if (training) {
    mean_t = mean_rows(x);
    Tensor centered = sub(x, mean_t);
    var_t = mean_rows(mul(centered, centered));
    // Detached values feed the running statistics.
    for (std::size_t j = 0; j < d; ++j) {
      p.running_mean[j] = (1.0 - p.momentum) * p.running_mean[j] + p.momentum * mean_t.values()[j];
      p.running_var[j] = (1.0 - p.momentum) * p.running_var[j] + p.momentum * var_t.values()[j];
    }
  } else {
    mean_t = Tensor::from_values(1, d, p.running_mean);
    var_t = Tensor::from_values(1, d, p.running_var);
  }
  Tensor denom = sqrt(add(var_t, Tensor::filled(1, d, p.eps)));
  Tensor normalized = div(sub(x, mean_t), denom);
  return add(mul(normalized, p.gamma), p.beta);
}

// ---------------------------------------------------------------------------
// GCN layer

struct GcnLayerParams {
  Tensor weight;  // d_in x d_out
  Tensor bias;    // 1 x d_out
  NodeNormParams norm;

  void init(std::size_t d_in, std::size_t d_out, RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    std::vector<double> w(d_in * d_out);
    for (double& v : w) v = rng.uniform_range(-bound, bound);
    weight = Tensor::from_values(d_in, d_out, std::move(w), true);
    bias = Tensor::zeros(1, d_out, true);
    norm.init(d_out);
  }

  std::vector<Tensor> trainable() { return {weight, bias, norm.gamma, norm.beta}; }
};

/// relu(node_norm(P * H_in * W + b)).
inline Tensor gcn_layer_forward(const Tensor& P, const Tensor& h_in, GcnLayerParams& params,
                                bool training) {
  if (h_in.cols() != params.weight.rows())
    throw config_error("gcn_layer_forward: input feature size " + std::to_string(h_in.cols()) +
                       " does not match weight rows " + std::to_string(params.weight.rows()));
  Tensor pre = add(matmul(matmul(P, h_in), params.weight), params.bias);
  return relu(node_norm(pre, params.norm, training));
}

/// tanh(3*H): squashes embeddings into (-1, 1).
inline Tensor clip_embedding(const Tensor& h) { return tanh(scalar_mul(h, 3.0)); }

// ---------------------------------------------------------------------------
// Hypergraph

struct Hypergraph {
  std::vector<std::string> tickers;
  Array2D incidence;                  // N x E binary
  std::vector<double> edge_weights;   // E, diagonal of W
  std::vector<double> node_degrees;   // N, D_v(v,v) = sum_e W(e,e) H(v,e)
  std::vector<double> edge_degrees;   // E, D_e(e,e) = sum_v H(v,e)

  std::size_t n_nodes() const { return incidence.rows; }
  std::size_t n_edges() const { return incidence.cols; }

  /// M = D_v^{-1/2} H W D_e^{-1} H^T D_v^{-1/2}.
  Array2D propagation() const {
    const std::size_t n = n_nodes(), e = n_edges();
    for (std::size_t v = 0; v < n; ++v)
      if (!(node_degrees[v] > 0.0))
        throw data_error("Hypergraph: node " + tickers[v] + " has zero degree");
    Array2D M(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < e; ++k)
          s += incidence(i, k) * edge_weights[k] * incidence(j, k) / edge_degrees[k];
        M(i, j) = s / std::sqrt(node_degrees[i] * node_degrees[j]);
      }
    return M;
  }

  void recompute_degrees() {
    const std::size_t n = n_nodes(), e = n_edges();
    node_degrees.assign(n, 0.0);
    edge_degrees.assign(e, 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < e; ++k) {
        node_degrees[v] += edge_weights[k] * incidence(v, k);
        edge_degrees[k] += incidence(v, k);
      }
  }
};

/// Agglomerative average-linkage clustering on distance 1 - |corr| into k
/// clusters; singleton clusters are merged into their nearest cluster, and
/// each surviving cluster becomes a unit-weight hyperedge.
inline Hypergraph build_hypergraph(const TrainSegment& train, std::size_t k) {
  const std::size_t n = train.n_stocks();
  if (k < 2 || k >= n)
    throw config_error("build_hypergraph: k must satisfy 2 <= k < N, got k=" +
                       std::to_string(k) + " with N=" + std::to_string(n));
  if (train.n_steps() < 30)
    throw data_error("build_hypergraph: need at least 30 training observations");

  std::vector<std::vector<double>> series(n);
  for (std::size_t i = 0; i < n; ++i) {
    series[i].resize(train.n_steps());
    for (std::size_t t = 0; t < train.n_steps(); ++t) series[i][t] = train.returns(i, t);
  }
  Array2D dist(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool degenerate = stddev_of(series[i]) == 0.0 || stddev_of(series[j]) == 0.0;
      const double c = degenerate ? 0.0 : pearson_correlation(series[i], series[j]);
      dist(i, j) = dist(j, i) = 1.0 - std::abs(c);
    }

  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  auto avg_linkage = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double s = 0.0;
    for (std::size_t i : a)
      for (std::size_t j : b) s += dist(i, j);
    return s / static_cast<double>(a.size() * b.size());
  };
  while (clusters.size() > k) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double d = avg_linkage(clusters[i], clusters[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    std::sort(clusters[bi].begin(), clusters[bi].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  // Fold singletons into their nearest remaining cluster.
  for (std::size_t i = 0; i < clusters.size();) {
    if (clusters[i].size() >= 2) {
      ++i;
      continue;
    }
    std::size_t target = std::numeric_limits<std::size_t>::max();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < clusters.size(); ++j) {
      if (j == i) continue;
      const double d = avg_linkage(clusters[i], clusters[j]);
      if (d < best) {
        best = d;
        target = j;
      }
    }
    clusters[target].insert(clusters[target].end(), clusters[i].begin(), clusters[i].end());
    std::sort(clusters[target].begin(), clusters[target].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(i));
    i = 0;  // rescan; erasing shifted the remaining clusters
  }
  if (clusters.size() < 2)
    throw data_error("build_hypergraph: singleton merging left fewer than 2 hyperedges");

  Hypergraph hg;
  hg.tickers = train.tickers;
  hg.incidence = Array2D(n, clusters.size());
  hg.edge_weights.assign(clusters.size(), 1.0);
  for (std::size_t e = 0; e < clusters.size(); ++e)
    for (std::size_t v : clusters[e]) hg.incidence(v, e) = 1.0;
  hg.recompute_degrees();
  return hg;
}

// ---------------------------------------------------------------------------
// HGNN layer

struct HgnnLayerParams {
  Tensor weight;  // d_in x d_out

  void init(std::size_t d_in, std::size_t d_out, RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    std::vector<double> w(d_in * d_out);
    for (double& v : w) v = rng.uniform_range(-bound, bound);
    weight = Tensor::from_values(d_in, d_out, std::move(w), true);
  }

  std::vector<Tensor> trainable() { return {weight}; }
};

/// relu(M * H_in * Theta) with M the hypergraph propagation operator.
inline Tensor hgnn_layer_forward(const Tensor& M, const Tensor& h_in, HgnnLayerParams& params) {
  if (h_in.cols() != params.weight.rows())
    throw config_error("hgnn_layer_forward: input feature size mismatch");
  return relu(matmul(matmul(M, h_in), params.weight));
}

}  // namespace bcf

#endif  // BCF_GRAPH_HPP
