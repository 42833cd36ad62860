#pragma once

#include <filesystem>
#include <vector>

#include "hgot/common.hpp"

// Downstream evaluation of frozen embeddings: linear-probe classification,
// agglomerative clustering with matching-based scores, embedding export.
// Everything here is deterministic given the config seeds.

namespace hgot::eval {

struct ProbeConfig {
  double train_fraction = 0.8;  // stratified per class, in (0, 1)
  double l2_penalty = 1e-3;     // ridge term on the probe weights, >= 0
  int probe_epochs = 300;       // full-batch gradient steps
  double learning_rate = 0.5;
  std::uint64_t seed = 1;       // drives the split only; the fit is convex

  void validate() const;
};

struct ProbeReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

// Multinomial logistic probe on row-normalized embeddings. Trains on a
// stratified split, scores both F1 variants on the held-out rows.
ProbeReport linear_probe(const Mat& Z, const std::vector<int>& labels,
                         const ProbeConfig& cfg);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population form
  std::vector<double> values;
};

MetricSummary summarize(const std::vector<double>& values);

struct ProbeSummary {
  MetricSummary micro;
  MetricSummary macro;
};

// Repeats linear_probe over consecutive split seeds starting at cfg.seed.
ProbeSummary probe_over_seeds(const Mat& Z, const std::vector<int>& labels,
                              ProbeConfig cfg, int n_seeds);

// Agglomerative clustering, average linkage on Euclidean distances, cut at
// k clusters. Merge ties break toward the lowest pair; output ids are
// ordered by each cluster's lowest member index.
std::vector<int> hierarchical_cluster(const Mat& Z, int k);

struct ClusterReport {
  double acc = 0.0;  // best one-to-one mapping accuracy
  double nmi = 0.0;  // arithmetic-mean normalization
  double ari = 0.0;
  std::vector<int> assignment;
};

ClusterReport clustering_metrics(const std::vector<int>& assignment,
                                 const std::vector<int>& labels);

// CSV: header id,z0..z{d-1}, one row per node in index order.
void export_embeddings(const Mat& Z, const std::vector<int>& ids,
                       const std::filesystem::path& path);
Mat load_embeddings(const std::filesystem::path& path,
                    std::vector<int>* ids = nullptr);

}  // namespace hgot::eval
