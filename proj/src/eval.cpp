#include "hgot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "hgot/common.hpp"

namespace hgot::eval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Maps arbitrary integer labels to 0..k-1 in sorted-value order.
std::vector<int> compact(const std::vector<int>& raw, int* k_out) {
  std::map<int, int> ids;
  for (int v : raw) ids.emplace(v, 0);
  int next = 0;
  for (auto& [v, id] : ids) id = next++;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = ids[raw[i]];
  if (k_out) *k_out = next;
  return out;
}

Mat unit_rows(const Mat& Z) {
  Mat X = Z;
  for (int i = 0; i < X.rows(); ++i) {
    double nr = X.row(i).norm();
    if (nr > 1e-12) X.row(i) /= nr;
  }
  return X;
}

int argmax_row(const Eigen::RowVectorXd& row) {
  int best = 0;
  for (int j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = j;
  return best;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ProbeConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  if (l2_penalty < 0.0) throw ConfigError("l2 penalty must be >= 0");
  if (probe_epochs < 1) throw ConfigError("probe epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("probe learning rate must be > 0");
}

ProbeReport linear_probe(const Mat& Z, const std::vector<int>& labels,
                         const ProbeConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(Z.rows());
  if (static_cast<int>(labels.size()) != n)
    throw ConfigError("label count does not match embedding rows");
  int k = 0;
  std::vector<int> y = compact(labels, &k);
  if (k < 2) throw ConfigError("probe needs at least two classes");

  Mat X = unit_rows(Z);

  // Stratified split; every class lands in train, singletons entirely so.
  std::mt19937_64 rng(mix_seed(cfg.seed, "probe_split"));
  std::vector<std::vector<int>> by_class(k);
  for (int i = 0; i < n; ++i) by_class[y[i]].push_back(i);
  std::vector<int> train, test;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const int count = static_cast<int>(idx.size());
    int n_train = static_cast<int>(std::floor(cfg.train_fraction * count));
    n_train = std::max(1, std::min(count == 1 ? 1 : count - 1, n_train));
    for (int i = 0; i < count; ++i)
      (i < n_train ? train : test).push_back(idx[i]);
  }
  if (test.empty()) throw DataError("the split leaves no held-out nodes");

  const int d = static_cast<int>(X.cols());
  const int nt = static_cast<int>(train.size());
  Mat Xtr(nt, d);
  std::vector<int> ytr(nt);
  for (int i = 0; i < nt; ++i) {
    Xtr.row(i) = X.row(train[i]);
    ytr[i] = y[train[i]];
  }

  // Full-batch softmax regression from zero init; the problem is convex, so
  // the seed only enters through the split.
  Mat W = Mat::Zero(k, d);
  Vec b = Vec::Zero(k);
  for (int epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    Mat logits = (Xtr * W.transpose()).rowwise() + b.transpose();
    Mat P(nt, k);
    for (int i = 0; i < nt; ++i) {
      double mx = logits.row(i).maxCoeff();
      P.row(i) = (logits.row(i).array() - mx).exp();
      P.row(i) /= P.row(i).sum();
    }
    for (int i = 0; i < nt; ++i) P(i, ytr[i]) -= 1.0;
    P /= nt;
    Mat gW = P.transpose() * Xtr + cfg.l2_penalty * W;
    Vec gb = P.colwise().sum().transpose();
    W -= cfg.learning_rate * gW;
    b -= cfg.learning_rate * gb;
  }

  // Score the held-out rows.
  std::vector<long> tp(k, 0), fp(k, 0), fn(k, 0);
  long correct = 0;
  std::vector<bool> seen(k, false);
  for (int idx : test) {
    Eigen::RowVectorXd logits = X.row(idx) * W.transpose() + b.transpose();
    int pred = argmax_row(logits);
    int truth = y[idx];
    seen[pred] = seen[truth] = true;
    if (pred == truth) {
      ++tp[truth];
      ++correct;
    } else {
      ++fp[pred];
      ++fn[truth];
    }
  }

  ProbeReport rep;
  rep.micro_f1 = static_cast<double>(correct) / test.size();
  double f1_sum = 0.0;
  int f1_classes = 0;
  for (int c = 0; c < k; ++c) {
    if (!seen[c]) continue;
    double prec = tp[c] + fp[c] > 0
                      ? static_cast<double>(tp[c]) / (tp[c] + fp[c]) : 0.0;
    double rec = tp[c] + fn[c] > 0
                     ? static_cast<double>(tp[c]) / (tp[c] + fn[c]) : 0.0;
    f1_sum += prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    ++f1_classes;
  }
  rep.macro_f1 = f1_classes > 0 ? f1_sum / f1_classes : 0.0;
  return rep;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.values = values;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= values.size();
  double acc = 0.0;
  for (double v : values) acc += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(acc / values.size());
  return s;
}

ProbeSummary probe_over_seeds(const Mat& Z, const std::vector<int>& labels,
                              ProbeConfig cfg, int n_seeds) {
  if (n_seeds < 1) throw ConfigError("need at least one probe seed");
  std::vector<double> micro, macro;
  const std::uint64_t base = cfg.seed;
  for (int i = 0; i < n_seeds; ++i) {
    cfg.seed = base + static_cast<std::uint64_t>(i);
    ProbeReport rep = linear_probe(Z, labels, cfg);
    micro.push_back(rep.micro_f1);
    macro.push_back(rep.macro_f1);
  }
  return {summarize(micro), summarize(macro)};
}

std::vector<int> hierarchical_cluster(const Mat& Z, int k) {
  const int n = static_cast<int>(Z.rows());
  if (k < 1 || k > n)
    throw ConfigError("cluster count must lie in [1, n]");

  Mat D = Mat::Constant(n, n, kInf);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      D(i, j) = D(j, i) = (Z.row(i) - Z.row(j)).norm();

  std::vector<bool> alive(n, true);
  std::vector<int> size(n, 1), lab(n);
  for (int i = 0; i < n; ++i) lab[i] = i;

  for (int clusters = n; clusters > k; --clusters) {
    int bi = -1, bj = -1;
    double best = kInf;
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (int j = i + 1; j < n; ++j)
        if (alive[j] && D(i, j) < best) {
          best = D(i, j);
          bi = i;
          bj = j;
        }
    }
    // Lance-Williams update for average linkage.
    for (int l = 0; l < n; ++l) {
      if (!alive[l] || l == bi || l == bj) continue;
      double merged =
          (size[bi] * D(bi, l) + size[bj] * D(bj, l)) / (size[bi] + size[bj]);
      D(bi, l) = D(l, bi) = merged;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    for (int v = 0; v < n; ++v)
      if (lab[v] == bj) lab[v] = bi;
  }

  // Ids ordered by each cluster's lowest member.
  std::vector<int> remap(n, -1), out(n);
  int next = 0;
  for (int v = 0; v < n; ++v) {
    if (remap[lab[v]] < 0) remap[lab[v]] = next++;
    out[v] = remap[lab[v]];
  }
  return out;
}

namespace {

// Minimum-cost perfect assignment on a square matrix (potentials method).
std::vector<int> hungarian_min(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) match[p[j] - 1] = j - 1;
  return match;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

ClusterReport clustering_metrics(const std::vector<int>& assignment,
                                 const std::vector<int>& labels) {
  if (assignment.size() != labels.size())
    throw ConfigError("assignment and label lengths differ");
  const int n = static_cast<int>(labels.size());
  if (n == 0) throw ConfigError("nothing to score");

  int ka = 0, kb = 0;
  std::vector<int> a = compact(assignment, &ka);
  std::vector<int> b = compact(labels, &kb);

  Mat counts = Mat::Zero(ka, kb);
  for (int i = 0; i < n; ++i) counts(a[i], b[i]) += 1.0;

  ClusterReport rep;
  rep.assignment = assignment;

  // ACC: optimal one-to-one relabeling on the (padded) confusion matrix.
  const int s = std::max(ka, kb);
  Mat cost = Mat::Zero(s, s);
  cost.topLeftCorner(ka, kb) = -counts;
  std::vector<int> match = hungarian_min(cost);
  double hit = 0.0;
  for (int i = 0; i < ka; ++i)
    if (match[i] < kb) hit += counts(i, match[i]);
  rep.acc = hit / n;

  // NMI with arithmetic-mean normalization.
  Vec ra = counts.rowwise().sum(), cb = counts.colwise().sum().transpose();
  double mi = 0.0, ha = 0.0, hb = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j)
      if (counts(i, j) > 0.0)
        mi += counts(i, j) / n *
              std::log(n * counts(i, j) / (ra(i) * cb(j)));
  for (int i = 0; i < ka; ++i)
    if (ra(i) > 0.0) ha -= ra(i) / n * std::log(ra(i) / n);
  for (int j = 0; j < kb; ++j)
    if (cb(j) > 0.0) hb -= cb(j) / n * std::log(cb(j) / n);
  if (ha == 0.0 && hb == 0.0)
    rep.nmi = 1.0;  // both sides a single cluster
  else
    rep.nmi = std::clamp(mi / ((ha + hb) / 2.0), 0.0, 1.0);

  // Adjusted Rand index.
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) sum_ij += comb2(counts(i, j));
  for (int i = 0; i < ka; ++i) sum_a += comb2(ra(i));
  for (int j = 0; j < kb; ++j) sum_b += comb2(cb(j));
  double expected = sum_a * sum_b / comb2(n);
  double maximum = (sum_a + sum_b) / 2.0;
  rep.ari = maximum == expected ? 1.0
                                : (sum_ij - expected) / (maximum - expected);
  return rep;
}

void export_embeddings(const Mat& Z, const std::vector<int>& ids,
                       const std::filesystem::path& path) {
  if (static_cast<int>(ids.size()) != Z.rows())
    throw ConfigError("id count does not match embedding rows");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embeddings '" + path.string() + "'");
  out << "id";
  for (int j = 0; j < Z.cols(); ++j) out << ",z" << j;
  out << "\n";
  for (int i = 0; i < Z.rows(); ++i) {
    out << ids[i];
    for (int j = 0; j < Z.cols(); ++j) out << "," << fmt_double(Z(i, j));
    out << "\n";
  }
}

Mat load_embeddings(const std::filesystem::path& path, std::vector<int>* ids) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line))
    throw DataError(path.string() + ": missing header");
  if (line.rfind("id", 0) != 0)
    throw DataError(path.string() + ": malformed header");
  int d = 0;  // columns after the id
  for (char c : line)
    if (c == ',') ++d;

  std::vector<std::vector<double>> rows;
  std::vector<int> row_ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          row_ids.push_back(std::stoi(cell));
          first = false;
        } else {
          row.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(row.size()) != d)
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected " + std::to_string(d) + " values");
    rows.push_back(std::move(row));
  }
  Mat Z(static_cast<int>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < d; ++j) Z(static_cast<int>(i), j) = rows[i][j];
  if (ids) *ids = std::move(row_ids);
  return Z;
}

}  // namespace hgot::eval
