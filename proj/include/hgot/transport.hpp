#pragma once

#include <vector>

#include "hgot/common.hpp"
#include "hgot/tape.hpp"

// Optimal-transport engine: cosine cost construction, entropic Sinkhorn
// plans (with a fixed-iteration differentiable mode), fused Gromov-
// Wasserstein plans via conditional gradient, and an exhaustive oracle
// for verification at tiny sizes.

namespace hgot::transport {

struct Marginals {
  Vec mu;  // length n, nonnegative, sums to 1
  Vec nu;  // length m

  static Marginals uniform(int n, int m);
  void validate() const;
};

struct SolverConfig {
  double epsilon = 0.05;       // entropic regularization on max-normalized cost
  int sinkhorn_max_iter = 100000;
  double sinkhorn_tol = 1e-7;  // marginal residual target
  int cg_max_iter = 20;
  double cg_tol = 1e-6;        // relative objective-decrease floor
  int unroll_iters = 30;       // fixed iteration count in differentiable mode

  void validate() const;
};

struct PlanMatrix {
  Mat pi;
  double row_residual = 0.0;  // max |pi.1 - mu|
  double col_residual = 0.0;  // max |pi'.1 - nu|
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool log_domain = false;

  double max_residual() const { return std::max(row_residual, col_residual); }
};

struct FgwProblem {
  Mat H_p;    // n x d node features of the branch view
  Mat H_agg;  // m x d node features of the central view
  Mat A_p;    // n x n binary adjacency
  Mat A_agg;  // m x m binary adjacency
  double sigma = 0.5;  // node/edge trade-off in [0, 1]
  Marginals marg;

  void validate() const;
};

struct FgwResult {
  PlanMatrix plan;
  double distance = 0.0;
  std::vector<double> objective_seq;  // initial value, then one per step taken
  int iterations = 0;                 // gradient evaluations performed
  double grad_seconds = 0.0;          // time inside structure-cost contractions
};

// Marginal feasibility bookkeeping across every non-differentiable solve.
// record() is called by the solvers; tests read the high-water mark.
struct FeasibilityStats {
  long long solves = 0;
  long long non_converged = 0;
  double max_residual = 0.0;

  void record(double residual, bool converged);
  void reset();
  static FeasibilityStats& instance();
};

// Entry ij = 1 - cos(x_i, y_j); zero-norm rows count as similarity 0;
// result clamped to [0, 2].
Mat feature_cost_matrix(const Mat& X, const Mat& Y);

// Contraction (E (x) pi)_ij = sum_kl |A_p[i,k] - A_agg[j,l]| pi[k,l] via the
// binary factorization |a-b| = a + b - 2ab, cost O(n m (n+m)).
Mat structure_cost_apply(const Mat& A_p, const Mat& A_agg, const Mat& pi);

// Log-domain potentials carried between solves of slowly changing costs
// (the conditional-gradient subproblems). Starting from the previous
// solution's potentials cuts the iteration count by orders of magnitude
// at small epsilon.
struct SinkhornState {
  Vec f, g;  // potentials against the max-normalized cost
  bool valid = false;
};

// Entropic OT. Non-differentiable mode iterates to sinkhorn_tol (scaling
// domain, automatic log-domain fallback on underflow) on the max-normalized
// cost. Differentiable mode reproduces sinkhorn_unrolled exactly: log
// domain, no normalization, exactly unroll_iters iterations.
PlanMatrix sinkhorn_plan(const Mat& cost, const Marginals& marg,
                         const SolverConfig& cfg, bool differentiable = false);

// Warm-started variant; `warm` is read when valid and rewritten with the
// final potentials. Cold behavior (invalid state) matches sinkhorn_plan.
PlanMatrix sinkhorn_plan(const Mat& cost, const Marginals& marg,
                         const SolverConfig& cfg, SinkhornState& warm);

// Exhaustive minimum over all n! permutation plans, uniform marginals.
// Refuses n > 8.
PlanMatrix exact_ot_oracle(const Mat& cost);

// Fused Gromov-Wasserstein via conditional gradient with exact quadratic
// line search. distance = sigma<F,pi> + (1-sigma)<E(x)pi, pi>.
FgwResult fgw_solve(const FgwProblem& prob, const SolverConfig& cfg);

// Cosine cost then Sinkhorn; returns <F, pi>.
double wasserstein_distance(const Mat& X, const Mat& Y, const Marginals& marg,
                            const SolverConfig& cfg);

// --- tape overlays ---------------------------------------------------------

// Differentiable cosine cost; same convention as feature_cost_matrix but
// without the clamp (values already land in [0, 2] up to roundoff).
ad::Var cosine_cost(ad::Var X, ad::Var Y);

// Fixed-unroll log-domain Sinkhorn on the tape; gradients flow to `cost`.
// The cost is used as-is (callers pass O(1) cosine costs).
ad::Var sinkhorn_unrolled(ad::Var cost, const Marginals& marg,
                          const SolverConfig& cfg);

}  // namespace hgot::transport
