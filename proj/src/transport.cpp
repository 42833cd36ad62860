#include "hgot/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace hgot::transport {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

bool is_binary(const Mat& a) {
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0 && a(i, j) != 1.0) return false;
  return true;
}

// logsumexp along rows with an empty-support guard; mirrors the tape op so
// the differentiable fixed-unroll modes agree bit for bit.
Vec lse_rows(const Mat& a) {
  Vec out(a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    double mx = a.row(i).maxCoeff();
    out(i) = (mx == -kInf)
                 ? -kInf
                 : mx + std::log((a.row(i).array() - mx).exp().sum());
  }
  return out;
}

Vec lse_cols(const Mat& a) {
  Vec out(a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    double mx = a.col(j).maxCoeff();
    out(j) = (mx == -kInf)
                 ? -kInf
                 : mx + std::log((a.col(j).array() - mx).exp().sum());
  }
  return out;
}

void marginal_residuals(const Mat& pi, const Marginals& m, double& row_res,
                        double& col_res) {
  row_res = (pi.rowwise().sum() - m.mu).cwiseAbs().maxCoeff();
  col_res = (pi.colwise().sum().transpose() - m.nu).cwiseAbs().maxCoeff();
}

}  // namespace

Marginals Marginals::uniform(int n, int m) {
  if (n < 1 || m < 1) throw ConfigError("marginals need at least one atom");
  Marginals out;
  out.mu = Vec::Constant(n, 1.0 / n);
  out.nu = Vec::Constant(m, 1.0 / m);
  return out;
}

void Marginals::validate() const {
  if (mu.size() < 1 || nu.size() < 1)
    throw DataError("marginals must be non-empty");
  if (mu.minCoeff() < 0.0 || nu.minCoeff() < 0.0)
    throw DataError("marginals must be nonnegative");
  if (std::abs(mu.sum() - 1.0) > 1e-12 || std::abs(nu.sum() - 1.0) > 1e-12)
    throw DataError("marginals must each sum to 1");
}

void SolverConfig::validate() const {
  if (epsilon <= 0.0) throw ConfigError("epsilon must be > 0");
  if (sinkhorn_max_iter < 1 || cg_max_iter < 1 || unroll_iters < 1)
    throw ConfigError("iteration counts must be >= 1");
  if (sinkhorn_tol <= 0.0 || cg_tol <= 0.0)
    throw ConfigError("tolerances must be > 0");
}

void FgwProblem::validate() const {
  if (sigma < 0.0 || sigma > 1.0) throw ConfigError("sigma must lie in [0, 1]");
  if (A_p.rows() != A_p.cols() || A_agg.rows() != A_agg.cols())
    throw DataError("adjacency matrices must be square");
  if (!is_binary(A_p) || !is_binary(A_agg))
    throw DataError("adjacency matrices must be binary");
  marg.validate();
  if (marg.mu.size() != A_p.rows() || marg.nu.size() != A_agg.rows())
    throw DataError("marginal lengths do not match adjacency sizes");
  if (sigma > 0.0) {
    if (H_p.rows() != A_p.rows() || H_agg.rows() != A_agg.rows())
      throw DataError("feature row counts do not match adjacency sizes");
    if (H_p.cols() != H_agg.cols())
      throw DataError("feature dimensionalities differ between views");
    if (!all_finite(H_p) || !all_finite(H_agg))
      throw DataError("non-finite feature matrix");
  }
}

void FeasibilityStats::record(double residual, bool converged) {
  ++solves;
  if (!converged) ++non_converged;
  max_residual = std::max(max_residual, residual);
}

void FeasibilityStats::reset() { *this = FeasibilityStats{}; }

FeasibilityStats& FeasibilityStats::instance() {
  static FeasibilityStats stats;
  return stats;
}

Mat feature_cost_matrix(const Mat& X, const Mat& Y) {
  if (X.cols() != Y.cols())
    throw DataError("feature_cost_matrix: column counts differ");
  if (!all_finite(X) || !all_finite(Y))
    throw DataError("feature_cost_matrix: non-finite input");
  Vec xn = X.rowwise().norm();
  Vec yn = Y.rowwise().norm();
  Mat C(X.rows(), Y.rows());
  for (int i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < Y.rows(); ++j) {
      double denom = xn(i) * yn(j);
      double cosine = denom > 0.0 ? X.row(i).dot(Y.row(j)) / denom : 0.0;
      C(i, j) = std::clamp(1.0 - cosine, 0.0, 2.0);
    }
  }
  return C;
}

Mat structure_cost_apply(const Mat& A_p, const Mat& A_agg, const Mat& pi) {
  if (A_p.rows() != A_p.cols() || A_agg.rows() != A_agg.cols())
    throw DataError("structure_cost_apply: adjacencies must be square");
  if (pi.rows() != A_p.rows() || pi.cols() != A_agg.rows())
    throw DataError("structure_cost_apply: plan shape mismatch");
  if (!is_binary(A_p) || !is_binary(A_agg))
    throw DataError("structure_cost_apply: adjacencies must be binary");
  Vec r = pi.rowwise().sum();
  Vec c = pi.colwise().sum().transpose();
  Vec ar = A_p * r;      // per-row mass seen through A_p
  Vec ac = A_agg * c;    // per-col mass seen through A_agg
  Mat out = ar.replicate(1, pi.cols());
  out.rowwise() += ac.transpose();
  out.noalias() -= 2.0 * (A_p * pi * A_agg.transpose());
  return out;
}

namespace {

// Fixed-iteration log-domain run on the raw (unnormalized) cost, mirroring
// sinkhorn_unrolled so both code paths emit identical numbers.
PlanMatrix sinkhorn_fixed_unroll(const Mat& cost, const Marginals& marg,
                                 const SolverConfig& cfg) {
  if (marg.mu.minCoeff() <= 0.0 || marg.nu.minCoeff() <= 0.0)
    throw DataError("differentiable sinkhorn requires strictly positive marginals");
  const double eps = cfg.epsilon;
  Mat M = cost * (-1.0 / eps);
  Vec logmu = marg.mu.array().log();
  Vec lognu = marg.nu.array().log();
  Vec f = Vec::Zero(cost.rows());
  Vec g = Vec::Zero(cost.cols());
  for (int it = 0; it < cfg.unroll_iters; ++it) {
    Mat t1 = M;
    t1.rowwise() += (g * (1.0 / eps)).transpose();
    f = eps * logmu - eps * lse_rows(t1);
    Mat t2 = M;
    t2.colwise() += f * (1.0 / eps);
    g = eps * lognu - eps * lse_cols(t2);
  }
  Mat t3 = M;
  t3.colwise() += f * (1.0 / eps);
  t3.rowwise() += (g * (1.0 / eps)).transpose();
  PlanMatrix out;
  out.pi = t3.array().exp().matrix();
  out.iterations = cfg.unroll_iters;
  out.log_domain = true;
  marginal_residuals(out.pi, marg, out.row_residual, out.col_residual);
  out.converged = out.max_residual() <= cfg.sinkhorn_tol;
  out.objective_value = cost.cwiseProduct(out.pi).sum();
  return out;
}

PlanMatrix sinkhorn_log_domain(const Mat& cost_norm, const Marginals& marg,
                               const SolverConfig& cfg, int iters_used,
                               Vec* f_io, Vec* g_io) {
  const double eps_target = cfg.epsilon;
  const int n = static_cast<int>(cost_norm.rows());
  const int m = static_cast<int>(cost_norm.cols());
  Vec logmu = marg.mu.array().log();  // -inf rows are fine: they carry no mass
  Vec lognu = marg.nu.array().log();
  const bool warm = f_io && f_io->size() == n && g_io && g_io->size() == m;
  Vec f = warm ? *f_io : Vec(Vec::Zero(n));
  Vec g = warm ? *g_io : Vec(Vec::Zero(m));

  Mat M;  // cost_norm * (-1 / eps) for the current stage
  auto update = [&](double eps) {
    Mat t1 = M;
    t1.rowwise() += (g / eps).transpose();
    f = eps * logmu - eps * lse_rows(t1);
    Mat t2 = M;
    t2.colwise() += f / eps;
    g = eps * lognu - eps * lse_cols(t2);
  };
  auto plan_at = [&](double eps) {
    Mat t3 = M;
    t3.colwise() += f / eps;
    t3.rowwise() += (g / eps).transpose();
    return Mat(t3.array().exp().matrix());
  };

  PlanMatrix out;
  out.log_domain = true;
  int total = iters_used;

  // Small regularization converges at rate 1 - exp(-slack/eps), which is
  // hopeless to run directly. Anneal from a mild eps and warm-start the
  // potentials at each halving; the final phase then polishes quickly.
  // Carried-in potentials replace the annealing ramp entirely.
  if (!warm) {
    const double stage_tol = std::max(100.0 * cfg.sinkhorn_tol, 1e-5);
    double eps = std::max(eps_target, 0.1);
    while (eps > eps_target * (1.0 + 1e-12)) {
      M = cost_norm * (-1.0 / eps);
      for (int it = 0; it < 300; ++it) {
        update(eps);
        ++total;
        Mat p = plan_at(eps);
        double rr, cr;
        marginal_residuals(p, marg, rr, cr);
        if (std::max(rr, cr) <= stage_tol) break;
      }
      eps = std::max(eps * 0.5, eps_target);
    }
  }

  M = cost_norm * (-1.0 / eps_target);
  for (int it = 0; it < cfg.sinkhorn_max_iter; ++it) {
    update(eps_target);
    out.pi = plan_at(eps_target);
    marginal_residuals(out.pi, marg, out.row_residual, out.col_residual);
    out.iterations = ++total;
    if (out.max_residual() <= cfg.sinkhorn_tol) {
      out.converged = true;
      break;
    }
  }
  if (f_io) *f_io = f;
  if (g_io) *g_io = g;
  return out;
}

double finite_max_abs(const Vec& v) {
  double mx = 0.0;
  for (int i = 0; i < v.size(); ++i)
    if (std::isfinite(v(i))) mx = std::max(mx, std::abs(v(i)));
  return mx;
}

PlanMatrix sinkhorn_converge(const Mat& cost, const Marginals& marg,
                             const SolverConfig& cfg, SinkhornState* warm) {
  const double eps = cfg.epsilon;
  double cmax = cost.cwiseAbs().maxCoeff();
  Mat cn = cmax > 0.0 ? Mat(cost / cmax) : Mat(Mat::Zero(cost.rows(), cost.cols()));
  const double ratio = cn.cwiseAbs().maxCoeff() / eps;

  PlanMatrix out;
  // Once kernel entries drop toward the denormal range the scaling products
  // carry no precision (and note vectorized exp saturates near DBL_MIN
  // instead of flushing to zero, so an exact-zero test is useless). Go
  // straight to the log domain in that regime.
  bool to_log = ratio > 500.0;

  const bool have_warm = warm && warm->valid &&
                         warm->f.size() == cost.rows() &&
                         warm->g.size() == cost.cols();
  Vec v = Vec::Ones(cost.cols());
  Vec u = Vec::Ones(cost.rows());
  Vec f0, g0;
  bool log_init = false;
  if (have_warm) {
    // Potentials whose scaling factors would overflow exp stay in the log
    // domain; anything milder seeds the scaling iteration directly.
    double mag = std::max(finite_max_abs(warm->f), finite_max_abs(warm->g)) /
                 eps;
    if (to_log || mag > 500.0) {
      f0 = warm->f;
      g0 = warm->g;
      log_init = true;
      to_log = true;
    } else {
      u = (warm->f / eps).array().exp();
      v = (warm->g / eps).array().exp();
    }
  }

  int total_it = 0;
  bool underflow = false;  // scaling products lost precision, log domain required
  bool frozen = false;     // residual stopped moving inside the last block

  // One block of scaling iterations at eps_s starting from the current
  // (u, v). Returns once the residual clears tol_s or the cap runs out;
  // flags `underflow` on non-finite factors and `frozen` when the residual
  // stops moving.
  auto run_scaling = [&](double eps_s, double tol_s, int cap) {
    frozen = false;
    Mat K = (cn * (-1.0 / eps_s)).array().exp().matrix();
    double checkpoint_res = kInf;
    for (int it = 0; it < cap; ++it) {
      Vec kv = K * v;
      u = marg.mu.cwiseQuotient(kv);
      Vec ktu = K.transpose() * u;
      v = marg.nu.cwiseQuotient(ktu);
      ++total_it;
      if (!u.allFinite() || !v.allFinite() || (K * v).minCoeff() == 0.0) {
        underflow = true;
        return false;
      }
      out.pi = u.asDiagonal() * K * v.asDiagonal();
      marginal_residuals(out.pi, marg, out.row_residual, out.col_residual);
      out.iterations = total_it;
      if (out.max_residual() <= tol_s) return true;
      // A residual frozen over a long window means this block is going
      // nowhere; slow-but-steady decay must stay, since one iteration here
      // costs ~30x less than a log-domain step.
      if (it % 200 == 199) {
        if (out.max_residual() > 0.999 * checkpoint_res) {
          frozen = true;
          return false;
        }
        checkpoint_res = out.max_residual();
      }
    }
    return false;
  };

  bool solved = false;
  if (!to_log) {
    // Plain iteration converges slower the sharper the regularization;
    // past this point epsilon-continuation pays for itself.
    const bool sharp = ratio > 30.0;
    if (have_warm && !log_init) {
      // Carried-in potentials get a bounded first shot: near-stationary
      // costs (late conditional-gradient iterations) finish in a handful
      // of updates, but a misfit warm basin at sharp epsilon converges
      // slower than annealing from scratch, so do not chase it.
      solved = run_scaling(
          eps, cfg.sinkhorn_tol,
          sharp ? std::min(cfg.sinkhorn_max_iter, 3000) : cfg.sinkhorn_max_iter);
    }
    if (!solved && !underflow && sharp) {
      u.setOnes();
      v.setOnes();
      const double stage_tol = std::max(100.0 * cfg.sinkhorn_tol, 1e-5);
      double eps_s = std::max(eps, 0.1);
      while (eps_s > eps * (1.0 + 1e-12) && !underflow) {
        // A frozen stage is not fatal; the next, sharper stage reshapes
        // the fixed point anyway.
        run_scaling(eps_s, stage_tol, 300);
        if (underflow) break;
        // Re-express the scaling factors at the next stage's epsilon.
        Vec f = eps_s * u.array().log();
        Vec g = eps_s * v.array().log();
        eps_s = std::max(eps_s * 0.5, eps);
        u = (f / eps_s).array().exp();
        v = (g / eps_s).array().exp();
        if (!u.allFinite() || !v.allFinite()) {
          underflow = true;
          f0 = std::move(f);
          g0 = std::move(g);
          log_init = true;
        }
      }
      if (!underflow)
        solved = run_scaling(eps, cfg.sinkhorn_tol, cfg.sinkhorn_max_iter);
    } else if (!solved && !underflow && !sharp && !have_warm) {
      solved = run_scaling(eps, cfg.sinkhorn_tol, cfg.sinkhorn_max_iter);
    }
    out.converged = solved;
  }

  // The log domain is the backstop: it is immune to the precision effects
  // that throttle late scaling iterations, at ~30x the per-iteration cost.
  if (to_log || !solved || out.pi.size() == 0) {
    Vec f, g;
    if (log_init) {
      f = f0;
      g = g0;
    } else if (total_it > 0 && u.allFinite() && v.allFinite() &&
               u.minCoeff() > 0.0 && v.minCoeff() > 0.0) {
      // Whatever progress the scaling phase made rides along as potentials
      // so the log solver polishes instead of restarting the anneal.
      f = eps * u.array().log();
      g = eps * v.array().log();
    }
    out = sinkhorn_log_domain(cn, marg, cfg, total_it, &f, &g);
    if (warm) {
      warm->f = std::move(f);
      warm->g = std::move(g);
      warm->valid = true;
    }
  } else if (warm) {
    warm->f = eps * u.array().log();
    warm->g = eps * v.array().log();
    warm->valid = true;
  }

#ifdef HGOT_TRACE_SINKHORN
  std::fprintf(stderr,
               "[sk] n=%ldx%ld eps=%g ratio=%.3g warm=%d to_log=%d uf=%d fr=%d "
               "iters=%d conv=%d res=%.3g log=%d\n",
               (long)cost.rows(), (long)cost.cols(), eps, ratio, (int)have_warm,
               (int)to_log, (int)underflow, (int)frozen, out.iterations,
               (int)out.converged, out.max_residual(), (int)out.log_domain);
#endif
  out.objective_value = cost.cwiseProduct(out.pi).sum();
  FeasibilityStats::instance().record(out.max_residual(), out.converged);
  return out;
}

}  // namespace

PlanMatrix sinkhorn_plan(const Mat& cost, const Marginals& marg,
                         const SolverConfig& cfg, bool differentiable) {
  cfg.validate();
  marg.validate();
  if (cost.rows() != marg.mu.size() || cost.cols() != marg.nu.size())
    throw DataError("sinkhorn_plan: cost shape does not match marginals");
  if (!all_finite(cost)) throw DataError("sinkhorn_plan: non-finite cost");

  if (differentiable) return sinkhorn_fixed_unroll(cost, marg, cfg);
  return sinkhorn_converge(cost, marg, cfg, nullptr);
}

PlanMatrix sinkhorn_plan(const Mat& cost, const Marginals& marg,
                         const SolverConfig& cfg, SinkhornState& warm) {
  cfg.validate();
  marg.validate();
  if (cost.rows() != marg.mu.size() || cost.cols() != marg.nu.size())
    throw DataError("sinkhorn_plan: cost shape does not match marginals");
  if (!all_finite(cost)) throw DataError("sinkhorn_plan: non-finite cost");
  return sinkhorn_converge(cost, marg, cfg, &warm);
}

PlanMatrix exact_ot_oracle(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  if (n != cost.cols()) throw ConfigError("exact_ot_oracle: cost must be square");
  if (n < 1 || n > 8)
    throw ConfigError("exact_ot_oracle: refusing n outside [1, 8]");
  if (!all_finite(cost)) throw DataError("exact_ot_oracle: non-finite cost");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = kInf;
  int evaluated = 0;
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += cost(i, perm[i]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
    ++evaluated;
  } while (std::next_permutation(perm.begin(), perm.end()));

  PlanMatrix out;
  out.pi = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) out.pi(i, best[i]) = 1.0 / n;
  out.objective_value = best_cost / n;
  out.iterations = evaluated;
  out.converged = true;
  FeasibilityStats::instance().record(0.0, true);
  return out;
}

namespace {

double fgw_objective(const Mat& F, const FgwProblem& p, const Mat& pi,
                     double& grad_seconds) {
  double val = 0.0;
  if (p.sigma > 0.0) val += p.sigma * F.cwiseProduct(pi).sum();
  if (p.sigma < 1.0) {
    double t0 = now_seconds();
    Mat epi = structure_cost_apply(p.A_p, p.A_agg, pi);
    grad_seconds += now_seconds() - t0;
    val += (1.0 - p.sigma) * epi.cwiseProduct(pi).sum();
  }
  return val;
}

}  // namespace

FgwResult fgw_solve(const FgwProblem& prob, const SolverConfig& cfg) {
  cfg.validate();
  prob.validate();
  const int n = static_cast<int>(prob.A_p.rows());
  const int m = static_cast<int>(prob.A_agg.rows());
  const double sigma = prob.sigma;

  Mat F = sigma > 0.0 ? feature_cost_matrix(prob.H_p, prob.H_agg)
                      : Mat(Mat::Zero(n, m));
  SolverConfig sub_cfg = cfg;
  sub_cfg.epsilon = cfg.epsilon / 10.0;  // sharper plans for the subproblem
  // Near-degenerate gradient costs can leave Sinkhorn crawling just above
  // a very tight tolerance; 5e-7 still clears the 1e-6 feasibility budget.
  sub_cfg.sinkhorn_tol = std::max(cfg.sinkhorn_tol, 5e-7);

  FgwResult res;
  Mat pi = prob.marg.mu * prob.marg.nu.transpose();
  double obj = fgw_objective(F, prob, pi, res.grad_seconds);
  res.objective_seq.push_back(obj);
  bool converged = false;

  // Consecutive linearizations barely move, so each subproblem reuses the
  // previous potentials instead of paying the cold-start annealing ramp.
  SinkhornState sub_state;
  for (int t = 0; t < cfg.cg_max_iter; ++t) {
    ++res.iterations;
    Mat epi;
    Mat grad = sigma * F;
    if (sigma < 1.0) {
      double t0 = now_seconds();
      epi = structure_cost_apply(prob.A_p, prob.A_agg, pi);
      res.grad_seconds += now_seconds() - t0;
      grad += 2.0 * (1.0 - sigma) * epi;
    }

    PlanMatrix sub = sinkhorn_plan(grad, prob.marg, sub_cfg, sub_state);
    Mat d = sub.pi - pi;

    double a = 0.0, b = sigma * F.cwiseProduct(d).sum();
    if (sigma < 1.0) {
      double t0 = now_seconds();
      Mat ed = structure_cost_apply(prob.A_p, prob.A_agg, d);
      res.grad_seconds += now_seconds() - t0;
      a = (1.0 - sigma) * ed.cwiseProduct(d).sum();
      b = sigma * F.cwiseProduct(d).sum() +
          (1.0 - sigma) * (epi.cwiseProduct(d).sum() + ed.cwiseProduct(pi).sum());
    }

    double gamma;
    if (a > 0.0)
      gamma = std::clamp(-b / (2.0 * a), 0.0, 1.0);
    else
      gamma = (a + b < 0.0) ? 1.0 : 0.0;
    if (gamma == 0.0) {
      converged = true;
      break;
    }

    Mat pi_new = pi + gamma * d;
    double obj_new = fgw_objective(F, prob, pi_new, res.grad_seconds);
    if (obj_new > obj + 1e-12) {
      // Exact line search predicted a decrease; fall back to the safe
      // diminishing step and re-evaluate.
      gamma = 2.0 / (t + 2.0);
      pi_new = pi + gamma * d;
      obj_new = fgw_objective(F, prob, pi_new, res.grad_seconds);
      if (obj_new > obj + 1e-12) {
        // Still uphill: reject the step and stop rather than break
        // monotonicity of the recorded sequence.
        res.objective_seq.push_back(obj);
        converged = true;
        break;
      }
    }

    double rel = (obj - obj_new) / std::max(1.0, std::abs(obj));
    pi = std::move(pi_new);
    obj = obj_new;
    res.objective_seq.push_back(obj);
    if (rel < cfg.cg_tol) {
      converged = true;
      break;
    }
  }

  res.distance = obj;
  res.plan.pi = std::move(pi);
  marginal_residuals(res.plan.pi, prob.marg, res.plan.row_residual,
                     res.plan.col_residual);
  res.plan.objective_value = obj;
  res.plan.iterations = res.iterations;
  res.plan.converged = converged;
  FeasibilityStats::instance().record(res.plan.max_residual(), true);
  return res;
}

double wasserstein_distance(const Mat& X, const Mat& Y, const Marginals& marg,
                            const SolverConfig& cfg) {
  Mat F = feature_cost_matrix(X, Y);
  return sinkhorn_plan(F, marg, cfg).objective_value;
}

// --- tape overlays ---------------------------------------------------------

ad::Var cosine_cost(ad::Var X, ad::Var Y) {
  using namespace ad;
  Tape* t = X.tape;
  const Mat& xv = t->value(X);
  const Mat& yv = t->value(Y);
  if (xv.cols() != yv.cols())
    throw DataError("cosine_cost: column counts differ");
  Var S = matmul(rows_normalize(X), transpose(rows_normalize(Y)));
  Var ones = t->constant(Mat::Ones(xv.rows(), yv.rows()));
  return sub(ones, S);
}

ad::Var sinkhorn_unrolled(ad::Var cost, const Marginals& marg,
                          const SolverConfig& cfg) {
  using namespace ad;
  cfg.validate();
  marg.validate();
  if (marg.mu.minCoeff() <= 0.0 || marg.nu.minCoeff() <= 0.0)
    throw DataError("sinkhorn_unrolled requires strictly positive marginals");
  Tape* t = cost.tape;
  const Mat& C = t->value(cost);
  if (C.rows() != marg.mu.size() || C.cols() != marg.nu.size())
    throw DataError("sinkhorn_unrolled: cost shape does not match marginals");
  const double eps = cfg.epsilon;

  Var M = scale(cost, -1.0 / eps);
  Var flog = t->constant(eps * marg.mu.array().log().matrix());        // n x 1
  Var glog = t->constant((eps * marg.nu.array().log()).transpose().matrix());
  Var f = t->constant(Mat::Zero(C.rows(), 1));
  Var g = t->constant(Mat::Zero(1, C.cols()));
  for (int it = 0; it < cfg.unroll_iters; ++it) {
    Var t1 = add_rowvec(M, scale(g, 1.0 / eps));
    f = sub(flog, scale(logsumexp_rows(t1), eps));
    Var t2 = add_colvec(M, scale(f, 1.0 / eps));
    g = sub(glog, scale(logsumexp_cols(t2), eps));
  }
  Var t3 = add_rowvec(add_colvec(M, scale(f, 1.0 / eps)), scale(g, 1.0 / eps));
  return exp_elem(t3);
}

}  // namespace hgot::transport
