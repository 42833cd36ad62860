#include "hgot/objective.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace hgot::objective {

using namespace hgot::ad;
using transport::Marginals;

std::string mode_name(AblationMode m) {
  switch (m) {
    case AblationMode::full: return "full";
    case AblationMode::no_agg: return "no_agg";
    case AblationMode::no_str: return "no_str";
    case AblationMode::distance_only: return "distance_only";
    case AblationMode::contrastive: return "contrastive";
  }
  throw ConfigError("unknown ablation mode");
}

AblationMode mode_from_name(const std::string& s) {
  if (s == "full") return AblationMode::full;
  if (s == "no_agg") return AblationMode::no_agg;
  if (s == "no_str") return AblationMode::no_str;
  if (s == "distance_only") return AblationMode::distance_only;
  if (s == "contrastive") return AblationMode::contrastive;
  throw ConfigError("unknown ablation mode '" + s + "'");
}

void LossWeights::validate() const {
  if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
  if (!(sigma >= 0.0 && sigma <= 1.0))
    throw ConfigError("sigma must lie in [0, 1]");
}

void ContrastiveConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("moment coefficients must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("optimizer eps must be > 0");
  weights.validate();
  contrastive.validate();
  solver.validate();
  encoder.validate();
}

// --- loss primitives -------------------------------------------------------

double matching_loss(const Mat& plan_graph, const Mat& plan_repr) {
  if (plan_graph.rows() != plan_repr.rows() ||
      plan_graph.cols() != plan_repr.cols())
    throw ConfigError("matching loss needs plans of equal shape");
  return (plan_graph - plan_repr).norm();
}

double structure_loss(const Mat& F, const Mat& E_pi, double sigma,
                      const Mat& R) {
  if (!(sigma >= 0.0 && sigma <= 1.0))
    throw ConfigError("sigma must lie in [0, 1]");
  Mat composite;
  if (sigma == 1.0) {
    composite = F;
  } else if (sigma == 0.0) {
    composite = E_pi;
  } else {
    if (F.rows() != E_pi.rows() || F.cols() != E_pi.cols())
      throw ConfigError("structure loss needs matching cost shapes");
    composite = sigma * F + (1.0 - sigma) * E_pi;
  }
  if (composite.rows() != R.rows() || composite.cols() != R.cols())
    throw ConfigError("structure loss needs matching cost shapes");
  return (composite - R).norm();
}

double distance_only_loss(double d_graph, double d_repr) {
  return std::abs(d_graph - d_repr);
}

ad::Var contrastive_loss(ad::Var Z1, ad::Var Z2, const ContrastiveConfig& cfg) {
  cfg.validate();
  Tape& t = *Z1.tape;
  const Mat& a = t.value(Z1);
  const Mat& b = t.value(Z2);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError("contrastive loss needs views of equal shape");
  if (a.rows() < 1) throw ConfigError("contrastive loss needs at least one row");
  const int n = static_cast<int>(a.rows());
  Var lhs = cfg.cosine ? rows_normalize(Z1) : Z1;
  Var rhs = cfg.cosine ? rows_normalize(Z2) : Z2;
  Var sim = scale(matmul(lhs, transpose(rhs)), 1.0 / cfg.tau);
  Var per_row = sub(logsumexp_rows(sim), diag_vec(sim));  // n x 1, each >= 0
  return scale(sum_all(per_row), 1.0 / n);
}

double contrastive_loss(const Mat& Z1, const Mat& Z2,
                        const ContrastiveConfig& cfg) {
  Tape t;
  return t.value(contrastive_loss(t.constant(Z1), t.constant(Z2), cfg))(0, 0);
}

// --- graph-space side ------------------------------------------------------

GraphSide build_graph_side(const Mat& H,
                           const std::vector<MetaPathView>& views,
                           const Mat& A_agg, const TrainConfig& cfg) {
  if (views.empty()) throw ConfigError("no meta-path views");
  const int n = static_cast<int>(H.rows());
  for (const auto& v : views)
    if (v.n != n)
      throw ConfigError("view '" + v.metapath.name +
                        "' disagrees with the projection on node count");

  GraphSide gs;
  if (cfg.mode == AblationMode::contrastive) {
    // No transport in this mode; terms only carry the pairing.
    for (std::size_t p = 0; p < views.size(); ++p) {
      GraphSide::Term t;
      t.label = views[p].metapath.name;
      t.src_view = static_cast<int>(p);
      gs.terms.push_back(std::move(t));
    }
    return gs;
  }

  const double sigma = cfg.weights.sigma;
  const bool want_composite = cfg.mode != AblationMode::distance_only;
  Mat F;
  if (want_composite && sigma > 0.0) F = transport::feature_cost_matrix(H, H);

  auto solve_term = [&](std::string label, int src, int dst, const Mat& A_src,
                        const Mat& A_dst) {
    transport::FgwProblem prob;
    prob.H_p = H;
    prob.H_agg = H;
    prob.A_p = A_src;
    prob.A_agg = A_dst;
    prob.sigma = sigma;
    prob.marg = Marginals::uniform(n, n);
    transport::FgwResult r = transport::fgw_solve(prob, cfg.solver);

    GraphSide::Term t;
    t.label = std::move(label);
    t.src_view = src;
    t.dst_view = dst;
    t.plan = r.plan.pi;
    t.distance = r.distance;
    t.diag = {r.plan.iterations, r.plan.max_residual(), r.plan.converged};
    if (want_composite) {
      if (sigma == 1.0) {
        t.composite = F;
      } else {
        Mat epi = transport::structure_cost_apply(A_src, A_dst, t.plan);
        t.composite = sigma > 0.0 ? Mat(sigma * F + (1.0 - sigma) * epi)
                                  : std::move(epi);
      }
    }
    gs.terms.push_back(std::move(t));
  };

  if (cfg.mode == AblationMode::no_agg) {
    if (views.size() < 2)
      throw ConfigError("pairwise mode needs at least two meta-path views");
    for (std::size_t p = 0; p < views.size(); ++p)
      for (std::size_t q = p + 1; q < views.size(); ++q)
        solve_term(views[p].metapath.name + "|" + views[q].metapath.name,
                   static_cast<int>(p), static_cast<int>(q),
                   views[p].adjacency, views[q].adjacency);
  } else {
    if (A_agg.rows() != n || A_agg.cols() != n)
      throw ConfigError("aggregated adjacency does not match node count");
    for (std::size_t p = 0; p < views.size(); ++p)
      solve_term(views[p].metapath.name, static_cast<int>(p), -1,
                 views[p].adjacency, A_agg);
  }
  return gs;
}

// --- differentiable objective ---------------------------------------------

namespace {

double plan_residual(const Mat& pi, const Marginals& marg) {
  double row = (pi.rowwise().sum() - marg.mu).cwiseAbs().maxCoeff();
  double col = (pi.colwise().sum().transpose() - marg.nu).cwiseAbs().maxCoeff();
  return std::max(row, col);
}

}  // namespace

LossGraph build_loss(encoder::EncoderRun& run, const GraphSide& gs,
                     const TrainConfig& cfg) {
  const encoder::ForwardResult& fr = run.result();
  Tape& t = run.tape();
  if (gs.terms.empty()) throw ConfigError("no loss terms");

  LossGraph out;
  std::vector<Var> term_vars;
  for (const auto& term : gs.terms) {
    if (term.src_view < 0 ||
        term.src_view >= static_cast<int>(fr.views.size()) ||
        term.dst_view >= static_cast<int>(fr.views.size()))
      throw ConfigError("loss term references a missing view");
    Var z_src = fr.views[term.src_view].Z;
    Var z_dst = term.dst_view < 0 ? fr.fused.Z_agg : fr.views[term.dst_view].Z;

    TermLoss tl;
    tl.label = term.label;
    tl.graph_plan = term.diag;

    if (cfg.mode == AblationMode::contrastive) {
      Var l = contrastive_loss(z_src, z_dst, cfg.contrastive);
      tl.l_mat = t.value(l)(0, 0);
      term_vars.push_back(l);
      out.breakdown.terms.push_back(std::move(tl));
      continue;
    }

    Var R = transport::cosine_cost(z_src, z_dst);
    Marginals marg = Marginals::uniform(
        static_cast<int>(t.value(z_src).rows()),
        static_cast<int>(t.value(z_dst).rows()));
    Var pi_z = transport::sinkhorn_unrolled(R, marg, cfg.solver);
    tl.repr_plan = {cfg.solver.unroll_iters, plan_residual(t.value(pi_z), marg),
                    true};

    Var term_var;
    if (cfg.mode == AblationMode::distance_only) {
      Var d_n = inner(R, pi_z);
      Var gap = sub(d_n, t.constant(Mat::Constant(1, 1, term.distance)));
      term_var = abs_scalar(gap);
      tl.l_mat = t.value(term_var)(0, 0);
    } else {
      Var l_mat = frobenius_norm(sub(pi_z, t.constant(term.plan)));
      tl.l_mat = t.value(l_mat)(0, 0);
      if (cfg.mode == AblationMode::no_str) {
        // Reported but kept out of the total and off the tape.
        tl.l_str = (term.composite - t.value(R)).norm();
        term_var = l_mat;
      } else {
        Var l_str = frobenius_norm(sub(t.constant(term.composite), R));
        tl.l_str = t.value(l_str)(0, 0);
        term_var = add(l_mat, scale(l_str, cfg.weights.rho));
      }
    }
    term_vars.push_back(term_var);
    out.breakdown.terms.push_back(std::move(tl));
  }

  Var acc = term_vars[0];
  for (std::size_t i = 1; i < term_vars.size(); ++i)
    acc = add(acc, term_vars[i]);
  out.total = scale(acc, 1.0 / static_cast<double>(term_vars.size()));
  out.breakdown.total = t.value(out.total)(0, 0);
  return out;
}

double loss_value(const encoder::EncoderParams& params, const HeteroGraph& g,
                  const std::vector<MetaPathView>& views, const GraphSide& gs,
                  const TrainConfig& cfg) {
  encoder::EncoderRun run;
  run.forward(cfg.encoder, params, g, views, false);
  return build_loss(run, gs, cfg).breakdown.total;
}

// --- optimizer -------------------------------------------------------------

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(encoder::EncoderParams& params,
                const std::vector<std::pair<std::string, Mat>>& grads) {
  auto& entries = params.entries();
  if (grads.size() != entries.size())
    throw StateError("gradient list does not align with parameters");
  if (m_.empty()) {
    m_.reserve(grads.size());
    v_.reserve(grads.size());
    for (const auto& [name, g] : grads) {
      m_.push_back(Mat::Zero(g.rows(), g.cols()));
      v_.push_back(Mat::Zero(g.rows(), g.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, t_);
  const double c2 = 1.0 - std::pow(b2_, t_);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].first != entries[i].first)
      throw StateError("gradient list does not align with parameters");
    const Mat& g = grads[i].second;
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
    Mat mhat = m_[i] / c1;
    Mat vhat = v_[i] / c2;
    entries[i].second.array() -=
        lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

// --- training loop ---------------------------------------------------------

LossBreakdown train_step(encoder::EncoderRun& run, Adam& opt,
                         encoder::EncoderParams& params, const HeteroGraph& g,
                         const std::vector<MetaPathView>& views,
                         const Mat& A_agg, const TrainConfig& cfg) {
  const encoder::ForwardResult& fr =
      run.forward(cfg.encoder, params, g, views, true);
  GraphSide gs = build_graph_side(run.tape().value(fr.H), views, A_agg, cfg);
  LossGraph lg = build_loss(run, gs, cfg);
  if (!std::isfinite(lg.breakdown.total)) {
    std::string dump = "non-finite training loss;";
    for (const auto& term : lg.breakdown.terms)
      dump += " " + term.label + ": l_mat=" + std::to_string(term.l_mat) +
              " l_str=" + std::to_string(term.l_str);
    throw NumericalError(dump);
  }
  auto grads = run.backward(lg.total);
  opt.step(params, grads);
  return std::move(lg.breakdown);
}

TrainResult train(const HeteroGraph& g, const std::vector<MetaPath>& metapaths,
                  const TrainConfig& cfg) {
  cfg.validate();
  g.validate();
  if (metapaths.empty()) throw ConfigError("no meta-paths configured");

  std::vector<MetaPathView> views;
  for (const auto& p : metapaths)
    views.push_back(hetgraph::build_metapath_view(g, p));
  Mat A_agg = hetgraph::aggregate_adjacency(views).adjacency;

  TrainResult res;
  encoder::EncoderParams params =
      encoder::EncoderParams::init(cfg.encoder, g, metapaths, cfg.seed);
  res.params = params;

  Adam opt(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  encoder::EncoderRun run;
  double best = std::numeric_limits<double>::infinity();
  int streak = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    encoder::EncoderParams before = params;  // the step's loss is theirs
    LossBreakdown bd = train_step(run, opt, params, g, views, A_agg, cfg);
    res.history.push_back(std::move(bd));
    if (res.history.back().total < best) {
      best = res.history.back().total;
      res.params = std::move(before);
      res.best_epoch = epoch;
      streak = 0;
    } else if (++streak >= cfg.patience) {
      break;
    }
  }
  res.embeddings =
      encoder::forward_values(cfg.encoder, res.params, g, views).Z_agg;
  return res;
}

// --- loss history ----------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string loss_history_csv(const std::vector<LossBreakdown>& history) {
  std::string out =
      "epoch,term,l_mat,l_str,graph_iterations,repr_iterations,total\n";
  for (std::size_t e = 0; e < history.size(); ++e)
    for (const auto& term : history[e].terms) {
      out += std::to_string(e) + "," + term.label + "," +
             fmt_double(term.l_mat) + "," + fmt_double(term.l_str) + "," +
             std::to_string(term.graph_plan.iterations) + "," +
             std::to_string(term.repr_plan.iterations) + "," +
             fmt_double(history[e].total) + "\n";
    }
  return out;
}

void write_loss_csv(const std::vector<LossBreakdown>& history,
                    const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write loss history '" + file.string() + "'");
  out << loss_history_csv(history);
}

}  // namespace hgot::objective
