#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "hgot/cli.hpp"
#include "hgot/transport.hpp"

// Python surface: the solvers and evaluation metrics as array-in /
// dict-out functions, plus the CLI pipelines for whole-run scripting.

namespace py = pybind11;
using namespace hgot;

namespace {

transport::Marginals make_marginals(const Mat& cost,
                                    const std::optional<Vec>& mu,
                                    const std::optional<Vec>& nu) {
  if (mu.has_value() != nu.has_value())
    throw ConfigError("pass both marginals or neither");
  if (!mu) {
    return transport::Marginals::uniform(static_cast<int>(cost.rows()),
                                         static_cast<int>(cost.cols()));
  }
  transport::Marginals m;
  m.mu = *mu;
  m.nu = *nu;
  m.validate();
  return m;
}

py::dict plan_dict(const transport::PlanMatrix& p) {
  py::dict d;
  d["plan"] = p.pi;
  d["objective"] = p.objective_value;
  d["iterations"] = p.iterations;
  d["converged"] = p.converged;
  d["residual"] = p.max_residual();
  return d;
}

py::dict summary_dict(const eval::MetricSummary& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["std"] = s.stddev;
  d["values"] = s.values;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Heterogeneous-graph embeddings aligned with optimal transport: "
      "entropic and fused Gromov-Wasserstein solvers, embedding probes, "
      "and the training pipelines behind the hgot command line tool.";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericalError>(m, "NumericalError");

  // --- solvers -------------------------------------------------------------

  m.def(
      "sinkhorn",
      [](const Mat& cost, const std::optional<Vec>& mu,
         const std::optional<Vec>& nu, double epsilon, double tol,
         int max_iter) {
        transport::SolverConfig cfg;
        cfg.epsilon = epsilon;
        cfg.sinkhorn_tol = tol;
        cfg.sinkhorn_max_iter = max_iter;
        return plan_dict(
            transport::sinkhorn_plan(cost, make_marginals(cost, mu, nu), cfg));
      },
      py::arg("cost"), py::arg("mu") = std::nullopt,
      py::arg("nu") = std::nullopt, py::arg("epsilon") = 0.05,
      py::arg("tol") = 1e-7, py::arg("max_iter") = 100000,
      "Entropic optimal transport plan; marginals default to uniform.");

  m.def(
      "exact_ot",
      [](const Mat& cost) { return plan_dict(transport::exact_ot_oracle(cost)); },
      py::arg("cost"),
      "Exhaustive unregularized oracle (uniform marginals, tiny sizes only).");

  m.def(
      "fgw",
      [](const Mat& H_src, const Mat& H_dst, const Mat& A_src,
         const Mat& A_dst, double sigma, double epsilon, int cg_max_iter,
         double cg_tol) {
        transport::FgwProblem prob;
        prob.H_p = H_src;
        prob.H_agg = H_dst;
        prob.A_p = A_src;
        prob.A_agg = A_dst;
        prob.sigma = sigma;
        prob.marg = transport::Marginals::uniform(
            static_cast<int>(H_src.rows()), static_cast<int>(H_dst.rows()));
        transport::SolverConfig cfg;
        cfg.epsilon = epsilon;
        cfg.cg_max_iter = cg_max_iter;
        cfg.cg_tol = cg_tol;
        transport::FgwResult r = transport::fgw_solve(prob, cfg);
        py::dict d = plan_dict(r.plan);
        d["distance"] = r.distance;
        d["cg_iterations"] = r.iterations;
        d["objectives"] = r.objective_seq;
        return d;
      },
      py::arg("features_src"), py::arg("features_dst"), py::arg("adj_src"),
      py::arg("adj_dst"), py::arg("sigma") = 0.5, py::arg("epsilon") = 0.05,
      py::arg("cg_max_iter") = 20, py::arg("cg_tol") = 1e-6,
      "Fused Gromov-Wasserstein plan via conditional gradient.");

  // --- evaluation ----------------------------------------------------------

  m.def(
      "linear_probe",
      [](const Mat& Z, const std::vector<int>& labels, double train_fraction,
         double l2_penalty, int epochs, double learning_rate,
         std::uint64_t seed) {
        eval::ProbeConfig cfg;
        cfg.train_fraction = train_fraction;
        cfg.l2_penalty = l2_penalty;
        cfg.probe_epochs = epochs;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        eval::ProbeReport r = eval::linear_probe(Z, labels, cfg);
        py::dict d;
        d["micro_f1"] = r.micro_f1;
        d["macro_f1"] = r.macro_f1;
        return d;
      },
      py::arg("embeddings"), py::arg("labels"),
      py::arg("train_fraction") = 0.8, py::arg("l2_penalty") = 1e-3,
      py::arg("epochs") = 300, py::arg("learning_rate") = 0.5,
      py::arg("seed") = 1,
      "Stratified-split logistic probe on row-normalized embeddings.");

  m.def(
      "probe_over_seeds",
      [](const Mat& Z, const std::vector<int>& labels, int n_seeds,
         double train_fraction, std::uint64_t seed) {
        eval::ProbeConfig cfg;
        cfg.train_fraction = train_fraction;
        cfg.seed = seed;
        eval::ProbeSummary s = eval::probe_over_seeds(Z, labels, cfg, n_seeds);
        py::dict d;
        d["micro_f1"] = summary_dict(s.micro);
        d["macro_f1"] = summary_dict(s.macro);
        return d;
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("n_seeds") = 10,
      py::arg("train_fraction") = 0.8, py::arg("seed") = 1,
      "Probe averaged over consecutive split seeds.");

  m.def("hierarchical_cluster", &eval::hierarchical_cluster,
        py::arg("embeddings"), py::arg("k"),
        "Average-linkage agglomerative clustering cut at k clusters.");

  m.def(
      "clustering_metrics",
      [](const std::vector<int>& assignment, const std::vector<int>& labels) {
        eval::ClusterReport r = eval::clustering_metrics(assignment, labels);
        py::dict d;
        d["acc"] = r.acc;
        d["nmi"] = r.nmi;
        d["ari"] = r.ari;
        return d;
      },
      py::arg("assignment"), py::arg("labels"),
      "Matching accuracy, NMI and adjusted Rand index against labels.");

  // --- pipelines -----------------------------------------------------------

  m.def(
      "generate_dataset",
      [](const std::filesystem::path& out_dir, int n_target,
         int n_bridge_per_relation, int n_communities, double intra_edge_prob,
         double inter_edge_prob, int feature_dim, double feature_noise,
         std::uint64_t seed) {
        hetgraph::SyntheticConfig cfg;
        cfg.n_target = n_target;
        cfg.n_bridge_per_relation = n_bridge_per_relation;
        cfg.n_communities = n_communities;
        cfg.intra_edge_prob = intra_edge_prob;
        cfg.inter_edge_prob = inter_edge_prob;
        cfg.feature_dim = feature_dim;
        cfg.feature_noise = feature_noise;
        cfg.seed = seed;
        cfg.validate();
        hetgraph::Dataset ds;
        ds.graph = hetgraph::generate_synthetic(cfg);
        ds.metapaths = hetgraph::synthetic_metapaths();
        hetgraph::save_dataset(ds, out_dir);
        return ds.graph.labels;
      },
      py::arg("out_dir"), py::arg("n_target") = 100,
      py::arg("n_bridge_per_relation") = 30, py::arg("n_communities") = 3,
      py::arg("intra_edge_prob") = 0.3, py::arg("inter_edge_prob") = 0.05,
      py::arg("feature_dim") = 16, py::arg("feature_noise") = 1.0,
      py::arg("seed") = 1,
      "Writes a synthetic dataset directory; returns the node labels.");

  // The output override is optional: an empty std::filesystem::path default
  // would round-trip through pathlib as '.' and hijack the config's value.
  using MaybePath = std::optional<std::filesystem::path>;
  auto options = [](const std::filesystem::path& config, const MaybePath& out,
                    const std::vector<std::uint64_t>& seeds,
                    const std::string& ablation, bool dump_plans) {
    cli::CommandOptions opt;
    opt.config = config;
    if (out) opt.out = *out;
    opt.seeds = seeds;
    opt.ablation = ablation;
    opt.dump_plans = dump_plans;
    return opt;
  };

  m.def(
      "train",
      [options](const std::filesystem::path& config, const MaybePath& out,
                const std::vector<std::uint64_t>& seeds,
                const std::string& ablation, bool dump_plans) {
        cli::cmd_train(options(config, out, seeds, ablation, dump_plans));
      },
      py::arg("config"), py::arg("out") = std::nullopt,
      py::arg("seeds") = std::vector<std::uint64_t>{},
      py::arg("ablation") = std::string(), py::arg("dump_plans") = false,
      "Runs the training pipeline from a config file (same as `hgot train`).");

  m.def(
      "evaluate",
      [options](const std::filesystem::path& config, const MaybePath& out) {
        cli::cmd_eval(options(config, out, {}, "", false));
      },
      py::arg("config"), py::arg("out") = std::nullopt,
      "Re-scores a checkpoint from a config file (same as `hgot eval`).");

  m.def(
      "sweep",
      [options](const std::filesystem::path& config, const MaybePath& out) {
        cli::cmd_sweep(options(config, out, {}, "", false));
      },
      py::arg("config"), py::arg("out") = std::nullopt,
      "Runs a parameter sweep from a config file (same as `hgot sweep`).");

  m.def(
      "bench",
      [](const std::vector<int>& sizes, std::uint64_t seed, int repeats) {
        cli::BenchReport r = cli::run_bench(sizes, seed, repeats);
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d;
          d["solver"] = row.solver;
          d["n"] = row.n;
          d["iterations"] = row.iterations;
          d["total_seconds"] = row.total_seconds;
          d["per_iter_seconds"] = row.per_iter_seconds;
          rows.append(d);
        }
        py::dict out;
        out["rows"] = rows;
        out["sinkhorn_slope"] = r.sinkhorn_slope;
        out["cg_slope"] = r.cg_slope;
        return out;
      },
      py::arg("sizes") = std::vector<int>{50, 100, 200}, py::arg("seed") = 1,
      py::arg("repeats") = 2,
      "Times the solvers across sizes; returns rows and log-log slopes.");
}
