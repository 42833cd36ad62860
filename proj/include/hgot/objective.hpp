#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hgot/encoder.hpp"
#include "hgot/hetgraph.hpp"
#include "hgot/transport.hpp"

// Alignment objectives between graph-space and representation-space
// transport, the ablation variants and contrastive baseline, and the
// training loop (moment-based optimizer, early stopping, loss history).

namespace hgot::objective {

using hetgraph::HeteroGraph;
using hetgraph::MetaPath;
using hetgraph::MetaPathView;

enum class AblationMode { full, no_agg, no_str, distance_only, contrastive };

std::string mode_name(AblationMode m);
AblationMode mode_from_name(const std::string& s);

struct LossWeights {
  double rho = 1.0;    // structure-loss weight, >= 0
  double sigma = 0.5;  // node/edge trade-off shared with the plan solver

  void validate() const;
};

struct ContrastiveConfig {
  double tau = 0.5;     // softmax temperature, > 0
  bool cosine = true;   // discriminator: cosine when set, raw inner product else

  void validate() const;
};

struct TrainConfig {
  int epochs = 300;
  int patience = 10;  // early stop after this many non-improving epochs
  double learning_rate = 1e-3;
  double beta1 = 0.9;  // optimizer moment coefficients
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  AblationMode mode = AblationMode::full;
  LossWeights weights;
  ContrastiveConfig contrastive;
  transport::SolverConfig solver;
  encoder::EncoderConfig encoder;

  void validate() const;
};

struct PlanDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

struct TermLoss {
  std::string label;  // view name, or "p|q" for pairwise terms
  double l_mat = 0.0;
  double l_str = 0.0;
  PlanDiagnostics graph_plan;
  PlanDiagnostics repr_plan;
};

struct LossBreakdown {
  std::vector<TermLoss> terms;
  double total = 0.0;
};

// --- loss primitives -------------------------------------------------------

// Frobenius distance between two plans; symmetric, >= 0.
double matching_loss(const Mat& plan_graph, const Mat& plan_repr);

// || (sigma F + (1-sigma) E_pi) - R ||_F with every graph-space input fixed.
double structure_loss(const Mat& F, const Mat& E_pi, double sigma,
                      const Mat& R);

// |d_graph - d_repr|.
double distance_only_loss(double d_graph, double d_repr);

// Mean InfoNCE over rows: row i of Z1 against every row of Z2, the diagonal
// as the positive. Zero when n = 1. Plain and tape forms share semantics.
double contrastive_loss(const Mat& Z1, const Mat& Z2,
                        const ContrastiveConfig& cfg);
ad::Var contrastive_loss(ad::Var Z1, ad::Var Z2, const ContrastiveConfig& cfg);

// --- graph-space side ------------------------------------------------------

// Everything the loss consumes from graph space, solved on detached inputs.
// Freezing one of these makes the training objective a pure function of the
// encoder parameters, which is what the finite-difference checks rely on.
struct GraphSide {
  struct Term {
    std::string label;
    int src_view = 0;
    int dst_view = -1;  // -1 is the aggregated view
    Mat plan;           // pi* in graph space
    Mat composite;      // sigma F + (1-sigma) E_pi; empty when unused
    double distance = 0.0;
    PlanDiagnostics diag;
  };
  std::vector<Term> terms;
};

GraphSide build_graph_side(const Mat& H,
                           const std::vector<MetaPathView>& views,
                           const Mat& A_agg, const TrainConfig& cfg);

// --- differentiable objective ---------------------------------------------

struct LossGraph {
  ad::Var total;
  LossBreakdown breakdown;
};

// Records the mode-appropriate loss on run's tape against a frozen graph
// side. run must hold a live forward for the same views.
LossGraph build_loss(encoder::EncoderRun& run, const GraphSide& gs,
                     const TrainConfig& cfg);

// Value of the training objective at `params` with the graph side frozen.
double loss_value(const encoder::EncoderParams& params, const HeteroGraph& g,
                  const std::vector<MetaPathView>& views, const GraphSide& gs,
                  const TrainConfig& cfg);

// --- optimizer -------------------------------------------------------------

class Adam {
 public:
  Adam(double learning_rate, double beta1, double beta2, double eps);

  // Applies one bias-corrected update; grads must align with params.entries().
  void step(encoder::EncoderParams& params,
            const std::vector<std::pair<std::string, Mat>>& grads);

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

// --- training loop ---------------------------------------------------------

// One optimization step: forward, fresh graph-space solves on the detached
// projection, mode loss, reverse sweep, parameter update.
LossBreakdown train_step(encoder::EncoderRun& run, Adam& opt,
                         encoder::EncoderParams& params, const HeteroGraph& g,
                         const std::vector<MetaPathView>& views,
                         const Mat& A_agg, const TrainConfig& cfg);

struct TrainResult {
  encoder::EncoderParams params;       // parameters at the best epoch
  std::vector<LossBreakdown> history;  // one entry per epoch run
  Mat embeddings;                      // Z_agg under the returned parameters
  int best_epoch = -1;
};

TrainResult train(const HeteroGraph& g, const std::vector<MetaPath>& metapaths,
                  const TrainConfig& cfg);

// Loss history as CSV: epoch,term,l_mat,l_str,graph_iterations,
// repr_iterations,total. One row per term per epoch.
std::string loss_history_csv(const std::vector<LossBreakdown>& history);
void write_loss_csv(const std::vector<LossBreakdown>& history,
                    const std::filesystem::path& file);

}  // namespace hgot::objective
