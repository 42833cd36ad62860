#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hgot/hetgraph.hpp"
#include "hgot/tape.hpp"

// Learnable encoder: typed feature projection, per-view multi-head graph
// attention, and semantic-attention fusion across views. Forward passes are
// recorded on a Tape so exact parameter gradients come from one reverse
// sweep; plain value extraction just runs a gradient-free recording.

namespace hgot::encoder {

using hetgraph::HeteroGraph;
using hetgraph::MetaPath;
using hetgraph::MetaPathView;

struct EncoderConfig {
  int d = 64;      // common latent width
  int heads = 4;   // attention heads; must divide d
  int d_m = 64;    // semantic-attention hidden size
  int depth = 1;   // attention layers per view; 0 bypasses attention
  ad::Act logit_act = ad::Act::leaky_relu;
  ad::Act output_act = ad::Act::elu;
  double leaky_slope = 0.2;

  int head_dim() const { return d / heads; }
  void validate() const;
};

// Activation spelling used by checkpoints and configuration files.
std::string act_name(ad::Act a);
ad::Act act_from_name(const std::string& s);  // DataError on unknown names

// Flat, name-addressed parameter store. Entries are kept sorted by name so
// iteration order (hence init, optimizer state, and checkpoints) is stable.
class EncoderParams {
 public:
  using Entry = std::pair<std::string, Mat>;

  static EncoderParams init(const EncoderConfig& cfg, const HeteroGraph& g,
                            const std::vector<MetaPath>& paths,
                            std::uint64_t seed);

  bool has(const std::string& name) const;
  const Mat& at(const std::string& name) const;
  Mat& at(const std::string& name);
  void insert(std::string name, Mat value);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
};

// Parameter names, for reference across modules:
//   proj/<node_type>/W, proj/<node_type>/b
//   att/<path>/L<layer>/H<head>/W, att/<path>/L<layer>/H<head>/a
//   sem/q, sem/M, sem/b

void save_checkpoint(const EncoderConfig& cfg, const EncoderParams& params,
                     const std::filesystem::path& file);
std::pair<EncoderConfig, EncoderParams> load_checkpoint(
    const std::filesystem::path& file);

// Parameters mounted as tape leaves.
struct TapeParams {
  ad::Tape* tape = nullptr;
  std::vector<std::pair<std::string, ad::Var>> vars;

  ad::Var at(const std::string& name) const;
};

TapeParams mount(ad::Tape& tape, const EncoderParams& params, bool with_grad);

struct ViewRepresentation {
  ad::Var Z;                   // n x d
  std::vector<ad::Var> alpha;  // per head, n x n row-stochastic on the mask
};

struct FusedRepresentation {
  ad::Var Z_agg;  // n x d
  ad::Var beta;   // 1 x P, positive, sums to 1
  ad::Var omega;  // 1 x P raw view scores
};

// H row i = W_target x_i + b_target; only target-type nodes are projected.
ad::Var project_features(const TapeParams& tp, const HeteroGraph& g);

ViewRepresentation node_attention_layer(const TapeParams& tp, ad::Var h_in,
                                        const MetaPathView& view,
                                        const EncoderConfig& cfg, int layer);

FusedRepresentation semantic_fuse(const TapeParams& tp,
                                  const std::vector<ad::Var>& zs,
                                  const EncoderConfig& cfg);

struct ForwardResult {
  ad::Var H;
  std::vector<ViewRepresentation> views;
  FusedRepresentation fused;
};

ForwardResult forward(const TapeParams& tp, const HeteroGraph& g,
                      const std::vector<MetaPathView>& views,
                      const EncoderConfig& cfg);

// One recorded forward/backward pair with parameter bookkeeping.
class EncoderRun {
 public:
  const ForwardResult& forward(const EncoderConfig& cfg,
                               const EncoderParams& params,
                               const HeteroGraph& g,
                               const std::vector<MetaPathView>& views,
                               bool with_grad = true);

  // Reverse sweep from a scalar recorded on this run's tape; returns
  // gradients aligned with params.entries(). StateError without a forward.
  std::vector<std::pair<std::string, Mat>> backward(ad::Var scalar_loss);

  ad::Tape& tape() { return tape_; }
  const ForwardResult& result() const;
  const TapeParams& mounted() const;

 private:
  ad::Tape tape_;
  TapeParams mounted_;
  ForwardResult result_;
  bool has_forward_ = false;
};

// Gradient-free forward returning plain matrices.
struct PlainForward {
  Mat H;
  std::vector<Mat> Z;
  Mat Z_agg;
  Vec beta;
};

PlainForward forward_values(const EncoderConfig& cfg,
                            const EncoderParams& params, const HeteroGraph& g,
                            const std::vector<MetaPathView>& views);

}  // namespace hgot::encoder
