#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hgot/eval.hpp"
#include "hgot/objective.hpp"

// Command-line front end: strict JSON configuration, the train / sweep /
// bench / generate / eval subcommands, and their artifact writers. The
// throwing command bodies live here so tests can drive them in-process;
// the binary maps exceptions to exit codes.

namespace hgot::cli {

// Exactly one of the two sources may be set.
struct DataSource {
  std::filesystem::path dataset;  // directory or manifest path
  std::optional<hetgraph::SyntheticConfig> synthetic;
};

struct RunConfig {
  DataSource data;
  std::vector<std::string> metapaths;  // subset by name; empty keeps all
  objective::TrainConfig train;        // owns encoder / solver / weights
  eval::ProbeConfig probe;
  int probe_seeds = 10;                // split seeds averaged per report
  int cluster_k = 0;                   // 0 derives k from the labels
  std::vector<std::uint64_t> seeds;    // training seeds; default {train.seed}
  std::filesystem::path output;
  std::filesystem::path checkpoint;    // input for the eval subcommand

  void validate() const;
};

struct SweepSpec {
  std::string parameter;     // rho | sigma | hidden_dim
  std::vector<double> grid;

  void validate() const;
};

// Strict parsers: version field required, unknown keys are errors.
RunConfig load_run_config(const std::filesystem::path& file);
std::pair<RunConfig, SweepSpec> load_sweep_config(
    const std::filesystem::path& file);

// Resolves the configured source into a ready dataset (metapath subset
// applied). Synthetic sources use the generator's canonical meta-paths.
hetgraph::Dataset load_source(const RunConfig& cfg);

// --- single run ------------------------------------------------------------

struct RunOutcome {
  objective::TrainResult result;
  bool labeled = false;
  eval::ProbeSummary probe;       // only filled when labeled
  eval::ClusterReport clusters;   // only filled when labeled
  int cluster_k = 0;
  double seconds = 0.0;
};

// Trains under `seed` and scores the frozen embeddings.
RunOutcome execute_run(const hetgraph::Dataset& ds, const RunConfig& cfg,
                       std::uint64_t seed);

// --- sweep -----------------------------------------------------------------

struct SweepRow {
  double value = 0.0;
  int seeds_ok = 0;
  int seeds_failed = 0;
  double macro_mean = 0.0, macro_std = 0.0;  // valid when seeds_ok > 0
  double micro_mean = 0.0, micro_std = 0.0;
};

std::vector<SweepRow> run_sweep(const hetgraph::Dataset& ds,
                                const RunConfig& base, const SweepSpec& spec);
std::string sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows);

// --- bench -----------------------------------------------------------------

struct BenchRow {
  std::string solver;  // "sinkhorn" or "cg"
  int n = 0;
  int iterations = 0;
  double total_seconds = 0.0;
  double per_iter_seconds = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double sinkhorn_slope = 0.0;  // least-squares log-log fit per iteration
  double cg_slope = 0.0;
};

BenchReport run_bench(const std::vector<int>& sizes, std::uint64_t seed,
                      int repeats);
std::string bench_csv(const BenchReport& report);

// --- commands --------------------------------------------------------------

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out;         // overrides the config's output dir
  std::vector<std::uint64_t> seeds;  // overrides the config's seed list
  std::string ablation;              // overrides the config's training mode
  bool dump_plans = false;
};

void cmd_train(const CommandOptions& opt);
void cmd_sweep(const CommandOptions& opt);
void cmd_bench(const CommandOptions& opt);
void cmd_generate(const CommandOptions& opt);
void cmd_eval(const CommandOptions& opt);

// Runs a command body and maps exceptions to the exit-code contract:
// 0 success, 2 configuration, 3 data, 4 numerical, 1 anything else.
int run_guarded(const std::function<void()>& body);

}  // namespace hgot::cli
