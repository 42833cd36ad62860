#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hgot/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hgot: heterogeneous-graph embeddings via transport-plan "
               "alignment"};
  app.require_subcommand(1);

  std::string config, out, ablation;
  std::vector<std::uint64_t> seeds;
  bool dump_plans = false;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", config, "JSON configuration file");
    if (config_required) c->required();
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--seed", seeds, "training seeds, comma separated")
        ->delimiter(',');
    return sub;
  };

  auto* train = add_common(
      app.add_subcommand("train", "train a model and write artifacts"), true);
  train->add_option("--ablation", ablation,
                    "full | no_agg | no_str | distance_only | contrastive");
  train->add_flag("--dump-plans", dump_plans,
                  "write the graph-space transport plans next to the "
                  "artifacts");
  auto* sweep = add_common(
      app.add_subcommand("sweep", "grid search over rho, sigma or hidden_dim"),
      true);
  sweep->add_option("--ablation", ablation,
                    "training mode applied to every cell");
  add_common(app.add_subcommand("bench", "solver timing and scaling report"),
             false);
  add_common(app.add_subcommand("generate", "materialize a synthetic dataset"),
             true);
  add_common(app.add_subcommand("eval", "re-evaluate a stored checkpoint"),
             true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a configuration error
  }

  hgot::cli::CommandOptions opt;
  opt.config = config;
  opt.out = out;
  opt.seeds = seeds;
  opt.ablation = ablation;
  opt.dump_plans = dump_plans;

  using hgot::cli::run_guarded;
  if (app.got_subcommand("train"))
    return run_guarded([&] { hgot::cli::cmd_train(opt); });
  if (app.got_subcommand("sweep"))
    return run_guarded([&] { hgot::cli::cmd_sweep(opt); });
  if (app.got_subcommand("bench"))
    return run_guarded([&] { hgot::cli::cmd_bench(opt); });
  if (app.got_subcommand("generate"))
    return run_guarded([&] { hgot::cli::cmd_generate(opt); });
  if (app.got_subcommand("eval"))
    return run_guarded([&] { hgot::cli::cmd_eval(opt); });
  return 2;
}
