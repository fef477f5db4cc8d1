// Command-line front end: wires the library pipelines to config files.
// Exit codes: 0 success, 2 config/file error, 3 numerical failure.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "gridnet/pipelines.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

gridnet::RunConfig make_config(const std::string& config_path,
                               std::uint64_t* seed_override,
                               std::string* out_override) {
  gridnet::RunConfig cfg = config_path.empty()
                               ? gridnet::RunConfig{}
                               : gridnet::load_run_config(config_path);
  if (seed_override) cfg.seed = *seed_override;
  if (out_override && !out_override->empty()) cfg.out_dir = *out_override;
  gridnet::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex graph signal processing and spatio-temporal graph "
               "networks for power-grid state estimation, forecasting and "
               "false-data localization"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option_function<std::uint64_t>(
         "--seed",
         [&](std::uint64_t v) {
           seed = v;
           seed_set = true;
         },
         "seed (overrides config)");

  auto* datagen = app.add_subcommand(
      "datagen", "synthesize voltages, place sensors, write datasets");
  auto* place = app.add_subcommand("place", "greedy sensor placement only");
  auto* train_cmd =
      app.add_subcommand("train", "train on generated data and evaluate");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved checkpoint");
  std::string checkpoint_file;
  eval_cmd->add_option("--checkpoint", checkpoint_file, "checkpoint JSON")
      ->required();
  auto* verify =
      app.add_subcommand("verify-bounds", "run the perturbation-bound sweeps");
  auto* transfer = app.add_subcommand(
      "transfer", "re-evaluate a checkpoint after a line trip");
  int tripped_branch = 0;
  transfer->add_option("--trip", tripped_branch, "branch index to remove")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const gridnet::RunConfig cfg =
        make_config(config_path, seed_set ? &seed : nullptr, &out_dir);

    if (datagen->parsed()) {
      const auto result = gridnet::cmd_datagen(cfg);
      std::printf("datagen: %d samples -> %s\n", result.sample_count,
                  result.manifest_file.c_str());
    } else if (place->parsed()) {
      const auto plan = gridnet::cmd_place(cfg);
      std::printf("place: %zu sensors, sigma_min %.6g\n", plan.buses.size(),
                  plan.sigma_min);
    } else if (train_cmd->parsed()) {
      const auto result = gridnet::cmd_train_eval(cfg);
      if (cfg.mode == "pssf")
        std::printf("train: test MSE %.6g (RLS baseline %.6g) -> %s\n",
                    result.eval.model_metrics.mse,
                    result.eval.baseline_metrics.mse,
                    result.checkpoint_file.c_str());
      else
        std::printf("train: accuracy %.4f F1 %.4f -> %s\n",
                    result.eval.model_metrics.accuracy,
                    result.eval.model_metrics.f1, result.checkpoint_file.c_str());
    } else if (eval_cmd->parsed()) {
      const auto metrics = gridnet::cmd_eval(cfg, checkpoint_file);
      std::printf("eval: MSE %.6g accuracy %.4f\n", metrics.model_metrics.mse,
                  metrics.model_metrics.accuracy);
    } else if (verify->parsed()) {
      const auto reports = gridnet::cmd_verify_bounds(cfg);
      int violations = 0;
      for (const auto& r : reports)
        if (!r.satisfied) ++violations;
      std::printf("verify-bounds: %zu experiments, %d violations\n",
                  reports.size(), violations);
      if (violations > 0) return kExitNumerical;
    } else if (transfer->parsed()) {
      const auto result = gridnet::cmd_topology_transfer(cfg, tripped_branch);
      std::printf("transfer: MSE %.6g -> %.6g (inflation %.3f)\n",
                  result.before.model_metrics.mse,
                  result.after.model_metrics.mse, result.mse_inflation);
    }
    return kExitOk;
  } catch (const gridnet::NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const gridnet::IoError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const gridnet::InvalidArgument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
