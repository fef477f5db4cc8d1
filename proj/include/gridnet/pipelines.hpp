#pragma once

#include "gridnet/io.hpp"
#include "gridnet/metrics.hpp"

namespace gridnet {

struct SensorConfig {
  int freq_count = 8;  // |K|
  int count = 15;      // |A| = m
  std::string plan_file;  // optional: reuse a saved plan
};

struct AttackSettings {
  double alpha = 0.1;
  int c_size = 5;
  double hybrid_rate = 0.5;
};

struct TrainSettings {
  double lr = 2e-3;
  int epochs = 60;
  int batch = 32;
};

/// Everything a command needs; loadable from a JSON config file.
struct RunConfig {
  std::string grid_file = "data/grid30.json";
  std::uint64_t seed = 1;
  int seed_count = 1;  // repeated trainings; metrics report one row per seed
  std::string mode = "pssf";  // pssf | fdi
  int steps = 480;
  double step_hours = 1.0;
  int window = 10;           // T
  int horizon = 0;           // H
  int spatial_order = 5;     // K
  int temporal_channels = 10;
  int graph_channels = 10;
  std::vector<int> widths = {64, 64};
  double mu1 = 1e-6;
  double mu2 = 1e-4;
  double threshold = 0.5;
  double noise_sd = 0.01;
  SensorConfig sensors;
  AttackSettings attack;
  TrainSettings training;
  double train_frac = 0.7;
  double val_frac = 0.15;
  bool normalize_gso = true;
  std::string fdi_dataset = "attacked";  // attacked | hybrid
  LoadProfileParams profile;
  // verify-bounds sweep
  std::vector<double> eps_ladder = {0.01, 0.05, 0.1};
  std::vector<int> order_set = {1, 2, 4};
  std::vector<int> node_set = {5, 8, 10};
  int bound_trials = 100;
  int bound_seeds = 2;
  int layer_inputs = 500;
  std::string out_dir = "out";
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json(const nlohmann::json& value);
void validate_config(const RunConfig& cfg);

/// Deterministic per-config sub-seeds, recorded in the manifest.
struct SeedPlan {
  std::uint64_t series, pssf, fdi, hybrid, train;
  explicit SeedPlan(std::uint64_t seed)
      : series(seed * 1000 + 11),
        pssf(seed * 1000 + 21),
        fdi(seed * 1000 + 22),
        hybrid(seed * 1000 + 23),
        train(seed * 1000 + 31) {}
};

/// Grid, solved voltage series, sensor plan and measurement operator for
/// one config: the shared substrate of every command.
struct Workbench {
  GridFile grid;
  AdmittanceModel model;
  PhasorSeries voltages;
  SensorPlan plan;
  MeasurementOperator op;
  CMat gso;           // model-facing shift (normalized when configured)
  double gso_scale = 1.0;
};

Workbench build_workbench(const RunConfig& cfg);
/// Same pipeline under a different admittance model (e.g. a tripped line);
/// keeps the sensor plan.
Workbench rebuild_workbench(const RunConfig& cfg, const GridFile& grid,
                            const AdmittanceModel& model, const SensorPlan& plan);

/// which: "pssf" (clean), "fdi" (attacked), "hybrid".
WindowedDataset build_mode_dataset(const Workbench& wb, const RunConfig& cfg,
                                   const std::string& which);

struct DatasetSplits {
  std::vector<Sample> train, val, test;
};

/// Time-ordered split; samples whose window overlaps the previous split
/// are dropped so inputs never leak across split boundaries.
DatasetSplits split_dataset(const std::vector<Sample>& samples, int window,
                            double train_frac, double val_frac);

std::vector<TrainSample> to_train_samples(const std::vector<Sample>& samples,
                                          HeadKind head, cxd input_offset);

struct EvalMetrics {
  MetricsReport model_metrics;
  MetricsReport baseline_metrics;  // RLS persistence baseline (pssf)
  double zeros_accuracy = 0.0;     // all-negative baseline (fdi)
  double ones_accuracy = 0.0;      // all-positive baseline (fdi)
  int test_count = 0;
};

struct FitResult {
  StgcnModel model;
  std::vector<double> train_loss, val_loss;
  EvalMetrics eval;
  cxd input_offset{0.0, 0.0};
  cxd output_offset{0.0, 0.0};
};

/// Train on the dataset's train/val splits, evaluate on the test split.
FitResult fit_and_evaluate(const Workbench& wb, const RunConfig& cfg,
                           const WindowedDataset& data);

EvalMetrics evaluate_model(const StgcnModel& model, const Workbench& wb,
                           const RunConfig& cfg, const std::vector<Sample>& test,
                           cxd input_offset, cxd output_offset);

// ---- commands (file-producing entry points) ----

struct DatagenResult {
  std::string series_file, plan_file, pssf_file, fdi_file, hybrid_file,
      manifest_file;
  int sample_count = 0;
};
DatagenResult cmd_datagen(const RunConfig& cfg);

SensorPlan cmd_place(const RunConfig& cfg);

struct TrainEvalResult {
  EvalMetrics eval;  // primary seed
  std::vector<std::pair<std::uint64_t, EvalMetrics>> per_seed;
  std::string checkpoint_file;
  std::string metrics_file;
  std::vector<double> train_loss, val_loss;
};
TrainEvalResult cmd_train_eval(const RunConfig& cfg);

EvalMetrics cmd_eval(const RunConfig& cfg, const std::string& checkpoint_file);

std::vector<BoundReport> cmd_verify_bounds(const RunConfig& cfg);

struct TransferResult {
  EvalMetrics before;
  EvalMetrics after;
  double mse_inflation = 1.0;
};
TransferResult cmd_topology_transfer(const RunConfig& cfg, int branch_index);

}  // namespace gridnet
