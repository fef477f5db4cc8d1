#include "gridnet/pipelines.hpp"

#include <filesystem>
#include <fstream>

namespace gridnet {

using nlohmann::json;
namespace fs = std::filesystem;

RunConfig run_config_from_json(const json& value) {
  RunConfig cfg;
  cfg.grid_file = value.value("grid", cfg.grid_file);
  cfg.seed = value.value("seed", cfg.seed);
  cfg.seed_count = value.value("seed_count", cfg.seed_count);
  cfg.mode = value.value("mode", cfg.mode);
  cfg.steps = value.value("steps", cfg.steps);
  cfg.step_hours = value.value("step_hours", cfg.step_hours);
  cfg.window = value.value("T", cfg.window);
  cfg.horizon = value.value("H", cfg.horizon);
  cfg.spatial_order = value.value("K", cfg.spatial_order);
  cfg.temporal_channels = value.value("Kt", cfg.temporal_channels);
  cfg.graph_channels = value.value("G", cfg.graph_channels);
  cfg.widths = value.value("widths", cfg.widths);
  cfg.mu1 = value.value("mu1", cfg.mu1);
  cfg.mu2 = value.value("mu2", cfg.mu2);
  cfg.threshold = value.value("threshold", cfg.threshold);
  cfg.noise_sd = value.value("noise_sd", cfg.noise_sd);
  if (value.contains("sensors")) {
    const json& s = value.at("sensors");
    cfg.sensors.freq_count = s.value("k", cfg.sensors.freq_count);
    cfg.sensors.count = s.value("m", cfg.sensors.count);
    cfg.sensors.plan_file = s.value("plan_file", cfg.sensors.plan_file);
  }
  if (value.contains("attack")) {
    const json& a = value.at("attack");
    cfg.attack.alpha = a.value("alpha", cfg.attack.alpha);
    cfg.attack.c_size = a.value("c_size", cfg.attack.c_size);
    cfg.attack.hybrid_rate = a.value("rate", cfg.attack.hybrid_rate);
  }
  if (value.contains("train")) {
    const json& t = value.at("train");
    cfg.training.lr = t.value("lr", cfg.training.lr);
    cfg.training.epochs = t.value("epochs", cfg.training.epochs);
    cfg.training.batch = t.value("batch", cfg.training.batch);
  }
  cfg.train_frac = value.value("train_frac", cfg.train_frac);
  cfg.val_frac = value.value("val_frac", cfg.val_frac);
  cfg.normalize_gso = value.value("normalize_gso", cfg.normalize_gso);
  cfg.fdi_dataset = value.value("fdi_dataset", cfg.fdi_dataset);
  if (value.contains("profile")) {
    const json& p = value.at("profile");
    cfg.profile.mean_injection =
        cxd{p.value("mean_p", cfg.profile.mean_injection.real()),
            p.value("mean_q", cfg.profile.mean_injection.imag())};
    cfg.profile.daily_amplitude =
        p.value("daily_amplitude", cfg.profile.daily_amplitude);
    cfg.profile.noise_sd = p.value("noise_sd", cfg.profile.noise_sd);
    cfg.profile.ar_coeff = p.value("ar_coeff", cfg.profile.ar_coeff);
    cfg.profile.bus_spread = p.value("bus_spread", cfg.profile.bus_spread);
    cfg.profile.steps_per_day =
        p.value("steps_per_day", cfg.profile.steps_per_day);
  }
  cfg.eps_ladder = value.value("eps_ladder", cfg.eps_ladder);
  cfg.order_set = value.value("order_set", cfg.order_set);
  cfg.node_set = value.value("node_set", cfg.node_set);
  cfg.bound_trials = value.value("bound_trials", cfg.bound_trials);
  cfg.bound_seeds = value.value("bound_seeds", cfg.bound_seeds);
  cfg.layer_inputs = value.value("layer_inputs", cfg.layer_inputs);
  cfg.out_dir = value.value("out", cfg.out_dir);
  validate_config(cfg);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(read_json_file(path));
}

void validate_config(const RunConfig& cfg) {
  if (cfg.window < 1) throw InvalidArgument("config: T must be >= 1");
  if (cfg.horizon < 0) throw InvalidArgument("config: H must be >= 0");
  if (cfg.threshold <= 0.0 || cfg.threshold >= 1.0)
    throw InvalidArgument("config: threshold must lie in (0,1)");
  if (cfg.mu1 < 0.0 || cfg.mu2 < 0.0)
    throw InvalidArgument("config: mu1 and mu2 must be >= 0");
  if (cfg.mode != "pssf" && cfg.mode != "fdi")
    throw InvalidArgument("config: mode must be pssf or fdi");
  if (cfg.fdi_dataset != "attacked" && cfg.fdi_dataset != "hybrid")
    throw InvalidArgument("config: fdi_dataset must be attacked or hybrid");
  if (cfg.steps < cfg.window + cfg.horizon)
    throw InvalidArgument("config: steps must cover T + H");
  if (cfg.train_frac <= 0.0 || cfg.val_frac < 0.0 ||
      cfg.train_frac + cfg.val_frac >= 1.0)
    throw InvalidArgument("config: bad split fractions");
  if (cfg.seed_count < 1)
    throw InvalidArgument("config: seed_count must be >= 1");
  for (double eps : cfg.eps_ladder)
    if (eps < 0.0 || eps >= 1.0)
      throw InvalidArgument("config: eps ladder entries must lie in [0,1)");
  if (cfg.spatial_order < 0) throw InvalidArgument("config: K must be >= 0");
}

Workbench build_workbench(const RunConfig& cfg) {
  Workbench wb;
  wb.grid = load_grid_file(cfg.grid_file);
  wb.model = build_from_grid_file(wb.grid);
  return rebuild_workbench(cfg, wb.grid, wb.model, SensorPlan{});
}

Workbench rebuild_workbench(const RunConfig& cfg, const GridFile& grid,
                            const AdmittanceModel& model,
                            const SensorPlan& plan) {
  const SeedPlan seeds(cfg.seed);
  Workbench wb;
  wb.grid = grid;
  wb.model = model;

  PhasorSeries injections = synth_load_series(
      model.node_count, model.slack, cfg.steps, seeds.series, cfg.profile);
  injections.step_hours = cfg.step_hours;
  wb.voltages = solve_series(model, injections);

  if (!plan.buses.empty()) {
    wb.plan = plan;
  } else if (!cfg.sensors.plan_file.empty()) {
    wb.plan = load_sensor_plan(cfg.sensors.plan_file);
  } else {
    const SpectralBasis basis = spectral_decompose(model.Y);
    wb.plan =
        greedy_sensor_placement(basis, cfg.sensors.freq_count, cfg.sensors.count);
  }
  wb.op = build_measurement_operator(model, wb.plan.buses, cfg.noise_sd);

  wb.gso_scale = cfg.normalize_gso ? operator_norm(model.Y) : 1.0;
  if (wb.gso_scale <= 0.0) wb.gso_scale = 1.0;
  wb.gso = model.Y / wb.gso_scale;
  return wb;
}

WindowedDataset build_mode_dataset(const Workbench& wb, const RunConfig& cfg,
                                   const std::string& which) {
  const SeedPlan seeds(cfg.seed);
  DatasetParams params;
  params.window = cfg.window;
  params.horizon = cfg.horizon;
  params.mu1 = cfg.mu1;
  params.alpha = cfg.attack.alpha;
  params.c_size = cfg.attack.c_size;
  params.hybrid_rate = cfg.attack.hybrid_rate;

  std::uint64_t seed = 0;
  if (which == "pssf") {
    params.mode = DatasetMode::Clean;
    seed = seeds.pssf;
  } else if (which == "fdi") {
    params.mode = DatasetMode::Attacked;
    seed = seeds.fdi;
  } else if (which == "hybrid") {
    params.mode = DatasetMode::Hybrid;
    seed = seeds.hybrid;
  } else {
    throw InvalidArgument("build_mode_dataset: unknown dataset kind " + which);
  }
  return build_dataset(wb.voltages, wb.op, wb.model, params, seed);
}

DatasetSplits split_dataset(const std::vector<Sample>& samples, int window,
                            double train_frac, double val_frac) {
  DatasetSplits splits;
  const int n = static_cast<int>(samples.size());
  const int n_train = static_cast<int>(train_frac * n);
  const int n_val = static_cast<int>(val_frac * n);

  for (int i = 0; i < n_train; ++i) splits.train.push_back(samples[i]);
  const int train_end = splits.train.empty() ? -1 : splits.train.back().t;

  int i = n_train;
  for (; i < n && static_cast<int>(splits.val.size()) < n_val; ++i)
    if (samples[i].t - window + 1 > train_end) splits.val.push_back(samples[i]);
  const int val_end = splits.val.empty() ? train_end : splits.val.back().t;

  for (; i < n; ++i)
    if (samples[i].t - window + 1 > val_end) splits.test.push_back(samples[i]);
  return splits;
}

std::vector<TrainSample> to_train_samples(const std::vector<Sample>& samples,
                                          HeadKind head, cxd input_offset) {
  std::vector<TrainSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    TrainSample t;
    t.input = s.xhat_window;
    t.input.array() -= input_offset;
    if (head == HeadKind::Regression) {
      t.target = s.target_x;
      const Eigen::Index m = s.z_target.size() / 2;
      t.i_meas = s.z_target.head(m);
      t.v_meas = s.z_target.tail(m);
    } else {
      t.labels = s.labels.cast<double>();
    }
    out.push_back(std::move(t));
  }
  return out;
}

EvalMetrics evaluate_model(const StgcnModel& model, const Workbench& wb,
                           const RunConfig& cfg, const std::vector<Sample>& test,
                           cxd input_offset, cxd output_offset) {
  if (test.empty()) throw InvalidArgument("evaluate_model: empty test split");
  EvalMetrics out;
  out.test_count = static_cast<int>(test.size());

  if (model.cfg.head == HeadKind::Regression) {
    CMat pred(wb.model.node_count, test.size());
    CMat base(wb.model.node_count, test.size());
    CMat truth(wb.model.node_count, test.size());
    for (size_t i = 0; i < test.size(); ++i) {
      CMat input = test[i].xhat_window;
      input.array() -= input_offset;
      const ForwardResult fwd = forward(model, wb.gso, input);
      pred.col(i) = fwd.regression.array() + output_offset;
      base.col(i) = test[i].xhat_window.col(test[i].xhat_window.cols() - 1);
      truth.col(i) = test[i].target_x;
    }
    out.model_metrics = compute_regression_metrics(pred, truth);
    out.baseline_metrics = compute_regression_metrics(base, truth);
  } else {
    const int m = static_cast<int>(test.front().labels.size());
    RMat prob(m, test.size());
    Eigen::MatrixXi truth(m, test.size());
    for (size_t i = 0; i < test.size(); ++i) {
      CMat input = test[i].xhat_window;
      input.array() -= input_offset;
      const ForwardResult fwd = forward(model, wb.gso, input);
      prob.col(i) = fwd.classification;
      truth.col(i) = test[i].labels;
    }
    out.model_metrics = compute_classification_metrics(prob, truth, cfg.threshold);
    out.zeros_accuracy =
        compute_classification_metrics(RMat::Zero(m, test.size()), truth,
                                       cfg.threshold)
            .accuracy;
    out.ones_accuracy =
        compute_classification_metrics(RMat::Ones(m, test.size()), truth,
                                       cfg.threshold)
            .accuracy;
  }
  return out;
}

FitResult fit_and_evaluate(const Workbench& wb, const RunConfig& cfg,
                           const WindowedDataset& data) {
  const SeedPlan seeds(cfg.seed);
  const bool regression = cfg.mode == "pssf";
  // Voltages sit near the slack phasor; centering keeps the regression
  // target inside the tanh range and conditions the inputs.
  const cxd offset{1.0, 0.0};

  const DatasetSplits splits =
      split_dataset(data.samples, cfg.window, cfg.train_frac, cfg.val_frac);
  if (splits.train.empty() || splits.test.empty())
    throw InvalidArgument("fit_and_evaluate: splits too small");

  StgcnConfig arch;
  arch.nodes = wb.model.node_count;
  arch.window = cfg.window;
  arch.spatial_order = cfg.spatial_order;
  arch.temporal_channels = cfg.temporal_channels;
  arch.graph_channels = cfg.graph_channels;
  arch.hidden_widths = cfg.widths;
  arch.head = regression ? HeadKind::Regression : HeadKind::Classification;
  arch.output_dim = regression ? wb.model.node_count : wb.op.a_size();

  const StgcnModel init = init_stgcn(arch, seeds.train);

  TrainOptions opt;
  opt.lr = cfg.training.lr;
  opt.epochs = cfg.training.epochs;
  opt.batch = cfg.training.batch;
  opt.seed = seeds.train + 1;
  opt.mu2 = regression ? cfg.mu2 : 0.0;
  opt.physics_gso = wb.model.Y;
  opt.observed = wb.plan.buses;
  opt.output_offset = regression ? offset : cxd{0.0, 0.0};

  const auto train_set = to_train_samples(splits.train, arch.head, offset);
  const auto val_set = to_train_samples(splits.val, arch.head, offset);
  const TrainResult trained = train(init, wb.gso, train_set, val_set, opt);

  FitResult out;
  out.model = trained.model;
  out.train_loss = trained.train_loss;
  out.val_loss = trained.val_loss;
  out.input_offset = offset;
  out.output_offset = opt.output_offset;
  out.eval = evaluate_model(trained.model, wb, cfg, splits.test, offset,
                            opt.output_offset);
  return out;
}

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

void write_metrics_row(std::ofstream& out, const std::string& seed_label,
                       const std::string& mode, const EvalMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                seed_label.c_str(), mode.c_str(), m.test_count,
                m.model_metrics.mse, m.baseline_metrics.mse,
                m.model_metrics.accuracy, m.model_metrics.precision,
                m.model_metrics.recall, m.model_metrics.f1, m.zeros_accuracy,
                m.ones_accuracy, m.model_metrics.precision_defined ? 1 : 0);
  out << buf;
}

EvalMetrics mean_metrics(
    const std::vector<std::pair<std::uint64_t, EvalMetrics>>& rows) {
  EvalMetrics mean;
  const double n = static_cast<double>(rows.size());
  for (const auto& [seed, m] : rows) {
    mean.test_count = m.test_count;
    mean.model_metrics.mse += m.model_metrics.mse / n;
    mean.baseline_metrics.mse += m.baseline_metrics.mse / n;
    mean.model_metrics.accuracy += m.model_metrics.accuracy / n;
    mean.model_metrics.precision += m.model_metrics.precision / n;
    mean.model_metrics.recall += m.model_metrics.recall / n;
    mean.model_metrics.f1 += m.model_metrics.f1 / n;
    mean.zeros_accuracy += m.zeros_accuracy / n;
    mean.ones_accuracy += m.ones_accuracy / n;
    mean.model_metrics.precision_defined &= m.model_metrics.precision_defined;
  }
  return mean;
}

void write_metrics_csv(const std::string& path, const RunConfig& cfg,
                       const std::vector<std::pair<std::uint64_t, EvalMetrics>>&
                           rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "seed,mode,test_count,mse_model,mse_baseline,accuracy,precision,"
         "recall,f1,zeros_accuracy,ones_accuracy,precision_defined\n";
  for (const auto& [seed, m] : rows)
    write_metrics_row(out, std::to_string(seed), cfg.mode, m);
  if (rows.size() > 1)
    write_metrics_row(out, "mean", cfg.mode, mean_metrics(rows));
}

json metrics_to_json(const EvalMetrics& m) {
  json value;
  value["test_count"] = m.test_count;
  value["mse_model"] = m.model_metrics.mse;
  value["mse_baseline"] = m.baseline_metrics.mse;
  value["accuracy"] = m.model_metrics.accuracy;
  value["precision"] = m.model_metrics.precision;
  value["recall"] = m.model_metrics.recall;
  value["f1"] = m.model_metrics.f1;
  value["precision_defined"] = m.model_metrics.precision_defined;
  value["recall_defined"] = m.model_metrics.recall_defined;
  value["f1_defined"] = m.model_metrics.f1_defined;
  value["zeros_accuracy"] = m.zeros_accuracy;
  value["ones_accuracy"] = m.ones_accuracy;
  json buckets = json::object();
  for (const auto& [count, acc] : m.model_metrics.accuracy_by_positive_count)
    buckets[std::to_string(count)] = acc;
  value["accuracy_by_positive_count"] = buckets;
  return value;
}

}  // namespace

DatagenResult cmd_datagen(const RunConfig& cfg) {
  validate_config(cfg);
  const SeedPlan seeds(cfg.seed);
  const Workbench wb = build_workbench(cfg);

  DatagenResult result;
  result.series_file = out_path(cfg, "series.csv");
  save_phasor_series(result.series_file, wb.voltages);
  result.plan_file = out_path(cfg, "plan.json");
  save_sensor_plan(result.plan_file, wb.plan);

  const WindowedDataset pssf = build_mode_dataset(wb, cfg, "pssf");
  result.pssf_file = out_path(cfg, "pssf.jsonl");
  save_dataset(result.pssf_file, pssf);

  const WindowedDataset fdi = build_mode_dataset(wb, cfg, "fdi");
  result.fdi_file = out_path(cfg, "fdi.jsonl");
  save_dataset(result.fdi_file, fdi);

  const WindowedDataset hybrid = build_mode_dataset(wb, cfg, "hybrid");
  result.hybrid_file = out_path(cfg, "hybrid.jsonl");
  save_dataset(result.hybrid_file, hybrid);

  result.sample_count = static_cast<int>(pssf.samples.size());

  json manifest;
  manifest["format"] = "gridnet-manifest-v1";
  manifest["grid"] = cfg.grid_file;
  manifest["seed"] = cfg.seed;
  manifest["sub_seeds"] = {{"series", seeds.series},
                           {"pssf", seeds.pssf},
                           {"fdi", seeds.fdi},
                           {"hybrid", seeds.hybrid},
                           {"train", seeds.train}};
  manifest["steps"] = cfg.steps;
  manifest["T"] = cfg.window;
  manifest["H"] = cfg.horizon;
  manifest["noise_sd"] = cfg.noise_sd;
  manifest["mu1"] = cfg.mu1;
  manifest["alpha"] = cfg.attack.alpha;
  manifest["c_size"] = cfg.attack.c_size;
  manifest["hybrid_rate"] = cfg.attack.hybrid_rate;
  manifest["sample_count"] = result.sample_count;
  manifest["sensors"] = wb.plan.buses;
  manifest["files"] = {{"series", result.series_file},
                       {"plan", result.plan_file},
                       {"pssf", result.pssf_file},
                       {"fdi", result.fdi_file},
                       {"hybrid", result.hybrid_file}};
  result.manifest_file = out_path(cfg, "manifest.json");
  write_json_file(result.manifest_file, manifest);
  return result;
}

SensorPlan cmd_place(const RunConfig& cfg) {
  validate_config(cfg);
  const GridFile grid = load_grid_file(cfg.grid_file);
  const AdmittanceModel model = build_from_grid_file(grid);
  const SpectralBasis basis = spectral_decompose(model.Y);
  const SensorPlan plan =
      greedy_sensor_placement(basis, cfg.sensors.freq_count, cfg.sensors.count);
  save_sensor_plan(out_path(cfg, "plan.json"), plan);
  return plan;
}

namespace {

WindowedDataset load_mode_dataset(const RunConfig& cfg, const Workbench& wb) {
  const std::string which = cfg.mode == "pssf" ? "pssf" : cfg.fdi_dataset;
  const std::string name =
      which == "pssf" ? "pssf.jsonl"
                      : (which == "hybrid" ? "hybrid.jsonl" : "fdi.jsonl");
  const std::string path = (fs::path(cfg.out_dir) / name).string();
  if (!fs::exists(path))
    throw IoError("dataset file missing (run datagen first): " + path);
  DatasetParams params;
  params.window = cfg.window;
  params.horizon = cfg.horizon;
  params.mu1 = cfg.mu1;
  return load_dataset(path, wb.op, wb.model, params);
}

}  // namespace

TrainEvalResult cmd_train_eval(const RunConfig& cfg) {
  validate_config(cfg);
  const Workbench wb = build_workbench(cfg);
  const WindowedDataset data = load_mode_dataset(cfg, wb);

  // Repeated trainings (different init/shuffle seeds) on the same data; the
  // primary seed's model becomes the checkpoint.
  TrainEvalResult result;
  FitResult fit;
  for (int i = 0; i < cfg.seed_count; ++i) {
    RunConfig run = cfg;
    run.seed = cfg.seed + static_cast<std::uint64_t>(i);
    FitResult current = fit_and_evaluate(wb, run, data);
    result.per_seed.emplace_back(run.seed, current.eval);
    if (i == 0) fit = std::move(current);
  }
  result.eval = fit.eval;
  result.train_loss = fit.train_loss;
  result.val_loss = fit.val_loss;

  json meta;
  meta["grid"] = cfg.grid_file;
  meta["mode"] = cfg.mode;
  meta["seed"] = cfg.seed;
  meta["T"] = cfg.window;
  meta["H"] = cfg.horizon;
  meta["mu1"] = cfg.mu1;
  meta["mu2"] = cfg.mu2;
  meta["threshold"] = cfg.threshold;
  meta["noise_sd"] = cfg.noise_sd;
  meta["normalize_gso"] = cfg.normalize_gso;
  meta["sensors"] = wb.plan.buses;
  meta["input_offset"] = {fit.input_offset.real(), fit.input_offset.imag()};
  meta["output_offset"] = {fit.output_offset.real(), fit.output_offset.imag()};
  meta["metrics"] = metrics_to_json(fit.eval);

  result.checkpoint_file = out_path(cfg, "checkpoint_" + cfg.mode + ".json");
  save_checkpoint(result.checkpoint_file, fit.model, meta);
  result.metrics_file = out_path(cfg, "metrics_" + cfg.mode + ".csv");
  write_metrics_csv(result.metrics_file, cfg, result.per_seed);

  json mj = metrics_to_json(fit.eval);
  if (result.per_seed.size() > 1) {
    json arr = json::array();
    for (const auto& [seed, m] : result.per_seed) {
      json row = metrics_to_json(m);
      row["seed"] = seed;
      arr.push_back(row);
    }
    mj["per_seed"] = arr;
    mj["mean"] = metrics_to_json(mean_metrics(result.per_seed));
  }
  write_json_file(out_path(cfg, "metrics_" + cfg.mode + ".json"), mj);
  return result;
}

EvalMetrics cmd_eval(const RunConfig& cfg, const std::string& checkpoint_file) {
  validate_config(cfg);
  const Workbench wb = build_workbench(cfg);
  const WindowedDataset data = load_mode_dataset(cfg, wb);
  json meta;
  const StgcnModel model = load_checkpoint(checkpoint_file, &meta);

  cxd input_offset{0.0, 0.0}, output_offset{0.0, 0.0};
  if (meta.contains("input_offset"))
    input_offset = cxd{meta["input_offset"][0].get<double>(),
                       meta["input_offset"][1].get<double>()};
  if (meta.contains("output_offset"))
    output_offset = cxd{meta["output_offset"][0].get<double>(),
                        meta["output_offset"][1].get<double>()};

  const DatasetSplits splits =
      split_dataset(data.samples, cfg.window, cfg.train_frac, cfg.val_frac);
  const EvalMetrics metrics = evaluate_model(model, wb, cfg, splits.test,
                                             input_offset, output_offset);
  write_metrics_csv(out_path(cfg, "metrics_eval.csv"), cfg,
                    {{cfg.seed, metrics}});
  write_json_file(out_path(cfg, "metrics_eval.json"), metrics_to_json(metrics));
  return metrics;
}

std::vector<BoundReport> cmd_verify_bounds(const RunConfig& cfg) {
  validate_config(cfg);
  std::vector<BoundReport> reports;

  for (int si = 0; si < cfg.bound_seeds; ++si) {
    for (int n : cfg.node_set) {
      for (int order : cfg.order_set) {
        for (size_t ei = 0; ei < cfg.eps_ladder.size(); ++ei) {
          const double eps = cfg.eps_ladder[ei];
          const std::uint64_t seed =
              cfg.seed * 1000003ULL + si * 10007ULL + n * 101ULL +
              order * 13ULL + ei;
          Rng rng(seed);

          CMat a = rng.cnormal_mat(n, n);
          CMat s = 0.5 * (a + a.transpose());
          const double nrm = operator_norm(s);
          if (nrm > 0.0) s /= nrm;

          const CVec h = rng.cnormal_vec(order + 1);
          // Coefficient drift scales with the shift budget so the eps = 0
          // rows degenerate to bound 0 / realized 0.
          const CVec h_hat = h + eps * rng.cnormal_vec(order + 1);

          char label[96];
          std::snprintf(label, sizeof(label), "n%d_K%d_eps%g_s%d", n, order,
                        eps, si);

          BoundReport tr = run_transfer_experiment(s, h, h_hat, eps,
                                                   cfg.bound_trials, seed + 1);
          tr.experiment = label;
          reports.push_back(tr);

          BoundReport pe =
              run_permutation_experiment(s, h, eps, cfg.bound_trials, seed + 2);
          pe.experiment = label;
          reports.push_back(pe);

          BoundReport gc = run_gcn_experiment(s, h, h_hat, eps,
                                              cfg.bound_trials, seed + 3);
          gc.experiment = label;
          reports.push_back(gc);

          FilterNetwork base;
          base.gso = s;
          base.filter = h;
          base.layers = {rng.cnormal_mat(n, n)};
          FilterNetwork hat;
          hat.gso = s + random_perturbation(n, eps, rng);
          hat.filter = h_hat;
          hat.layers = {base.layers[0] + eps * rng.cnormal_mat(n, n)};
          BoundReport ly =
              run_layer_experiment(base, hat, eps, cfg.layer_inputs, seed + 4);
          ly.experiment = label;
          reports.push_back(ly);
        }
      }
    }
  }

  save_bound_reports_csv(out_path(cfg, "bounds.csv"), reports);
  save_bound_reports_json(out_path(cfg, "bounds.json"), reports);
  return reports;
}

TransferResult cmd_topology_transfer(const RunConfig& cfg, int branch_index) {
  validate_config(cfg);
  const std::string checkpoint_file =
      (fs::path(cfg.out_dir) / ("checkpoint_" + cfg.mode + ".json")).string();
  if (!fs::exists(checkpoint_file))
    throw IoError("checkpoint missing (run train first): " + checkpoint_file);
  json meta;
  const StgcnModel model = load_checkpoint(checkpoint_file, &meta);
  cxd input_offset{0.0, 0.0}, output_offset{0.0, 0.0};
  if (meta.contains("input_offset"))
    input_offset = cxd{meta["input_offset"][0].get<double>(),
                       meta["input_offset"][1].get<double>()};
  if (meta.contains("output_offset"))
    output_offset = cxd{meta["output_offset"][0].get<double>(),
                        meta["output_offset"][1].get<double>()};

  TransferResult result;
  const std::string which = cfg.mode == "pssf" ? "pssf" : cfg.fdi_dataset;

  const Workbench wb = build_workbench(cfg);
  {
    const WindowedDataset data = build_mode_dataset(wb, cfg, which);
    const DatasetSplits splits =
        split_dataset(data.samples, cfg.window, cfg.train_frac, cfg.val_frac);
    result.before = evaluate_model(model, wb, cfg, splits.test, input_offset,
                                   output_offset);
  }

  // Same trained parameters, new shift operator and new environment data.
  const AdmittanceModel tripped = build_without_branch(wb.grid, branch_index);
  const Workbench wb2 = rebuild_workbench(cfg, wb.grid, tripped, wb.plan);
  {
    const WindowedDataset data = build_mode_dataset(wb2, cfg, which);
    const DatasetSplits splits =
        split_dataset(data.samples, cfg.window, cfg.train_frac, cfg.val_frac);
    result.after = evaluate_model(model, wb2, cfg, splits.test, input_offset,
                                  output_offset);
  }

  if (result.before.model_metrics.mse > 0.0)
    result.mse_inflation =
        result.after.model_metrics.mse / result.before.model_metrics.mse;

  json report;
  report["tripped_branch"] = branch_index;
  report["before"] = metrics_to_json(result.before);
  report["after"] = metrics_to_json(result.after);
  report["mse_inflation"] = result.mse_inflation;
  write_json_file(out_path(cfg, "transfer.json"), report);
  return result;
}

}  // namespace gridnet
