#include "gridnet/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gridnet {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    json value;
    in >> value;
    return value;
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& value) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << value.dump(2) << '\n';
}

namespace {

json cvec_to_json(const CVec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back(v(i).real());
    arr.push_back(v(i).imag());
  }
  return arr;
}

CVec cvec_from_json(const json& arr) {
  if (!arr.is_array() || arr.size() % 2 != 0)
    throw IoError("expected a flat [re, im, ...] array");
  CVec v(arr.size() / 2);
  for (size_t i = 0; i < static_cast<size_t>(v.size()); ++i)
    v(i) = cxd{arr[2 * i].get<double>(), arr[2 * i + 1].get<double>()};
  return v;
}

json cmat_to_json(const CMat& m) {
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  json arr = json::array();  // column-major
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      arr.push_back(m(r, c).real());
      arr.push_back(m(r, c).imag());
    }
  out["data"] = arr;
  return out;
}

CMat cmat_from_json(const json& value) {
  const Eigen::Index rows = value.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = value.at("cols").get<Eigen::Index>();
  const json& arr = value.at("data");
  if (static_cast<Eigen::Index>(arr.size()) != 2 * rows * cols)
    throw IoError("matrix data length mismatch");
  CMat m(rows, cols);
  size_t i = 0;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) {
      m(r, c) = cxd{arr[i].get<double>(), arr[i + 1].get<double>()};
      i += 2;
    }
  return m;
}

json rmat_to_json(const RMat& m) {
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  json arr = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) arr.push_back(m(r, c));
  out["data"] = arr;
  return out;
}

RMat rmat_from_json(const json& value) {
  const Eigen::Index rows = value.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = value.at("cols").get<Eigen::Index>();
  const json& arr = value.at("data");
  if (static_cast<Eigen::Index>(arr.size()) != rows * cols)
    throw IoError("matrix data length mismatch");
  RMat m(rows, cols);
  size_t i = 0;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = arr[i++].get<double>();
  return m;
}

const char* quantity_name(Quantity q) {
  switch (q) {
    case Quantity::Voltage: return "voltage";
    case Quantity::Current: return "current";
    case Quantity::Injection: return "injection";
  }
  return "voltage";
}

Quantity quantity_from_name(const std::string& name) {
  if (name == "voltage") return Quantity::Voltage;
  if (name == "current") return Quantity::Current;
  if (name == "injection") return Quantity::Injection;
  throw IoError("unknown quantity tag: " + name);
}

}  // namespace

GridFile load_grid_file(const std::string& path) {
  const json value = read_json_file(path);
  GridFile grid;
  try {
    grid.node_count = value.at("node_count").get<int>();
    grid.slack = value.at("slack").get<int>();
    for (const auto& item : value.at("branches")) {
      Branch b;
      b.from = item.at("from").get<int>();
      b.to = item.at("to").get<int>();
      const double r = item.at("r").get<double>();
      const double x = item.at("x").get<double>();
      const cxd z{r, x};
      if (z == cxd{0.0, 0.0}) throw IoError(path + ": branch with zero impedance");
      b.series_admittance = 1.0 / z;
      const double charging = item.value("b", 0.0);
      b.shunt_from = b.shunt_to = cxd{0.0, charging / 2.0};
      grid.branches.push_back(b);
    }
    grid.node_shunts = CVec::Zero(grid.node_count);
    if (value.contains("shunts")) {
      for (const auto& item : value.at("shunts")) {
        const int bus = item.at("bus").get<int>();
        if (bus < 0 || bus >= grid.node_count)
          throw IoError(path + ": shunt bus out of range");
        grid.node_shunts(bus) +=
            cxd{item.value("g", 0.0), item.value("b", 0.0)};
      }
    }
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return grid;
}

AdmittanceModel build_from_grid_file(const GridFile& grid) {
  return build_admittance(grid.branches, grid.node_count, grid.slack,
                          grid.node_shunts.size() ? &grid.node_shunts : nullptr);
}

AdmittanceModel build_without_branch(const GridFile& grid, int branch_index) {
  if (branch_index < 0 || branch_index >= static_cast<int>(grid.branches.size()))
    throw InvalidArgument("build_without_branch: branch index out of range");
  std::vector<Branch> remaining = grid.branches;
  remaining.erase(remaining.begin() + branch_index);
  return build_admittance(remaining, grid.node_count, grid.slack,
                          grid.node_shunts.size() ? &grid.node_shunts : nullptr);
}

void save_phasor_series(const std::string& path, const PhasorSeries& series) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "t,bus,re,im,quantity\n";
  char buf[128];
  for (int t = 0; t < series.steps(); ++t)
    for (int b = 0; b < series.nodes(); ++b) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%s\n", t, b,
                    series.values(b, t).real(), series.values(b, t).imag(),
                    quantity_name(series.quantity));
      out << buf;
    }
}

PhasorSeries load_phasor_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,bus,re,im,quantity", 0) != 0)
    throw IoError(path + ": bad phasor series header");

  int max_t = -1, max_bus = -1;
  std::vector<std::tuple<int, int, cxd>> entries;
  std::string quantity = "voltage";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    int t, bus;
    double re, im;
    std::getline(ss, field, ',');
    t = std::stoi(field);
    std::getline(ss, field, ',');
    bus = std::stoi(field);
    std::getline(ss, field, ',');
    re = std::stod(field);
    std::getline(ss, field, ',');
    im = std::stod(field);
    std::getline(ss, quantity, ',');
    entries.emplace_back(t, bus, cxd{re, im});
    max_t = std::max(max_t, t);
    max_bus = std::max(max_bus, bus);
  }
  if (entries.empty()) throw IoError(path + ": empty series");

  PhasorSeries series;
  series.quantity = quantity_from_name(quantity);
  series.values = CMat::Zero(max_bus + 1, max_t + 1);
  for (const auto& [t, bus, v] : entries) series.values(bus, t) = v;
  return series;
}

void save_sensor_plan(const std::string& path, const SensorPlan& plan) {
  json value;
  value["buses"] = plan.buses;
  value["sigma_min"] = plan.sigma_min;
  value["k"] = plan.frequency_count;
  value["step_sigma"] = plan.step_sigma;
  write_json_file(path, value);
}

SensorPlan load_sensor_plan(const std::string& path) {
  const json value = read_json_file(path);
  SensorPlan plan;
  try {
    plan.buses = value.at("buses").get<std::vector<int>>();
    plan.sigma_min = value.at("sigma_min").get<double>();
    plan.frequency_count = value.at("k").get<int>();
    if (value.contains("step_sigma"))
      plan.step_sigma = value.at("step_sigma").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return plan;
}

void save_spectral_basis(const std::string& path, const SpectralBasis& basis) {
  json value;
  value["eigenvalues"] = cvec_to_json(basis.eigenvalues);
  value["U"] = cmat_to_json(basis.U);
  write_json_file(path, value);
}

SpectralBasis load_spectral_basis(const std::string& path) {
  const json value = read_json_file(path);
  SpectralBasis basis;
  try {
    basis.eigenvalues = cvec_from_json(value.at("eigenvalues"));
    basis.U = cmat_from_json(value.at("U"));
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return basis;
}

void save_filter_coefficients(const std::string& path,
                              const FilterCoefficients& coeffs) {
  json value;
  value["h"] = cmat_to_json(coeffs.h);
  write_json_file(path, value);
}

FilterCoefficients load_filter_coefficients(const std::string& path) {
  const json value = read_json_file(path);
  FilterCoefficients coeffs;
  try {
    coeffs.h = cmat_from_json(value.at("h"));
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return coeffs;
}

void save_dataset(const std::string& path, const WindowedDataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& sample : data.samples) {
    json line;
    line["t"] = sample.t;
    line["hypothesis"] = sample.attacked ? "H1" : "H0";
    json z = json::array();
    for (Eigen::Index c = 0; c < sample.z_window.cols(); ++c)
      for (Eigen::Index r = 0; r < sample.z_window.rows(); ++r) {
        z.push_back(sample.z_window(r, c).real());
        z.push_back(sample.z_window(r, c).imag());
      }
    line["z"] = z;
    if (sample.target_x.size() > 0) {
      line["target"] = {{"x", cvec_to_json(sample.target_x)},
                        {"z_next", cvec_to_json(sample.z_target)}};
    }
    if (sample.labels.size() > 0) {
      json labels = json::array();
      for (Eigen::Index i = 0; i < sample.labels.size(); ++i)
        labels.push_back(sample.labels(i));
      line["labels"] = labels;
    }
    out << line.dump() << '\n';
  }
}

WindowedDataset load_dataset(const std::string& path,
                             const MeasurementOperator& op,
                             const AdmittanceModel& model,
                             const DatasetParams& params) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const RlsSolver solver(op, model.Y, params.mu1);
  const int m2 = 2 * op.a_size();

  WindowedDataset data;
  data.params = params;
  data.a_size = op.a_size();
  data.nodes = model.node_count;

  std::string text;
  while (std::getline(in, text)) {
    if (text.empty()) continue;
    json line;
    try {
      line = json::parse(text);
    } catch (const json::exception& e) {
      throw IoError(path + ": " + e.what());
    }
    Sample sample;
    sample.t = line.at("t").get<int>();
    sample.attacked = line.at("hypothesis").get<std::string>() == "H1";
    const json& z = line.at("z");
    if (static_cast<int>(z.size()) != 2 * m2 * params.window)
      throw IoError(path + ": z length does not match the operator/window");
    sample.z_window = CMat(m2, params.window);
    size_t i = 0;
    for (int c = 0; c < params.window; ++c)
      for (int r = 0; r < m2; ++r) {
        sample.z_window(r, c) = cxd{z[i].get<double>(), z[i + 1].get<double>()};
        i += 2;
      }
    sample.xhat_window = solver.recover_window(sample.z_window);
    if (line.contains("target")) {
      sample.target_x = cvec_from_json(line.at("target").at("x"));
      sample.z_target = cvec_from_json(line.at("target").at("z_next"));
    }
    if (line.contains("labels")) {
      const auto labels = line.at("labels").get<std::vector<int>>();
      sample.labels = Eigen::Map<const IVec>(labels.data(), labels.size());
    }
    data.samples.push_back(std::move(sample));
  }
  return data;
}

namespace {

json config_to_json(const StgcnConfig& cfg) {
  json value;
  value["nodes"] = cfg.nodes;
  value["window"] = cfg.window;
  value["spatial_order"] = cfg.spatial_order;
  value["temporal_channels"] = cfg.temporal_channels;
  value["graph_channels"] = cfg.graph_channels;
  value["hidden_widths"] = cfg.hidden_widths;
  value["head"] =
      cfg.head == HeadKind::Regression ? "regression" : "classification";
  value["output_dim"] = cfg.output_dim;
  return value;
}

StgcnConfig config_from_json(const json& value) {
  StgcnConfig cfg;
  cfg.nodes = value.at("nodes").get<int>();
  cfg.window = value.at("window").get<int>();
  cfg.spatial_order = value.at("spatial_order").get<int>();
  cfg.temporal_channels = value.at("temporal_channels").get<int>();
  cfg.graph_channels = value.at("graph_channels").get<int>();
  cfg.hidden_widths = value.at("hidden_widths").get<std::vector<int>>();
  const std::string head = value.at("head").get<std::string>();
  cfg.head = head == "regression" ? HeadKind::Regression : HeadKind::Classification;
  cfg.output_dim = value.at("output_dim").get<int>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const StgcnModel& model,
                     const json& meta) {
  json value;
  value["format"] = "gridnet-checkpoint-v1";
  value["arch"] = config_to_json(model.cfg);
  json params;
  params["temporal_kernel"] = cmat_to_json(model.temporal_kernel);
  params["temporal_bias"] = cvec_to_json(model.temporal_bias);
  json coeffs = json::array();
  for (const auto& c : model.graph_coeffs) coeffs.push_back(cmat_to_json(c));
  params["graph_coeffs"] = coeffs;
  params["graph_bias"] = cvec_to_json(model.graph_bias);
  json dense_w = json::array(), dense_b = json::array();
  for (size_t l = 0; l < model.dense_w.size(); ++l) {
    dense_w.push_back(cmat_to_json(model.dense_w[l]));
    dense_b.push_back(cvec_to_json(model.dense_b[l]));
  }
  params["dense_w"] = dense_w;
  params["dense_b"] = dense_b;
  if (model.head_w.size() > 0) {
    params["head_w"] = cmat_to_json(model.head_w);
    params["head_b"] = cvec_to_json(model.head_b);
  }
  if (model.head_w_re.size() > 0) {
    params["head_w_re"] = rmat_to_json(model.head_w_re);
    json b = json::array();
    for (Eigen::Index i = 0; i < model.head_b_re.size(); ++i)
      b.push_back(model.head_b_re(i));
    params["head_b_re"] = b;
  }
  value["params"] = std::move(params);
  value["meta"] = meta;
  write_json_file(path, value);
}

StgcnModel load_checkpoint(const std::string& path, json* meta_out) {
  const json value = read_json_file(path);
  if (value.value("format", "") != "gridnet-checkpoint-v1")
    throw IoError(path + ": unknown checkpoint format");
  StgcnModel model;
  try {
    model.cfg = config_from_json(value.at("arch"));
    const json& params = value.at("params");
    model.temporal_kernel = cmat_from_json(params.at("temporal_kernel"));
    model.temporal_bias = cvec_from_json(params.at("temporal_bias"));
    for (const auto& c : params.at("graph_coeffs"))
      model.graph_coeffs.push_back(cmat_from_json(c));
    model.graph_bias = cvec_from_json(params.at("graph_bias"));
    for (const auto& w : params.at("dense_w"))
      model.dense_w.push_back(cmat_from_json(w));
    for (const auto& b : params.at("dense_b"))
      model.dense_b.push_back(cvec_from_json(b));
    if (params.contains("head_w")) {
      model.head_w = cmat_from_json(params.at("head_w"));
      model.head_b = cvec_from_json(params.at("head_b"));
    } else {
      model.head_w = CMat(0, 0);
      model.head_b = CVec(0);
    }
    if (params.contains("head_w_re")) {
      model.head_w_re = rmat_from_json(params.at("head_w_re"));
      const auto b = params.at("head_b_re").get<std::vector<double>>();
      model.head_b_re = Eigen::Map<const RVec>(b.data(), b.size());
    } else {
      model.head_w_re = RMat(0, 0);
      model.head_b_re = RVec(0);
    }
    if (meta_out && value.contains("meta")) *meta_out = value.at("meta");
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return model;
}

void save_bound_reports_csv(const std::string& path,
                            const std::vector<BoundReport>& reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "experiment,kind,nodes,order,eps,seed,trials,theoretical,empirical,"
         "satisfied\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%.17g,%llu,%d,%.17g,%.17g,%d\n",
                  r.experiment.c_str(), r.kind.c_str(), r.nodes, r.order,
                  r.epsilon, static_cast<unsigned long long>(r.seed), r.trials,
                  r.theoretical, r.empirical, r.satisfied ? 1 : 0);
    out << buf;
  }
}

void save_bound_reports_json(const std::string& path,
                             const std::vector<BoundReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json item;
    item["experiment"] = r.experiment;
    item["kind"] = r.kind;
    item["nodes"] = r.nodes;
    item["order"] = r.order;
    item["eps"] = r.epsilon;
    item["seed"] = r.seed;
    item["trials"] = r.trials;
    item["theoretical"] = r.theoretical;
    item["empirical"] = r.empirical;
    item["satisfied"] = r.satisfied;
    arr.push_back(item);
  }
  write_json_file(path, arr);
}

}  // namespace gridnet
