#pragma once

#include "json.hpp"

#include "gridnet/cplx_nn.hpp"
#include "gridnet/graph_filters.hpp"
#include "gridnet/grid_model.hpp"
#include "gridnet/sensing.hpp"
#include "gridnet/spectral.hpp"
#include "gridnet/stability.hpp"

namespace gridnet {

/// Files that cannot be read, parsed, or validated.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// On-disk grid description: branches as (r, x, b) with series admittance
/// 1/(r + jx) and line charging b split half per endpoint; plus node shunts.
struct GridFile {
  int node_count = 0;
  int slack = 0;
  std::vector<Branch> branches;
  CVec node_shunts;  // empty means none
};

GridFile load_grid_file(const std::string& path);
AdmittanceModel build_from_grid_file(const GridFile& grid);
/// Same grid with one branch removed (for topology-change evaluation).
AdmittanceModel build_without_branch(const GridFile& grid, int branch_index);

void save_phasor_series(const std::string& path, const PhasorSeries& series);
PhasorSeries load_phasor_series(const std::string& path);

void save_sensor_plan(const std::string& path, const SensorPlan& plan);
SensorPlan load_sensor_plan(const std::string& path);

// Test-fixture serialization (flat re/im JSON).
void save_spectral_basis(const std::string& path, const SpectralBasis& basis);
SpectralBasis load_spectral_basis(const std::string& path);
void save_filter_coefficients(const std::string& path,
                              const FilterCoefficients& coeffs);
FilterCoefficients load_filter_coefficients(const std::string& path);

/// JSON-lines, one sample per line. X_hat inputs are not stored; the
/// loader re-runs the RLS recovery with the caller's parameters.
void save_dataset(const std::string& path, const WindowedDataset& data);
WindowedDataset load_dataset(const std::string& path,
                             const MeasurementOperator& op,
                             const AdmittanceModel& model,
                             const DatasetParams& params);

void save_checkpoint(const std::string& path, const StgcnModel& model,
                     const nlohmann::json& meta);
StgcnModel load_checkpoint(const std::string& path,
                           nlohmann::json* meta_out = nullptr);

void save_bound_reports_csv(const std::string& path,
                            const std::vector<BoundReport>& reports);
void save_bound_reports_json(const std::string& path,
                             const std::vector<BoundReport>& reports);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& value);

}  // namespace gridnet
