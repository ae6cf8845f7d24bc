#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/geometry.hpp"
#include "core/inference.hpp"
#include "core/model.hpp"
#include "core/validation.hpp"

namespace pmspde::pipeline {

// Progress messages. The default sink discards them.
using LogSink = std::function<void(const std::string&)>;
void set_log_sink(LogSink sink);
void log(const std::string& message);

struct FitSettings {
  AssemblyOptions assembly;
  priors::PriorSet priors;
  inference::OptimizerOptions optimizer;
  inference::HyperParameters init;
  inference::Integration integration = inference::Integration::empirical_bayes;
  double ccd_f0 = 1.1;
  int n_samples = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  long long max_latent = 50'000'000;
  // When positive and the month is at least twice as long, the optimizer
  // starts from the mode of a fit to the first days alone.
  int warm_start_days = 0;
};

// Mesh options with the automatic sizes resolved against the station layout.
// `auto_inner_edge` replaces the first guess for an automatic inner edge.
geometry::MeshOptions mesh_options(const config::Config& cfg, std::span<const geometry::Point> stations,
                                   double auto_inner_edge = 0.0);
// Mesh over the stations. With an automatic inner edge the edge length is
// rescaled until the vertex count is within 5% of mesh.target_nodes.
geometry::TriangularMesh station_mesh(const config::Config& cfg, std::span<const geometry::Point> stations);
// `stations` resolves the automatic optimizer start for the range.
FitSettings fit_settings(const config::Config& cfg, std::span<const geometry::Point> stations);

// Everything produced by one monthly fit. Members are heap-allocated where
// the latent model keeps references to them.
struct MonthFit {
  geometry::TriangularMesh mesh;
  std::unique_ptr<geometry::FemMatrices> fem;
  std::unique_ptr<ModelAssembly> assembly;
  std::unique_ptr<inference::LatentModel> model;
  inference::OptimizationResult opt;
  std::vector<inference::HyperPoint> points;
  std::vector<inference::ParameterSummary> summaries;
  inference::SampleSet samples;
};

// `n_samples = 0` skips sampling.
MonthFit fit_month(const Dataset& data, geometry::TriangularMesh mesh, const FitSettings& settings);

// Stations with at least one observation in the month.
std::vector<geometry::Point> observed_locations(const Dataset& data);

// Observed log values minus the posterior mean of the linear predictor.
std::vector<validation::Residual> fit_residuals(MonthFit& fit);

struct TargetSummary {
  Eigen::VectorXd observed;                    // µg/m³
  validation::PredictiveSummary predictive;   // noise included
  validation::PredictiveSummary linear;       // noise excluded
};

// Predictive summaries at the observations of `assembly`. Station effects are
// the fitted ones (`fresh_station_effects` false) or fresh draws per station.
TargetSummary summarize_observations(const inference::SampleSet& samples, const ModelAssembly& assembly,
                                     bool fresh_station_effects, std::uint64_t seed, int chunk = 2000);

struct CvTrial {
  validation::SplitPlan plan;
  validation::Metrics training;
  validation::Metrics validation;
  double training_coverage_linear = NAN;
  double validation_coverage_linear = NAN;
  inference::HyperParameters mode;
};

// Fits on the training stations of each trial and scores both phases. The
// mesh is shared by all trials.
std::vector<CvTrial> cross_validate(const Dataset& data, const geometry::TriangularMesh& mesh,
                                    const FitSettings& settings, const validation::SplitOptions& split, int trials);

// Commands. Each writes its artifacts and a resolved copy of the config
// under paths.output.
void run_fit(const config::Config& cfg);
void run_predict(const config::Config& cfg);
void run_cv(const config::Config& cfg);
void run_simulate(const config::Config& cfg);
void run_products(const config::Config& cfg);
void run(const std::string& command, const config::Config& cfg);

}  // namespace pmspde::pipeline
