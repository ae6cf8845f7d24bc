#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "core/geometry.hpp"
#include "core/model.hpp"
#include "core/priors.hpp"
#include "core/sparse_cholesky.hpp"

namespace pmspde::inference {

struct HyperParameters {
  double a = 0.5;
  double rho = 100.0;  // km
  double sigma_omega = 0.5;
  double sigma_z = 0.2;
  double sigma_epsilon = 0.2;
};

inline constexpr double min_sigma_epsilon = 1e-6;
inline constexpr std::array<const char*, 5> parameter_names = {"a", "rho", "sigma_omega", "sigma_z",
                                                                "sigma_epsilon"};

using Vector5 = Eigen::Matrix<double, 5, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;

// (log((1+a)/(1-a)), log rho, log sigma_omega, log sigma_z, log sigma_epsilon)
Vector5 to_internal(const HyperParameters& theta);
HyperParameters from_internal(const Vector5& internal);
bool is_valid(const HyperParameters& theta);
std::string describe(const HyperParameters& theta);
// d(user parameter)/d(internal coordinate), per coordinate.
Vector5 user_scale_derivative(const HyperParameters& theta);

// Evaluates the Gaussian latent model for varying hyperparameters. The sparsity
// pattern of the posterior precision is fixed, so the symbolic factorization
// is done once and every evaluation only refactorizes values. Not safe for
// concurrent use; create one per worker.
class LatentModel {
 public:
  LatentModel(const ModelAssembly& assembly, const geometry::FemMatrices& fem,
              const priors::PriorSet& priors, long long max_latent = 50'000'000);
  ~LatentModel();
  LatentModel(const LatentModel&) = delete;
  LatentModel& operator=(const LatentModel&) = delete;

  const ModelAssembly& assembly() const { return assembly_; }
  const priors::PriorSet& priors() const { return priors_; }
  int latent_dim() const { return N_; }

  // Throws a numerical error carrying theta when a factorization fails.
  double log_marginal_likelihood(const HyperParameters& theta);
  // log p(y | theta) + log p(theta) on the internal scale (Jacobians
  // included). -inf outside the domain.
  double log_hyper_posterior(const HyperParameters& theta);
  double log_hyper_posterior_internal(const Vector5& internal);
  // Prior part only: PC priors plus Jacobians of the internal transform.
  double log_prior_internal(const HyperParameters& theta) const;

  // Factorizes Q_post at theta and returns the conditional mean.
  Eigen::VectorXd conditional_mean(const HyperParameters& theta);
  // Factor of the last successful evaluation.
  const SparseCholesky& posterior_factor() const { return post_factor_; }

  // Assembled matrices at theta, for diagnostics and tests.
  SparseMatrix prior_precision(const HyperParameters& theta) const;
  SparseMatrix posterior_precision(const HyperParameters& theta) const;
  const SparseMatrix& design() const { return B_; }

  int evaluations() const { return evaluations_; }

 private:
  struct Prepared;
  // Refactorizes at theta unless it equals the last evaluated point.
  void evaluate(const HyperParameters& theta);
  void fill_posterior_values(const HyperParameters& theta, const std::vector<double>& qs_values,
                             std::vector<double>& values) const;

  const ModelAssembly& assembly_;
  priors::PriorSet priors_;
  priors::PcAr1Prior ar1_prior_;
  int N_ = 0;
  SparseMatrix B_;
  Eigen::VectorXd Bty_;
  double yty_ = 0.0;

  std::unique_ptr<Prepared> prep_;
  SparseCholesky qs_factor_;
  SparseCholesky post_factor_;
  std::vector<double> post_values_;
  std::vector<double> qs_values_;
  std::vector<double> qs_lower_values_;
  double qs_logdet_ = 0.0;
  bool have_last_ = false;
  HyperParameters last_;
  Eigen::VectorXd last_mean_;
  double last_lml_ = 0.0;
  int evaluations_ = 0;
};

struct OptimizerOptions {
  double gtol = 1e-4;
  // Also stop once an iteration improves the objective by less than this.
  double ftol = 1e-4;
  int max_iter = 200;
  double fd_step = 1e-4;
  double hessian_step = 1e-3;
  // Forward differences (half the cost) are used for the gradient while the
  // last step gained more than this; central differences otherwise.
  double forward_gain = 1.0;
  // Starting inverse Hessian of the negative objective on the internal
  // scale, e.g. from a related fit. Identity scaling when absent.
  std::optional<Matrix5> initial_inverse_hessian;
  bool compute_curvature = true;
  // Called after every accepted step with the iteration count, objective and
  // point.
  std::function<void(int, double, const HyperParameters&)> on_iteration;
};

struct OptimizationResult {
  HyperParameters mode;
  Vector5 internal_mode;
  Matrix5 curvature;  // negative Hessian on the internal scale
  Matrix5 inverse_hessian;  // final quasi-Newton approximation
  Vector5 gradient;
  double objective = 0.0;
  double initial_objective = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool curvature_pd = false;
};

OptimizationResult optimize_hyperparameters(LatentModel& model, const HyperParameters& init,
                                            const OptimizerOptions& options = {});

// Finite-difference gradient and negative Hessian of the log hyper posterior.
// The Hessian uses the 31-point second-order stencil.
Vector5 hyper_gradient(LatentModel& model, const Vector5& internal, double step);
Vector5 hyper_gradient_forward(LatentModel& model, const Vector5& internal, double f0, double step);
Matrix5 hyper_curvature(LatentModel& model, const Vector5& internal, double step);

enum class Integration { empirical_bayes, ccd };

struct HyperPoint {
  HyperParameters theta;
  Vector5 internal;
  double log_posterior = 0.0;
  double weight = 1.0;
};

std::vector<HyperPoint> explore_hyperparameters(LatentModel& model, const OptimizationResult& opt,
                                                Integration integration, double f0 = 1.1);

struct ParameterSummary {
  std::string name;
  double mode = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

// Weighted moments over the design points when there are several, else the
// Gaussian approximation from the curvature (delta method).
std::vector<ParameterSummary> summarize_hyperparameters(const OptimizationResult& opt,
                                                        const std::vector<HyperPoint>& points);

struct LatentPosterior {
  Eigen::VectorXd mean;
  SparseCholesky factor;  // of the conditional precision
  HyperParameters theta;

  Eigen::VectorXd marginal_variances() const { return factor.inverse_diagonal(); }
};

LatentPosterior latent_conditional(LatentModel& model, const HyperParameters& theta);

// Joint draws of the latent vector. Row k is draw k; extra columns hold the
// hyperparameters the draw was conditioned on.
struct SampleSet {
  int T = 0;
  int n_mesh = 0;
  int n_station = 0;
  int n_fixed = 0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> latent;
  Eigen::VectorXd sigma_epsilon;
  Eigen::VectorXd sigma_z;
  Eigen::VectorXi hyper_index;

  int n_samples() const { return static_cast<int>(latent.rows()); }
  int latent_dim() const { return static_cast<int>(latent.cols()); }
  int z_offset() const { return T * n_mesh; }
  int beta_offset() const { return T * n_mesh + n_station; }
};

SampleSet sample_posterior(LatentModel& model, const std::vector<HyperPoint>& points, int n_samples,
                           std::uint64_t seed, int threads = 1);

// Mixture mean of the latent vector over the hyper points.
Eigen::VectorXd mixture_mean(LatentModel& model, const std::vector<HyperPoint>& points);

void save_samples(const SampleSet& samples, const std::filesystem::path& path);
SampleSet load_samples(const std::filesystem::path& path);

// Locations to predict at. Each target carries its projector row, day,
// design row (intercept first) and the station effect to add:
//   station >= 0      the fitted effect of that station
//   new_station >= 0  a fresh N(0, sigma_z^2) effect shared by all targets
//                     with the same id within a draw
//   both -1           no station effect
struct PredictionTargets {
  SparseMatrix A;  // targets x n_mesh
  std::vector<int> day;
  Eigen::MatrixXd X;
  std::vector<int> station;
  std::vector<int> new_station;
};

struct Predictions {
  // draws x targets, log scale
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> linear;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> predictive;
};

// Noise for target i is keyed by first_key + i, so splitting the targets into
// chunks does not change the draws.
Predictions predict(const SampleSet& samples, const PredictionTargets& targets, std::uint64_t seed,
                    std::uint64_t first_key = 0);

}  // namespace pmspde::inference
