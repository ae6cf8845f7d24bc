#pragma once

#include "core/geometry.hpp"

namespace pmspde::spde {

// Matérn field with smoothness fixed at nu = 1 (alpha = 2 in two dimensions).
struct MaternParams {
  double rho = 1.0;    // range in km: correlation is about 0.1 at this distance
  double sigma = 1.0;  // marginal standard deviation
  static constexpr double nu = 1.0;
};

struct SpdeCoefficients {
  double kappa = 1.0;
  double tau = 1.0;
};

SpdeCoefficients matern_to_spde(const MaternParams& params);
MaternParams spde_to_matern(const SpdeCoefficients& coeffs);

// (kappa h) K_1(kappa h), equal to 1 at h = 0.
double matern_correlation(double h, const MaternParams& params);

// tau^2 (kappa^4 C + 2 kappa^2 G + G C^{-1} G). Throws if the result is not
// positive definite.
SparseMatrix spde_precision(const geometry::FemMatrices& fem, double kappa, double tau);

// Precomputes C, G and G C^{-1} G on a shared pattern so the precision can be
// re-evaluated for new (kappa, tau) by a linear combination of value arrays.
class PrecisionTemplate {
 public:
  explicit PrecisionTemplate(const geometry::FemMatrices& fem);

  const SparseMatrix& pattern() const { return pattern_; }
  int size() const { return static_cast<int>(pattern_.rows()); }
  // Values on pattern(), full symmetric storage.
  void values(double kappa, double tau, std::span<double> out) const;
  SparseMatrix evaluate(double kappa, double tau) const;

 private:
  SparseMatrix pattern_;
  std::vector<double> c_, g_, gcg_;
};

}  // namespace pmspde::spde
