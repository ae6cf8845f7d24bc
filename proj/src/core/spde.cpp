#include "core/spde.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>

#include "core/error.hpp"

namespace pmspde::spde {

SpdeCoefficients matern_to_spde(const MaternParams& p) {
  if (!(p.rho > 0.0) || !(p.sigma > 0.0)) {
    throw invalid_argument("matern_to_spde: rho and sigma must be positive");
  }
  const double kappa = std::sqrt(8.0 * MaternParams::nu) / p.rho;
  // sigma^2 = 1 / (4 pi kappa^2 tau^2) for nu = 1, d = 2.
  const double tau = 1.0 / (std::sqrt(4.0 * std::numbers::pi) * kappa * p.sigma);
  return {kappa, tau};
}

MaternParams spde_to_matern(const SpdeCoefficients& c) {
  if (!(c.kappa > 0.0) || !(c.tau > 0.0)) {
    throw invalid_argument("spde_to_matern: kappa and tau must be positive");
  }
  MaternParams p;
  p.rho = std::sqrt(8.0 * MaternParams::nu) / c.kappa;
  p.sigma = 1.0 / (std::sqrt(4.0 * std::numbers::pi) * c.kappa * c.tau);
  return p;
}

double matern_correlation(double h, const MaternParams& params) {
  if (h < 0.0) throw invalid_argument("matern_correlation: negative distance");
  if (h == 0.0) return 1.0;
  const double kappa = std::sqrt(8.0 * MaternParams::nu) / params.rho;
  const double x = kappa * h;
  // Underflows to 0 well before double range trouble.
  if (x > 700.0) return 0.0;
  return x * boost::math::cyl_bessel_k(1, x);
}

namespace {

SparseMatrix c_inverse(const SparseMatrix& C) {
  SparseMatrix inv(C.rows(), C.cols());
  std::vector<Triplet> trip;
  for (int k = 0; k < C.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(C, k); it; ++it) {
      if (it.row() != it.col()) throw invalid_argument("spde: mass matrix is not diagonal");
      if (!(it.value() > 0.0)) throw numerical_error("spde: mass matrix has a non-positive entry");
      trip.emplace_back(it.row(), it.col(), 1.0 / it.value());
    }
  }
  inv.setFromTriplets(trip.begin(), trip.end());
  return inv;
}

// Values of `m` scattered onto `pattern` (which must contain m's pattern).
std::vector<double> on_pattern(const SparseMatrix& pattern, const SparseMatrix& m) {
  std::vector<double> out(pattern.nonZeros(), 0.0);
  for (int k = 0; k < m.outerSize(); ++k) {
    const int* first = pattern.innerIndexPtr() + pattern.outerIndexPtr()[k];
    const int* last = pattern.innerIndexPtr() + pattern.outerIndexPtr()[k + 1];
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      const int* pos = std::lower_bound(first, last, static_cast<int>(it.row()));
      out[pos - pattern.innerIndexPtr()] += it.value();
    }
  }
  return out;
}

}  // namespace

PrecisionTemplate::PrecisionTemplate(const geometry::FemMatrices& fem) {
  const SparseMatrix gcg = (fem.G * c_inverse(fem.C) * fem.G).eval();
  // Structural union; explicit zeros are kept so the pattern is fixed.
  SparseMatrix ones_c = fem.C, ones_g = fem.G, ones_gcg = gcg;
  for (auto* m : {&ones_c, &ones_g, &ones_gcg}) {
    for (int k = 0; k < m->nonZeros(); ++k) m->valuePtr()[k] = 1.0;
  }
  pattern_ = (ones_c + ones_g + ones_gcg).eval();
  pattern_.makeCompressed();
  c_ = on_pattern(pattern_, fem.C);
  g_ = on_pattern(pattern_, fem.G);
  gcg_ = on_pattern(pattern_, gcg);
}

void PrecisionTemplate::values(double kappa, double tau, std::span<double> out) const {
  const double k2 = kappa * kappa;
  const double t2 = tau * tau;
  const double a = t2 * k2 * k2, b = 2.0 * t2 * k2;
  for (size_t i = 0; i < out.size(); ++i) out[i] = a * c_[i] + b * g_[i] + t2 * gcg_[i];
}

SparseMatrix PrecisionTemplate::evaluate(double kappa, double tau) const {
  SparseMatrix q = pattern_;
  values(kappa, tau, std::span<double>(q.valuePtr(), q.nonZeros()));
  return q;
}

SparseMatrix spde_precision(const geometry::FemMatrices& fem, double kappa, double tau) {
  if (!(kappa > 0.0) || !(tau > 0.0)) {
    throw invalid_argument("spde_precision: kappa and tau must be positive");
  }
  SparseMatrix q = PrecisionTemplate(fem).evaluate(kappa, tau);
  SparseCholesky chol;
  if (!chol.factorize(lower_triangle(q))) {
    throw numerical_error("spde_precision: precision is not positive definite");
  }
  return q;
}

}  // namespace pmspde::spde
