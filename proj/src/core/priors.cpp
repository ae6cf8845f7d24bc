#include "core/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "core/error.hpp"

namespace pmspde::priors {

namespace {

void check_probability(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw invalid_argument(std::string(what) + ": tail probability must be in (0, 1)");
  }
}

}  // namespace

double pc_sd_rate(const PcSdSpec& spec) {
  if (!(spec.u_sigma > 0.0)) throw invalid_argument("pc sd prior: u_sigma must be positive");
  check_probability(spec.alpha_sigma, "pc sd prior");
  return -std::log(spec.alpha_sigma) / spec.u_sigma;
}

double pc_sd_logdensity(double sigma, const PcSdSpec& spec) {
  const double lambda = pc_sd_rate(spec);
  if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(lambda) - lambda * sigma;
}

double pc_matern_range_rate(const PcMaternSpec& spec) {
  if (!(spec.u_rho > 0.0)) throw invalid_argument("pc matern prior: u_rho must be positive");
  check_probability(spec.alpha_rho, "pc matern prior (range)");
  return -std::log(spec.alpha_rho) * spec.u_rho;
}

double pc_matern_sigma_rate(const PcMaternSpec& spec) {
  return pc_sd_rate({spec.u_sigma, spec.alpha_sigma});
}

double pc_matern_logdensity(double rho, double sigma, const PcMaternSpec& spec) {
  const double lr = pc_matern_range_rate(spec);
  const double ls = pc_matern_sigma_rate(spec);
  if (!(rho > 0.0) || !(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  const double log_range = std::log(lr) - 2.0 * std::log(rho) - lr / rho;
  const double log_sigma = std::log(ls) - ls * sigma;
  return log_range + log_sigma;
}

PcAr1Prior::PcAr1Prior(const PcAr1Spec& spec) {
  if (!(spec.u_a > -1.0 && spec.u_a < 1.0)) {
    throw invalid_argument("pc ar1 prior: u_a must be in (-1, 1)");
  }
  check_probability(spec.alpha_a, "pc ar1 prior");
  const double du = std::sqrt(1.0 - spec.u_a);
  const double dmax = std::numbers::sqrt2;
  // Tail as a function of the rate rises from du/dmax (rate -> 0) to 1.
  auto tail = [&](double lambda) { return -std::expm1(-lambda * du) / -std::expm1(-lambda * dmax); };
  const double lower = du / dmax;
  if (!(spec.alpha_a > lower)) {
    throw invalid_argument("pc ar1 prior: Prob(a > " + std::to_string(spec.u_a) + ") = " +
                           std::to_string(spec.alpha_a) +
                           " is unsatisfiable; it must exceed " + std::to_string(lower));
  }
  double lo = 1e-12, hi = 1.0;
  while (tail(hi) < spec.alpha_a) {
    hi *= 2.0;
    if (hi > 1e12) throw invalid_argument("pc ar1 prior: tail probability too close to 1");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tail(mid) < spec.alpha_a) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-15 * hi) break;
  }
  lambda_ = 0.5 * (lo + hi);
}

double PcAr1Prior::logdensity(double a) const {
  if (!(a > -1.0 && a < 1.0)) return -std::numeric_limits<double>::infinity();
  const double d = std::sqrt(1.0 - a);
  return std::log(lambda_) - lambda_ * d - std::log(2.0 * d) -
         std::log(-std::expm1(-lambda_ * std::numbers::sqrt2));
}

double PcAr1Prior::upper_tail(double u) const {
  if (u <= -1.0) return 1.0;
  if (u >= 1.0) return 0.0;
  return -std::expm1(-lambda_ * std::sqrt(1.0 - u)) /
         -std::expm1(-lambda_ * std::numbers::sqrt2);
}

double pc_ar1_logdensity(double a, const PcAr1Spec& spec) {
  return PcAr1Prior(spec).logdensity(a);
}

}  // namespace pmspde::priors
