#pragma once

namespace pmspde::priors {

// Prob(sigma > u_sigma) = alpha_sigma.
struct PcSdSpec {
  double u_sigma = 1.0;
  double alpha_sigma = 0.01;
};

// Prob(rho < u_rho) = alpha_rho, Prob(sigma > u_sigma) = alpha_sigma.
struct PcMaternSpec {
  double u_rho = 150.0;
  double alpha_rho = 0.8;
  double u_sigma = 1.0;
  double alpha_sigma = 0.01;
};

// Prob(a > u_a) = alpha_a, base model a = 1.
struct PcAr1Spec {
  double u_a = 0.8;
  double alpha_a = 0.4;
};

double pc_sd_rate(const PcSdSpec& spec);
double pc_sd_logdensity(double sigma, const PcSdSpec& spec);

double pc_matern_range_rate(const PcMaternSpec& spec);
double pc_matern_sigma_rate(const PcMaternSpec& spec);
double pc_matern_logdensity(double rho, double sigma, const PcMaternSpec& spec);

// Exponential prior on d(a) = sqrt(1 - a), truncated to [0, sqrt 2].
class PcAr1Prior {
 public:
  // Solves for the rate; throws when the spec cannot be met by any rate.
  explicit PcAr1Prior(const PcAr1Spec& spec);
  double rate() const { return lambda_; }
  double logdensity(double a) const;
  // Prob(a > u) under this prior.
  double upper_tail(double u) const;

 private:
  double lambda_;
};

double pc_ar1_logdensity(double a, const PcAr1Spec& spec);

struct PriorSet {
  PcSdSpec sigma_epsilon;
  PcSdSpec sigma_z;
  PcMaternSpec matern;
  PcAr1Spec ar1;
  // Precision of the independent Gaussian priors on the intercept and the
  // regression coefficients.
  double fixed_effect_precision = 0.001;
};

}  // namespace pmspde::priors
