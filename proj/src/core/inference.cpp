#include "core/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/spacetime.hpp"
#include "core/spde.hpp"

namespace pmspde::inference {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// Position of (row, col) in a compressed matrix, -1 when absent.
int position(const SparseMatrix& m, int row, int col) {
  const int* inner = m.innerIndexPtr();
  const int b = m.outerIndexPtr()[col];
  const int e = m.outerIndexPtr()[col + 1];
  const int* it = std::lower_bound(inner + b, inner + e, row);
  if (it == inner + e || *it != row) return -1;
  return static_cast<int>(it - inner);
}

bool same(const HyperParameters& x, const HyperParameters& y) {
  return x.a == y.a && x.rho == y.rho && x.sigma_omega == y.sigma_omega && x.sigma_z == y.sigma_z &&
         x.sigma_epsilon == y.sigma_epsilon;
}

}  // namespace

Vector5 to_internal(const HyperParameters& t) {
  Vector5 v;
  v << std::log1p(t.a) - std::log1p(-t.a), std::log(t.rho), std::log(t.sigma_omega), std::log(t.sigma_z),
      std::log(t.sigma_epsilon);
  return v;
}

HyperParameters from_internal(const Vector5& v) {
  HyperParameters t;
  t.a = std::tanh(0.5 * v[0]);
  t.rho = std::exp(v[1]);
  t.sigma_omega = std::exp(v[2]);
  t.sigma_z = std::exp(v[3]);
  t.sigma_epsilon = std::exp(v[4]);
  return t;
}

bool is_valid(const HyperParameters& t) {
  return std::abs(t.a) < 1.0 && t.rho > 0.0 && t.sigma_omega > 0.0 && t.sigma_z > 0.0 &&
         t.sigma_epsilon >= min_sigma_epsilon && std::isfinite(t.rho) && std::isfinite(t.sigma_omega) &&
         std::isfinite(t.sigma_z) && std::isfinite(t.sigma_epsilon);
}

std::string describe(const HyperParameters& t) {
  std::ostringstream s;
  s.precision(10);
  s << "theta = (a=" << t.a << ", rho=" << t.rho << ", sigma_omega=" << t.sigma_omega
    << ", sigma_z=" << t.sigma_z << ", sigma_epsilon=" << t.sigma_epsilon << ")";
  return s.str();
}

Vector5 user_scale_derivative(const HyperParameters& t) {
  Vector5 d;
  d << 0.5 * (1.0 - t.a * t.a), t.rho, t.sigma_omega, t.sigma_z, t.sigma_epsilon;
  return d;
}

// Index maps from the building blocks of Q_post onto its lower pattern.
struct LatentModel::Prepared {
  spde::PrecisionTemplate qs;
  SparseMatrix ar1_pattern;
  SparseMatrix post_lower;
  SparseMatrix qs_lower;
  std::vector<int> qs_lower_index;  // into qs template values
  std::vector<int> kron_pos;        // [k * nnz(qs) + l], -1 for upper entries
  std::vector<int> btb_pos;
  std::vector<double> btb_values;
  std::vector<int> z_pos;
  std::vector<int> beta_pos;

  explicit Prepared(const geometry::FemMatrices& fem) : qs(fem) {}
};

LatentModel::LatentModel(const ModelAssembly& assembly, const geometry::FemMatrices& fem,
                         const priors::PriorSet& priors, long long max_latent)
    : assembly_(assembly), priors_(priors), ar1_prior_(priors.ar1) {
  const auto& m = assembly_;
  if (m.T < 1) throw invalid_argument("model: T must be at least 1");
  if (fem.C.rows() != m.n_mesh) throw invalid_argument("model: FEM matrices do not match the mesh size");
  if (m.p() < 1) throw invalid_argument("model: the design needs an intercept column");
  if (static_cast<long long>(m.T) * m.n_mesh + m.n_station + m.p() > max_latent) {
    throw invalid_argument("model: latent dimension " +
                           std::to_string(static_cast<long long>(m.T) * m.n_mesh + m.n_station + m.p()) +
                           " exceeds the configured limit " + std::to_string(max_latent));
  }
  if (!(priors_.fixed_effect_precision > 0.0)) {
    throw invalid_argument("model: fixed effect prior precision must be positive");
  }
  // Validates the specs up front.
  priors::pc_sd_rate(priors_.sigma_epsilon);
  priors::pc_sd_rate(priors_.sigma_z);
  priors::pc_matern_range_rate(priors_.matern);
  priors::pc_matern_sigma_rate(priors_.matern);

  N_ = m.latent_dim();
  const int nu = m.T * m.n_mesh;
  const int n = m.n_obs();
  if (static_cast<int>(m.station_of.size()) != n || m.A_st.rows() != n || m.X.rows() != n) {
    throw invalid_argument("model: observation arrays have inconsistent lengths");
  }

  // B = [A_st | Z | X]
  {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<size_t>(m.A_st.nonZeros()) + static_cast<size_t>(n) * (1 + m.p()));
    for (int k = 0; k < m.A_st.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(m.A_st, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    }
    for (int i = 0; i < n; ++i) {
      const int s = m.station_of[i];
      if (s < 0 || s >= m.n_station) throw invalid_argument("model: station index out of range");
      trip.emplace_back(i, nu + s, 1.0);
      for (int j = 0; j < m.p(); ++j) trip.emplace_back(i, m.beta_offset() + j, m.X(i, j));
    }
    B_.resize(n, N_);
    B_.setFromTriplets(trip.begin(), trip.end());
    B_.makeCompressed();
  }
  Bty_ = B_.transpose() * m.y;
  yty_ = m.y.squaredNorm();

  prep_ = std::make_unique<Prepared>(fem);
  auto& P = *prep_;
  const SparseMatrix& qp = P.qs.pattern();
  P.ar1_pattern = spacetime::ar1_precision({0.5, m.T});

  SparseMatrix btb = SparseMatrix(B_.transpose() * B_).triangularView<Eigen::Lower>();
  btb.makeCompressed();

  // Union lower pattern.
  {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<size_t>(P.ar1_pattern.nonZeros()) * qp.nonZeros() / 2 + btb.nonZeros() + N_);
    const int* qo = qp.outerIndexPtr();
    const int* qi = qp.innerIndexPtr();
    for (int tc = 0; tc < m.T; ++tc) {
      for (SparseMatrix::InnerIterator at(P.ar1_pattern, tc); at; ++at) {
        const int tr = static_cast<int>(at.row());
        if (tr < tc) continue;
        for (int jc = 0; jc < m.n_mesh; ++jc) {
          for (int l = qo[jc]; l < qo[jc + 1]; ++l) {
            const int row = tr * m.n_mesh + qi[l];
            const int col = tc * m.n_mesh + jc;
            if (row >= col) trip.emplace_back(row, col, 0.0);
          }
        }
      }
    }
    for (int k = 0; k < btb.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(btb, k); it; ++it) trip.emplace_back(it.row(), it.col(), 0.0);
    }
    for (int i = nu; i < N_; ++i) trip.emplace_back(i, i, 0.0);
    P.post_lower.resize(N_, N_);
    P.post_lower.setFromTriplets(trip.begin(), trip.end());
    P.post_lower.makeCompressed();
  }

  const long long nnz_qs = qp.nonZeros();
  P.kron_pos.assign(static_cast<size_t>(P.ar1_pattern.nonZeros() * nnz_qs), -1);
  {
    const int* ao = P.ar1_pattern.outerIndexPtr();
    const int* ai = P.ar1_pattern.innerIndexPtr();
    const int* qo = qp.outerIndexPtr();
    const int* qi = qp.innerIndexPtr();
    for (int tc = 0; tc < m.T; ++tc) {
      for (int k = ao[tc]; k < ao[tc + 1]; ++k) {
        const int tr = ai[k];
        for (int jc = 0; jc < m.n_mesh; ++jc) {
          for (int l = qo[jc]; l < qo[jc + 1]; ++l) {
            const int row = tr * m.n_mesh + qi[l];
            const int col = tc * m.n_mesh + jc;
            if (row < col) continue;
            P.kron_pos[static_cast<size_t>(k) * nnz_qs + l] = position(P.post_lower, row, col);
          }
        }
      }
    }
  }
  for (int k = 0; k < btb.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(btb, k); it; ++it) {
      P.btb_pos.push_back(position(P.post_lower, static_cast<int>(it.row()), static_cast<int>(it.col())));
      P.btb_values.push_back(it.value());
    }
  }
  for (int s = 0; s < m.n_station; ++s) P.z_pos.push_back(position(P.post_lower, nu + s, nu + s));
  for (int j = 0; j < m.p(); ++j) {
    const int i = m.beta_offset() + j;
    P.beta_pos.push_back(position(P.post_lower, i, i));
  }

  // Q_s lower pattern for its own log determinant.
  {
    std::vector<Triplet> trip;
    for (int c = 0; c < qp.outerSize(); ++c) {
      for (int l = qp.outerIndexPtr()[c]; l < qp.outerIndexPtr()[c + 1]; ++l) {
        const int r = qp.innerIndexPtr()[l];
        if (r >= c) {
          trip.emplace_back(r, c, 0.0);
          P.qs_lower_index.push_back(l);
        }
      }
    }
    P.qs_lower.resize(qp.rows(), qp.cols());
    P.qs_lower.setFromTriplets(trip.begin(), trip.end());
    P.qs_lower.makeCompressed();
  }
  qs_values_.assign(qp.nonZeros(), 0.0);
  qs_lower_values_.assign(P.qs_lower_index.size(), 0.0);
  post_values_.assign(P.post_lower.nonZeros(), 0.0);
  qs_factor_.analyze(P.qs_lower);
  post_factor_.analyze(P.post_lower);
}

LatentModel::~LatentModel() = default;

void LatentModel::fill_posterior_values(const HyperParameters& theta, const std::vector<double>& qs_values,
                                        std::vector<double>& values) const {
  const auto& m = assembly_;
  const auto& P = *prep_;
  std::fill(values.begin(), values.end(), 0.0);
  const SparseMatrix ar1 = spacetime::ar1_precision({theta.a, m.T});
  const double* av = ar1.valuePtr();
  const size_t nnz_qs = qs_values.size();
  const size_t nnz_ar1 = static_cast<size_t>(ar1.nonZeros());
  for (size_t k = 0; k < nnz_ar1; ++k) {
    const int* pos = P.kron_pos.data() + k * nnz_qs;
    const double a = av[k];
    for (size_t l = 0; l < nnz_qs; ++l) {
      if (pos[l] >= 0) values[pos[l]] += a * qs_values[l];
    }
  }
  const double obs_prec = 1.0 / (theta.sigma_epsilon * theta.sigma_epsilon);
  for (size_t k = 0; k < P.btb_pos.size(); ++k) values[P.btb_pos[k]] += obs_prec * P.btb_values[k];
  const double z_prec = 1.0 / (theta.sigma_z * theta.sigma_z);
  for (int pos : P.z_pos) values[pos] += z_prec;
  for (int pos : P.beta_pos) values[pos] += priors_.fixed_effect_precision;
}

void LatentModel::evaluate(const HyperParameters& theta) {
  if (have_last_ && same(theta, last_)) return;
  if (!is_valid(theta)) throw invalid_argument("model: invalid hyperparameters " + describe(theta));
  const auto& m = assembly_;
  auto& P = *prep_;
  have_last_ = false;
  ++evaluations_;

  const auto coeffs = spde::matern_to_spde({theta.rho, theta.sigma_omega});
  P.qs.values(coeffs.kappa, coeffs.tau, qs_values_);
  for (size_t k = 0; k < P.qs_lower_index.size(); ++k) qs_lower_values_[k] = qs_values_[P.qs_lower_index[k]];
  if (!qs_factor_.factorize(qs_lower_values_)) {
    throw numerical_error("spatial precision is not positive definite at " + describe(theta));
  }
  qs_logdet_ = qs_factor_.log_determinant();

  fill_posterior_values(theta, qs_values_, post_values_);
  if (!post_factor_.factorize(post_values_)) {
    throw numerical_error("posterior precision is not positive definite at " + describe(theta));
  }

  const double s2 = theta.sigma_epsilon * theta.sigma_epsilon;
  const Eigen::VectorXd b = Bty_ / s2;
  last_mean_ = post_factor_.solve(b);

  const int n = m.n_obs();
  const double logdet_prior = m.T * qs_logdet_ + m.n_mesh * spacetime::ar1_log_determinant(theta.a) -
                              2.0 * m.n_station * std::log(theta.sigma_z) +
                              m.p() * std::log(priors_.fixed_effect_precision);
  const double logdet_post = post_factor_.log_determinant();
  const double quad = yty_ / s2 - last_mean_.dot(b);
  last_lml_ = n == 0 ? 0.0
                     : -0.5 * n * std::log(2.0 * std::numbers::pi) - n * std::log(theta.sigma_epsilon) +
                           0.5 * logdet_prior - 0.5 * logdet_post - 0.5 * quad;
  if (!std::isfinite(last_lml_)) {
    throw numerical_error("log marginal likelihood is not finite at " + describe(theta));
  }
  last_ = theta;
  have_last_ = true;
}

double LatentModel::log_marginal_likelihood(const HyperParameters& theta) {
  evaluate(theta);
  return last_lml_;
}

double LatentModel::log_prior_internal(const HyperParameters& t) const {
  if (!is_valid(t)) return neg_inf;
  double lp = priors::pc_sd_logdensity(t.sigma_epsilon, priors_.sigma_epsilon) +
              priors::pc_sd_logdensity(t.sigma_z, priors_.sigma_z) +
              priors::pc_matern_logdensity(t.rho, t.sigma_omega, priors_.matern) + ar1_prior_.logdensity(t.a);
  // Jacobians of the internal transform.
  lp += std::log(0.5 * (1.0 - t.a * t.a)) + std::log(t.rho) + std::log(t.sigma_omega) + std::log(t.sigma_z) +
        std::log(t.sigma_epsilon);
  return lp;
}

double LatentModel::log_hyper_posterior(const HyperParameters& theta) {
  const double lp = log_prior_internal(theta);
  if (!std::isfinite(lp)) return neg_inf;
  return log_marginal_likelihood(theta) + lp;
}

double LatentModel::log_hyper_posterior_internal(const Vector5& internal) {
  if (!internal.allFinite()) return neg_inf;
  return log_hyper_posterior(from_internal(internal));
}

Eigen::VectorXd LatentModel::conditional_mean(const HyperParameters& theta) {
  evaluate(theta);
  return last_mean_;
}

SparseMatrix LatentModel::posterior_precision(const HyperParameters& theta) const {
  std::vector<double> values(prep_->post_lower.nonZeros());
  const auto coeffs = spde::matern_to_spde({theta.rho, theta.sigma_omega});
  std::vector<double> qs(qs_values_.size());
  prep_->qs.values(coeffs.kappa, coeffs.tau, qs);
  fill_posterior_values(theta, qs, values);
  SparseMatrix lower = prep_->post_lower;
  std::copy(values.begin(), values.end(), lower.valuePtr());
  SparseMatrix full = lower.selfadjointView<Eigen::Lower>();
  return full;
}

SparseMatrix LatentModel::prior_precision(const HyperParameters& theta) const {
  const auto& m = assembly_;
  const auto coeffs = spde::matern_to_spde({theta.rho, theta.sigma_omega});
  const SparseMatrix qst =
      spacetime::spacetime_precision(spacetime::ar1_precision({theta.a, m.T}), prep_->qs.evaluate(coeffs.kappa, coeffs.tau));
  std::vector<Triplet> trip;
  for (int k = 0; k < qst.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(qst, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  }
  for (int s = 0; s < m.n_station; ++s) {
    trip.emplace_back(m.z_offset() + s, m.z_offset() + s, 1.0 / (theta.sigma_z * theta.sigma_z));
  }
  for (int j = 0; j < m.p(); ++j) {
    trip.emplace_back(m.beta_offset() + j, m.beta_offset() + j, priors_.fixed_effect_precision);
  }
  SparseMatrix q(N_, N_);
  q.setFromTriplets(trip.begin(), trip.end());
  return q;
}

// ---------------------------------------------------------------------------
// Optimization

Vector5 hyper_gradient(LatentModel& model, const Vector5& x, double h) {
  Vector5 g;
  for (int i = 0; i < 5; ++i) {
    Vector5 xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (model.log_hyper_posterior_internal(xp) - model.log_hyper_posterior_internal(xm)) / (2.0 * h);
  }
  return g;
}

Vector5 hyper_gradient_forward(LatentModel& model, const Vector5& x, double f0, double h) {
  Vector5 g;
  for (int i = 0; i < 5; ++i) {
    Vector5 xp = x;
    xp[i] += h;
    g[i] = (model.log_hyper_posterior_internal(xp) - f0) / h;
  }
  return g;
}

Matrix5 hyper_curvature(LatentModel& model, const Vector5& x, double h) {
  Matrix5 H;
  const double f0 = model.log_hyper_posterior_internal(x);
  Vector5 fp, fm;
  for (int i = 0; i < 5; ++i) {
    Vector5 xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    fp[i] = model.log_hyper_posterior_internal(xp);
    fm[i] = model.log_hyper_posterior_internal(xm);
    H(i, i) = (fp[i] - 2.0 * f0 + fm[i]) / (h * h);
  }
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) {
      Vector5 pp = x, mm = x;
      pp[i] += h, pp[j] += h;
      mm[i] -= h, mm[j] -= h;
      const double sum = model.log_hyper_posterior_internal(pp) + model.log_hyper_posterior_internal(mm);
      H(i, j) = H(j, i) = (sum - fp[i] - fm[i] - fp[j] - fm[j] + 2.0 * f0) / (2.0 * h * h);
    }
  }
  return -H;
}

OptimizationResult optimize_hyperparameters(LatentModel& model, const HyperParameters& init,
                                            const OptimizerOptions& options) {
  if (!is_valid(init)) throw invalid_argument("optimizer: invalid initial value " + describe(init));
  const int evals0 = model.evaluations();
  OptimizationResult res;
  Vector5 x = to_internal(init);
  double f = model.log_hyper_posterior_internal(x);
  if (!std::isfinite(f)) {
    throw numerical_error("optimizer: objective is not finite at the initial value " + describe(init));
  }
  res.initial_objective = f;
  bool central = false;
  auto gradient = [&](const Vector5& at, double f_at) {
    return central ? hyper_gradient(model, at, options.fd_step)
                   : hyper_gradient_forward(model, at, f_at, options.fd_step);
  };
  Vector5 g = gradient(x, f);
  // Inverse Hessian of -f.
  Matrix5 H = options.initial_inverse_hessian.value_or(Matrix5::Identity());
  bool scaled = options.initial_inverse_hessian.has_value();
  constexpr double c1 = 1e-4;
  constexpr double max_step = 2.0;

  int iter = 0;
  while (true) {
    if (g.cwiseAbs().maxCoeff() < options.gtol) {
      if (central) {
        res.converged = true;
        break;
      }
      central = true;
      g = gradient(x, f);
      continue;
    }
    if (iter >= options.max_iter) break;
    Vector5 d = H * g;
    if (!(d.dot(g) > 0.0)) {
      H.setIdentity();
      scaled = false;
      d = g;
    }
    double alpha = 1.0;
    const double dmax = d.cwiseAbs().maxCoeff();
    if (alpha * dmax > max_step) alpha = max_step / dmax;
    if (!scaled) alpha = std::min(alpha, 0.1 / dmax);

    bool accepted = false;
    double f_new = f;
    Vector5 x_new = x;
    for (int bt = 0; bt < 50; ++bt) {
      x_new = x + alpha * d;
      f_new = model.log_hyper_posterior_internal(x_new);
      if (std::isfinite(f_new) && f_new >= f + c1 * alpha * d.dot(g)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!central) {
        // A forward-difference direction may be poor near the mode.
        central = true;
        g = gradient(x, f);
        continue;
      }
      if (scaled) {
        // Curvature model went stale; restart from steepest ascent once.
        H.setIdentity();
        scaled = false;
        continue;
      }
      break;
    }
    const double gain = f_new - f;
    if (gain <= options.forward_gain) central = true;
    const Vector5 g_new = gradient(x_new, f_new);
    const Vector5 s = x_new - x;
    const Vector5 yv = g - g_new;  // gradient change of -f
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!scaled) {
        H = Matrix5::Identity() * (sy / yv.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Matrix5 I = Matrix5::Identity();
      H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    x = x_new;
    f = f_new;
    g = g_new;
    ++iter;
    if (options.on_iteration) options.on_iteration(iter, f, from_internal(x));
    if (central && gain < options.ftol) {
      res.converged = true;
      break;
    }
  }

  res.internal_mode = x;
  res.mode = from_internal(x);
  res.objective = f;
  res.gradient = g;
  res.iterations = iter;
  res.inverse_hessian = H;
  if (options.compute_curvature) {
    res.curvature = hyper_curvature(model, x, options.hessian_step);
    Eigen::SelfAdjointEigenSolver<Matrix5> eig(res.curvature);
    res.curvature_pd = eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0;
  } else {
    res.curvature = H.inverse();
    res.curvature_pd = false;
  }
  // Leave the model factorized at the mode.
  model.log_hyper_posterior_internal(x);
  res.evaluations = model.evaluations() - evals0;
  return res;
}

std::vector<HyperPoint> explore_hyperparameters(LatentModel& model, const OptimizationResult& opt,
                                                Integration integration, double f0) {
  std::vector<HyperPoint> points;
  HyperPoint center{opt.mode, opt.internal_mode, opt.objective, 1.0};
  if (integration == Integration::empirical_bayes || !opt.curvature_pd) {
    points.push_back(center);
    return points;
  }
  Eigen::SelfAdjointEigenSolver<Matrix5> eig(opt.curvature);
  const Matrix5 scale = eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  const double d = 5.0;
  std::vector<Vector5> design;
  design.push_back(Vector5::Zero());
  for (int i = 0; i < 5; ++i) {
    for (double sgn : {1.0, -1.0}) {
      Vector5 z = Vector5::Zero();
      z[i] = sgn * f0 * std::sqrt(d);
      design.push_back(z);
    }
  }
  for (int mask = 0; mask < 32; ++mask) {
    Vector5 z;
    for (int i = 0; i < 5; ++i) z[i] = ((mask >> i) & 1) ? -f0 : f0;
    design.push_back(z);
  }
  double best = neg_inf;
  for (const auto& z : design) {
    HyperPoint p;
    p.internal = opt.internal_mode + scale * z;
    p.theta = from_internal(p.internal);
    try {
      p.log_posterior = model.log_hyper_posterior_internal(p.internal);
    } catch (const Error&) {
      p.log_posterior = neg_inf;
    }
    best = std::max(best, p.log_posterior);
    points.push_back(p);
  }
  double total = 0.0;
  for (auto& p : points) {
    p.weight = std::isfinite(p.log_posterior) ? std::exp(p.log_posterior - best) : 0.0;
    total += p.weight;
  }
  for (auto& p : points) p.weight /= total;
  return points;
}

std::vector<ParameterSummary> summarize_hyperparameters(const OptimizationResult& opt,
                                                        const std::vector<HyperPoint>& points) {
  auto user = [](const HyperParameters& t) {
    Vector5 v;
    v << t.a, t.rho, t.sigma_omega, t.sigma_z, t.sigma_epsilon;
    return v;
  };
  const Vector5 mode = user(opt.mode);
  Vector5 mean = mode, sd;
  if (points.size() > 1) {
    mean.setZero();
    Vector5 second = Vector5::Zero();
    for (const auto& p : points) {
      const Vector5 u = user(p.theta);
      mean += p.weight * u;
      second += p.weight * u.cwiseProduct(u);
    }
    sd = (second - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
  } else if (opt.curvature_pd) {
    const Matrix5 cov = opt.curvature.inverse();
    sd = user_scale_derivative(opt.mode).cwiseAbs().cwiseProduct(cov.diagonal().cwiseSqrt());
  } else {
    sd.setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  std::vector<ParameterSummary> out;
  for (int i = 0; i < 5; ++i) out.push_back({parameter_names[i], mode[i], mean[i], sd[i]});
  return out;
}

LatentPosterior latent_conditional(LatentModel& model, const HyperParameters& theta) {
  LatentPosterior post;
  post.mean = model.conditional_mean(theta);
  post.factor = model.posterior_factor().clone();
  post.theta = theta;
  return post;
}

// ---------------------------------------------------------------------------
// Sampling

SampleSet sample_posterior(LatentModel& model, const std::vector<HyperPoint>& points, int n_samples,
                           std::uint64_t seed, int threads) {
  if (n_samples < 1) throw invalid_argument("sample_posterior: n_samples must be at least 1");
  if (points.empty()) throw invalid_argument("sample_posterior: no hyperparameter points");
  const auto& m = model.assembly();
  SampleSet out;
  out.T = m.T;
  out.n_mesh = m.n_mesh;
  out.n_station = m.n_station;
  out.n_fixed = m.p();
  const int N = model.latent_dim();
  out.latent.resize(n_samples, N);
  out.sigma_epsilon.resize(n_samples);
  out.sigma_z.resize(n_samples);
  out.hyper_index.resize(n_samples);

  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& p : points) cumulative.push_back(acc += p.weight);
  std::vector<std::vector<int>> draws_of(points.size());
  for (int k = 0; k < n_samples; ++k) {
    int j = 0;
    if (points.size() > 1) {
      const double u = StreamRng(seed, streams::hyper_pick, k).uniform() * acc;
      j = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      j = std::min<int>(j, static_cast<int>(points.size()) - 1);
    }
    draws_of[j].push_back(k);
  }

  threads = std::max(1, threads);
  for (size_t j = 0; j < points.size(); ++j) {
    const auto& draws = draws_of[j];
    if (draws.empty()) continue;
    const HyperParameters& theta = points[j].theta;
    const Eigen::VectorXd mean = model.conditional_mean(theta);
    const SparseCholesky& factor = model.posterior_factor();
    // Draws are transformed in fixed blocks so results do not depend on the
    // number of threads.
    constexpr size_t block = 32;
    const size_t n_blocks = (draws.size() + block - 1) / block;
    std::atomic<size_t> next{0};
    auto work = [&]() {
      SolveWorkspace ws;
      for (size_t b = next++; b < n_blocks; b = next++) {
        const size_t first = b * block;
        const size_t cols = std::min(block, draws.size() - first);
        Eigen::MatrixXd z(N, static_cast<Eigen::Index>(cols));
        for (size_t c = 0; c < cols; ++c) {
          StreamRng rng(seed, streams::latent, draws[first + c]);
          for (int r = 0; r < N; ++r) z(r, static_cast<Eigen::Index>(c)) = rng.normal();
        }
        const Eigen::MatrixXd x = factor.sample_transform_block(z, ws);
        for (size_t c = 0; c < cols; ++c) {
          const int k = draws[first + c];
          out.latent.row(k) = (mean + x.col(static_cast<Eigen::Index>(c))).transpose();
          out.sigma_epsilon[k] = theta.sigma_epsilon;
          out.sigma_z[k] = theta.sigma_z;
          out.hyper_index[k] = static_cast<int>(j);
        }
      }
    };
    const int nt = std::min<int>(threads, static_cast<int>(n_blocks));
    if (nt <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < nt; ++t) pool.emplace_back(work);
      for (auto& th : pool) th.join();
    }
  }
  return out;
}

Eigen::VectorXd mixture_mean(LatentModel& model, const std::vector<HyperPoint>& points) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(model.latent_dim());
  for (const auto& p : points) {
    if (p.weight > 0.0) mean += p.weight * model.conditional_mean(p.theta);
  }
  return mean;
}

namespace {

constexpr char kMagic[8] = {'P', 'M', 'S', 'P', 'D', 'E', 'S', 'A'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kExtra = 3;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_samples(const SampleSet& s, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(kMagic, 8);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.n_samples()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.latent_dim()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.T));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.n_mesh));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.n_station));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.n_fixed));
  put<std::uint64_t>(out, kExtra);
  std::vector<double> row(s.latent_dim() + kExtra);
  for (int k = 0; k < s.n_samples(); ++k) {
    std::memcpy(row.data(), s.latent.row(k).data(), sizeof(double) * s.latent_dim());
    row[s.latent_dim()] = s.sigma_epsilon[k];
    row[s.latent_dim() + 1] = s.sigma_z[k];
    row[s.latent_dim() + 2] = s.hyper_index[k];
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(sizeof(double) * row.size()));
  }
  out.close();
  if (!out) throw io_error("error writing " + path.string());
}

SampleSet load_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open sample archive " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw schema_error(path.string() + ": not a sample archive");
  const auto version = get<std::uint32_t>(in);
  get<std::uint32_t>(in);
  if (version != kVersion) throw schema_error(path.string() + ": unsupported archive version");
  const auto n = get<std::uint64_t>(in);
  const auto dim = get<std::uint64_t>(in);
  SampleSet s;
  s.T = static_cast<int>(get<std::uint64_t>(in));
  s.n_mesh = static_cast<int>(get<std::uint64_t>(in));
  s.n_station = static_cast<int>(get<std::uint64_t>(in));
  s.n_fixed = static_cast<int>(get<std::uint64_t>(in));
  const auto extra = get<std::uint64_t>(in);
  if (!in || extra != kExtra ||
      dim != static_cast<std::uint64_t>(s.T) * s.n_mesh + s.n_station + s.n_fixed) {
    throw schema_error(path.string() + ": inconsistent archive header");
  }
  s.latent.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  s.sigma_epsilon.resize(static_cast<Eigen::Index>(n));
  s.sigma_z.resize(static_cast<Eigen::Index>(n));
  s.hyper_index.resize(static_cast<Eigen::Index>(n));
  std::vector<double> row(dim + extra);
  for (std::uint64_t k = 0; k < n; ++k) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(sizeof(double) * row.size()));
    if (!in) throw schema_error(path.string() + ": archive is truncated");
    std::memcpy(s.latent.row(static_cast<Eigen::Index>(k)).data(), row.data(), sizeof(double) * dim);
    s.sigma_epsilon[static_cast<Eigen::Index>(k)] = row[dim];
    s.sigma_z[static_cast<Eigen::Index>(k)] = row[dim + 1];
    s.hyper_index[static_cast<Eigen::Index>(k)] = static_cast<int>(row[dim + 2]);
  }
  return s;
}

Predictions predict(const SampleSet& s, const PredictionTargets& t, std::uint64_t seed,
                    std::uint64_t first_key) {
  const int m = static_cast<int>(t.day.size());
  if (t.A.rows() != m || t.X.rows() != m || static_cast<int>(t.station.size()) != m ||
      static_cast<int>(t.new_station.size()) != m) {
    throw invalid_argument("predict: target arrays have inconsistent lengths");
  }
  if (t.A.cols() != s.n_mesh || t.X.cols() != s.n_fixed) {
    throw invalid_argument("predict: targets do not match the fitted model dimensions");
  }
  const int S = s.n_samples();
  Predictions out;
  out.linear.resize(S, m);
  out.predictive.resize(S, m);

  // Fresh station effects, one column per new station id.
  int n_new = 0;
  for (int v : t.new_station) n_new = std::max(n_new, v + 1);
  Eigen::MatrixXd fresh(S, n_new);
  for (int g = 0; g < n_new; ++g) {
    StreamRng rng(seed, streams::station_effect, static_cast<std::uint64_t>(g));
    for (int k = 0; k < S; ++k) fresh(k, g) = rng.normal();
  }

  const SparseMatrix At = t.A.transpose();
  const int b0 = s.beta_offset();
  for (int i = 0; i < m; ++i) {
    if (t.day[i] < 0 || t.day[i] >= s.T) throw invalid_argument("predict: day out of range");
    if (t.station[i] >= s.n_station) throw invalid_argument("predict: station out of range");
    const int u0 = t.day[i] * s.n_mesh;
    StreamRng rng(seed, streams::noise, first_key + static_cast<std::uint64_t>(i));
    for (int k = 0; k < S; ++k) {
      const double* x = s.latent.row(k).data();
      double eta = 0.0;
      for (int j = 0; j < s.n_fixed; ++j) eta += t.X(i, j) * x[b0 + j];
      for (SparseMatrix::InnerIterator it(At, i); it; ++it) eta += it.value() * x[u0 + it.row()];
      if (t.station[i] >= 0) {
        eta += x[s.z_offset() + t.station[i]];
      } else if (t.new_station[i] >= 0) {
        eta += s.sigma_z[k] * fresh(k, t.new_station[i]);
      }
      out.linear(k, i) = eta;
      out.predictive(k, i) = eta + s.sigma_epsilon[k] * rng.normal();
    }
  }
  return out;
}

}  // namespace pmspde::inference
