#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include <boost/math/tools/minima.hpp>

#include "core/error.hpp"
#include "core/inference.hpp"
#include "core/priors.hpp"
#include "core/simulate.hpp"
#include "support/fixtures.hpp"

using namespace pmspde;
using namespace pmspde::inference;
using fixtures::make_tiny;

namespace {

// Permutes the observation rows of an assembly.
ModelAssembly shuffled(const ModelAssembly& m, std::mt19937_64& rng) {
  std::vector<int> order(m.n_obs());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  ModelAssembly out = m;
  out.station_of.clear();
  out.day_of.clear();
  for (int i = 0; i < m.n_obs(); ++i) {
    out.y[i] = m.y[order[i]];
    out.X.row(i) = m.X.row(order[i]);
    out.station_of.push_back(m.station_of[order[i]]);
    out.day_of.push_back(m.day_of[order[i]]);
  }
  out.A_st = spacetime_projector(out.station_projector, out.station_of, out.day_of, out.T);
  return out;
}

struct Synthetic {
  geometry::TriangularMesh mesh;
  geometry::FemMatrices fem;
  ModelAssembly m;
};

Synthetic small_synthetic(std::uint64_t seed, int stations = 30, int days = 6) {
  simulate::SimulationSpec spec;
  spec.theta = {0.6, 120.0, 0.45, 0.25, 0.2};
  spec.mu = 3.2;
  spec.beta = {0.3, -0.2};
  spec.n_stations = stations;
  spec.domain_km = 400.0;
  spec.T = days;
  spec.seed = seed;
  Synthetic s;
  const auto st = simulate::simulate_stations(spec);
  std::vector<geometry::Point> pts;
  for (const auto& x : st) pts.push_back(x.location);
  s.mesh = geometry::build_mesh(pts, {60.0, 150.0, 1.0, 150.0});
  s.fem = geometry::fem_matrices(s.mesh);
  const auto sim = simulate::simulate_dataset(spec, s.mesh);
  AssemblyOptions opt;
  opt.min_obs = 1;
  s.m = assemble(sim.data, s.mesh, opt);
  return s;
}

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("internal transform round trip") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
      const auto t = fixtures::random_theta(rng);
      const auto r = from_internal(to_internal(t));
      CHECK(r.a == doctest::Approx(t.a).epsilon(1e-14));
      CHECK(r.rho == doctest::Approx(t.rho).epsilon(1e-14));
      CHECK(r.sigma_epsilon == doctest::Approx(t.sigma_epsilon).epsilon(1e-14));
    }
  }

  TEST_CASE("marginal likelihood, mean and variances match the dense oracle") {
    std::mt19937_64 rng(17);
    const priors::PriorSet pri;
    for (unsigned inst = 0; inst < 20; ++inst) {
      const auto t = make_tiny(100 + inst);
      REQUIRE(t.m.n_obs() <= 50);
      REQUIRE(t.m.latent_dim() <= 120);
      LatentModel model(t.m, t.fem, pri);
      const auto th = fixtures::random_theta(rng);
      const auto o = fixtures::dense_oracle(t, th, pri.fixed_effect_precision);
      CAPTURE(inst);
      CHECK(fixtures::rel_err(model.log_marginal_likelihood(th), o.lml) < 1e-6);
      const auto post = latent_conditional(model, th);
      CHECK(fixtures::max_rel_err(post.mean, o.mean, 1e-3 * o.mean.cwiseAbs().maxCoeff()) < 1e-6);
      CHECK(fixtures::max_rel_err(post.marginal_variances(), o.variance, 0.0) < 1e-6);
    }
  }

  TEST_CASE("assembled precisions equal the dense formulas") {
    const auto t = make_tiny(7);
    const priors::PriorSet pri;
    LatentModel model(t.m, t.fem, pri);
    const HyperParameters th{0.3, 35.0, 0.6, 0.3, 0.25};
    const Eigen::MatrixXd q = fixtures::dense_prior_precision(t, th, pri.fixed_effect_precision);
    const Eigen::MatrixXd qp = Eigen::MatrixXd(model.prior_precision(th));
    CHECK((qp - q).cwiseAbs().maxCoeff() < 1e-9 * q.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd B = fixtures::dense_design(t);
    const Eigen::MatrixXd post = q + B.transpose() * B / (th.sigma_epsilon * th.sigma_epsilon);
    const Eigen::MatrixXd got = Eigen::MatrixXd(model.posterior_precision(th));
    CHECK((got - post).cwiseAbs().maxCoeff() < 1e-9 * post.cwiseAbs().maxCoeff());
  }

  TEST_CASE("no observations: zero likelihood and the prior mean") {
    auto t = make_tiny(5, 0);
    REQUIRE(t.m.n_obs() == 0);
    LatentModel model(t.m, t.fem, priors::PriorSet{});
    const HyperParameters th;
    CHECK(model.log_marginal_likelihood(th) == 0.0);
    CHECK(model.conditional_mean(th).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("single observation matches the scalar conjugate update") {
    auto t = make_tiny(9);
    auto& m = t.m;
    m.y.conservativeResize(1);
    m.y[0] = 2.7;
    m.X = Eigen::MatrixXd::Ones(1, 1);
    m.station_of.resize(1);
    m.day_of.resize(1);
    m.coefficient_names = {"intercept"};
    m.A_st = spacetime_projector(m.station_projector, m.station_of, m.day_of, m.T);
    const priors::PriorSet pri;
    LatentModel model(m, t.fem, pri);
    const HyperParameters th{0.4, 40.0, 0.5, 0.3, 0.2};
    // Prior variance of the linear predictor at the observation.
    const Eigen::MatrixXd q = fixtures::dense_prior_precision(t, th, pri.fixed_effect_precision);
    const Eigen::VectorXd b = fixtures::dense_design(t).row(0).transpose();
    const double v = b.dot(q.ldlt().solve(b));
    const double expected = v / (v + th.sigma_epsilon * th.sigma_epsilon) * m.y[0];
    CHECK(b.dot(model.conditional_mean(th)) == doctest::Approx(expected).epsilon(1e-10));
  }

  TEST_CASE("likelihood stays finite at the smallest noise level") {
    auto t = make_tiny(21);
    // Duplicate an observation exactly.
    auto& m = t.m;
    const int n = m.n_obs();
    m.y.conservativeResize(n + 1);
    m.y[n] = m.y[0];
    m.X.conservativeResize(n + 1, Eigen::NoChange);
    m.X.row(n) = m.X.row(0);
    m.station_of.push_back(m.station_of[0]);
    m.day_of.push_back(m.day_of[0]);
    m.A_st = spacetime_projector(m.station_projector, m.station_of, m.day_of, m.T);
    LatentModel model(m, t.fem, priors::PriorSet{});
    HyperParameters th{0.3, 30.0, 0.5, 0.3, min_sigma_epsilon};
    CHECK(std::isfinite(model.log_marginal_likelihood(th)));
    th.sigma_epsilon = 0.5 * min_sigma_epsilon;
    CHECK_THROWS_AS(model.log_marginal_likelihood(th), Error);
  }

  TEST_CASE("hyper posterior is invariant to the internal round trip") {
    const auto t = make_tiny(31);
    LatentModel model(t.m, t.fem, priors::PriorSet{});
    std::mt19937_64 rng(8);
    for (int k = 0; k < 5; ++k) {
      const auto th = fixtures::random_theta(rng);
      const double a = model.log_hyper_posterior(th);
      const double b = model.log_hyper_posterior_internal(to_internal(th));
      CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
    }
  }

  TEST_CASE("hyper posterior falls without bound as sigma_omega grows") {
    const auto t = make_tiny(33);
    LatentModel model(t.m, t.fem, priors::PriorSet{});
    HyperParameters th{0.3, 30.0, 1.0, 0.3, 0.3};
    double prev = model.log_hyper_posterior(th);
    for (double s : {3.0, 10.0, 30.0, 100.0, 1000.0}) {
      th.sigma_omega = s;
      const double v = model.log_hyper_posterior(th);
      CHECK(v < prev);
      prev = v;
    }
    CHECK(prev < -4000.0);
  }

  TEST_CASE("prior-only optimum is the prior mode on the internal scale") {
    const auto t = make_tiny(41, 0);
    const priors::PriorSet pri;
    LatentModel model(t.m, t.fem, pri);
    OptimizerOptions tight;
    tight.ftol = 0.0;
    const auto opt = optimize_hyperparameters(model, HyperParameters{}, tight);
    CHECK(opt.converged);
    // Each internal coordinate has an independent prior; locate every mode
    // by bracketed minimization of the closed-form log density.
    const double lam_e = -std::log(pri.sigma_epsilon.alpha_sigma) / pri.sigma_epsilon.u_sigma;
    const double lam_z = -std::log(pri.sigma_z.alpha_sigma) / pri.sigma_z.u_sigma;
    const double lam_s = -std::log(pri.matern.alpha_sigma) / pri.matern.u_sigma;
    const double lam_r = -std::log(pri.matern.alpha_rho) * pri.matern.u_rho;
    auto sd_mode = [](double lam) {
      auto f = [lam](double s) { return -(std::log(lam) + s - lam * std::exp(s)); };
      return boost::math::tools::brent_find_minima(f, -10.0, 10.0, 40).first;
    };
    auto rho_mode = [&] {
      auto f = [lam_r](double r) { return -(std::log(lam_r) - r - lam_r * std::exp(-r)); };
      return boost::math::tools::brent_find_minima(f, -5.0, 15.0, 40).first;
    }();
    // a from the truncated exponential on sqrt(1 - a), with a = tanh(w / 2).
    const priors::PcAr1Prior ar(pri.ar1);
    const double lam_a = ar.rate();
    auto a_mode = [&] {
      auto f = [lam_a](double w) {
        const double a = std::tanh(0.5 * w);
        const double d = std::sqrt(1 - a);
        return -(-lam_a * d - std::log(2 * d) + std::log(0.5 * (1 - a * a)));
      };
      return boost::math::tools::brent_find_minima(f, -10.0, 10.0, 40).first;
    }();
    const Vector5 x = opt.internal_mode;
    CHECK(std::abs(x[0] - a_mode) < 1e-3);
    CHECK(std::abs(x[1] - rho_mode) < 1e-3);
    CHECK(std::abs(x[2] - sd_mode(lam_s)) < 1e-3);
    CHECK(std::abs(x[3] - sd_mode(lam_z)) < 1e-3);
    CHECK(std::abs(x[4] - sd_mode(lam_e)) < 1e-3);
  }

  TEST_CASE("finite-difference gradient is robust to the step") {
    const auto t = make_tiny(51);
    LatentModel model(t.m, t.fem, priors::PriorSet{});
    std::mt19937_64 rng(77);
    for (int k = 0; k < 5; ++k) {
      const Vector5 x = to_internal(fixtures::random_theta(rng));
      const Vector5 g1 = hyper_gradient(model, x, 1e-4);
      const Vector5 g2 = hyper_gradient(model, x, 2.5e-5);
      CHECK((g1 - g2).cwiseAbs().maxCoeff() <= 1e-3 * g1.cwiseAbs().maxCoeff());
    }
  }

  TEST_CASE("observation order does not matter") {
    std::mt19937_64 rng(5);
    for (unsigned inst = 0; inst < 5; ++inst) {
      const auto t = make_tiny(200 + inst);
      const ModelAssembly other = shuffled(t.m, rng);
      LatentModel m1(t.m, t.fem, priors::PriorSet{});
      LatentModel m2(other, t.fem, priors::PriorSet{});
      const auto th = fixtures::random_theta(rng);
      CHECK(std::abs(m1.log_marginal_likelihood(th) - m2.log_marginal_likelihood(th)) <=
            1e-10 * std::abs(m1.log_marginal_likelihood(th)));
      const auto p1 = latent_conditional(m1, th);
      const auto p2 = latent_conditional(m2, th);
      CHECK((p1.mean - p2.mean).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + p1.mean.cwiseAbs().maxCoeff()));
      CHECK((p1.marginal_variances() - p2.marginal_variances()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("an extra observation never increases a marginal variance") {
    std::mt19937_64 rng(6);
    for (unsigned inst = 0; inst < 10; ++inst) {
      auto t = make_tiny(300 + inst, 40);
      const auto th = fixtures::random_theta(rng);
      const Eigen::VectorXd before = fixtures::dense_oracle(t, th, 0.001).variance;
      auto& m = t.m;
      const int n = m.n_obs();
      m.y.conservativeResize(n + 1);
      m.y[n] = 1.0;
      m.X.conservativeResize(n + 1, Eigen::NoChange);
      m.X.row(n).setConstant(0.5);
      m.X(n, 0) = 1.0;
      m.station_of.push_back(static_cast<int>(rng() % m.n_station));
      m.day_of.push_back(static_cast<int>(rng() % m.T));
      m.A_st = spacetime_projector(m.station_projector, m.station_of, m.day_of, m.T);
      LatentModel model(m, t.fem, priors::PriorSet{});
      const Eigen::VectorXd after = latent_conditional(model, th).marginal_variances();
      CHECK(((after - before).array() <= 1e-12 * before.array()).all());
    }
  }

  TEST_CASE("posterior draws: Monte Carlo mean and determinism") {
    const auto t = make_tiny(61);
    LatentModel model(t.m, t.fem, priors::PriorSet{});
    const HyperParameters th{0.5, 40.0, 0.5, 0.3, 0.3};
    const std::vector<HyperPoint> pts{{th, to_internal(th), 0.0, 1.0}};
    const int n = 10000;
    const auto s = sample_posterior(model, pts, n, 99);
    const auto post = latent_conditional(model, th);
    const Eigen::VectorXd sd = post.marginal_variances().cwiseSqrt();
    const Eigen::VectorXd mc = s.latent.colwise().mean().transpose();
    CHECK(((mc - post.mean).cwiseAbs().array() <= 4.0 * sd.array() / std::sqrt(double(n))).all());
    // Sample variances agree too (loose: chi-square with 1e4 dof).
    const Eigen::VectorXd var =
        (s.latent.rowwise() - mc.transpose()).array().square().colwise().sum().transpose() / (n - 1);
    CHECK(fixtures::max_rel_err(var, post.marginal_variances(), 0.0) < 0.08);

    const auto again = sample_posterior(model, pts, 200, 99);
    const auto threaded = sample_posterior(model, pts, 200, 99, 3);
    CHECK(again.latent == s.latent.topRows(200));
    CHECK(threaded.latent == again.latent);
    const auto other = sample_posterior(model, pts, 200, 100);
    CHECK(other.latent != again.latent);
  }

  TEST_CASE("sample archive round trip") {
    const auto t = make_tiny(62);
    LatentModel model(t.m, t.fem, priors::PriorSet{});
    const HyperParameters th;
    const auto s = sample_posterior(model, {{th, to_internal(th), 0.0, 1.0}}, 7, 1);
    const auto path = std::filesystem::temp_directory_path() / "pmspde_samples_test.bin";
    save_samples(s, path);
    const auto r = load_samples(path);
    CHECK(r.latent == s.latent);
    CHECK(r.sigma_epsilon == s.sigma_epsilon);
    CHECK(r.hyper_index == s.hyper_index);
    CHECK(r.T == s.T);
    CHECK(r.n_fixed == s.n_fixed);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    CHECK_THROWS_AS(load_samples(path), Error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_samples(path), Error);
  }

  TEST_CASE("prediction draws do not depend on chunking") {
    const auto t = make_tiny(63);
    LatentModel model(t.m, t.fem, priors::PriorSet{});
    const HyperParameters th;
    const auto s = sample_posterior(model, {{th, to_internal(th), 0.0, 1.0}}, 20, 4);
    PredictionTargets all;
    const int n = t.m.n_obs();
    all.A = geometry::projector(t.mesh, std::vector<geometry::Point>(n, {10.0, 10.0})).A;
    all.X = t.m.X;
    all.day.assign(t.m.day_of.begin(), t.m.day_of.end());
    all.station.assign(n, -1);
    all.new_station.assign(n, 0);
    const auto whole = predict(s, all, 8);
    const int half = n / 2;
    PredictionTargets tail;
    tail.A = all.A.bottomRows(n - half);
    tail.X = all.X.bottomRows(n - half);
    tail.day.assign(all.day.begin() + half, all.day.end());
    tail.station.assign(n - half, -1);
    tail.new_station.assign(n - half, 0);
    const auto part = predict(s, tail, 8, half);
    CHECK(part.predictive == whole.predictive.rightCols(n - half));
    CHECK(part.linear == whole.linear.rightCols(n - half));
  }

  TEST_CASE("optimizer ascends, restarts quickly and feeds the CCD design") {
    const auto syn = small_synthetic(11);
    LatentModel model(syn.m, syn.fem, priors::PriorSet{});
    const HyperParameters init;
    OptimizerOptions tight;
    tight.ftol = 0.0;
    const auto opt = optimize_hyperparameters(model, init, tight);
    CHECK(opt.converged);
    CHECK(opt.objective >= opt.initial_objective);
    CHECK(opt.gradient.cwiseAbs().maxCoeff() < 1e-4);

    // The default objective-change stop lands next to the tight optimum.
    const auto loose = optimize_hyperparameters(model, init);
    CHECK(loose.converged);
    CHECK(loose.evaluations <= opt.evaluations);
    CHECK(opt.objective - loose.objective < 1e-3);
    CHECK((loose.internal_mode - opt.internal_mode).cwiseAbs().maxCoeff() < 0.05);

    // Seeding the quasi-Newton matrix from a finished fit.
    OptimizerOptions seeded;
    seeded.initial_inverse_hessian = opt.curvature.inverse();
    seeded.compute_curvature = false;
    const auto warm = optimize_hyperparameters(model, init, seeded);
    CHECK(warm.converged);
    CHECK(opt.objective - warm.objective < 1e-3);
    CHECK(opt.curvature_pd);
    CHECK((opt.curvature - opt.curvature.transpose()).cwiseAbs().maxCoeff() == 0.0);

    const auto again = optimize_hyperparameters(model, opt.mode);
    CHECK(again.iterations <= 2);
    CHECK(again.objective >= opt.objective - 1e-9);

    const auto eb = explore_hyperparameters(model, opt, Integration::empirical_bayes);
    REQUIRE(eb.size() == 1);
    CHECK(eb[0].weight == 1.0);
    const auto ccd = explore_hyperparameters(model, opt, Integration::ccd);
    CHECK(ccd.size() == 43);
    double total = 0.0;
    for (const auto& p : ccd) total += p.weight;
    CHECK(std::abs(total - 1.0) < 1e-12);
    // The centre carries the largest weight of a unimodal posterior.
    const auto best = std::max_element(ccd.begin(), ccd.end(),
                                       [](const auto& a, const auto& b) { return a.weight < b.weight; });
    CHECK(best == ccd.begin());

    const auto s_eb = summarize_hyperparameters(opt, eb);
    const auto s_ccd = summarize_hyperparameters(opt, ccd);
    REQUIRE(s_eb.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(s_eb[i].sd > 0.0);
      CHECK(s_ccd[i].sd > 0.0);
      // Both approximations describe the same posterior.
      CHECK(std::abs(s_ccd[i].mean - s_eb[i].mean) < 2.0 * s_eb[i].sd);
    }

    // Mixture sampling picks hyper points in proportion to their weights.
    const auto draws = sample_posterior(model, ccd, 400, 3);
    CHECK(draws.hyper_index.maxCoeff() < 43);
    const double centre_share = (draws.hyper_index.array() == 0).cast<double>().mean();
    CHECK(std::abs(centre_share - ccd[0].weight) < 4.0 * std::sqrt(ccd[0].weight * (1 - ccd[0].weight) / 400.0) + 1e-9);
  }

  TEST_CASE("non-finite objective at the initial value is an error") {
    const auto t = make_tiny(71);
    LatentModel model(t.m, t.fem, priors::PriorSet{});
    HyperParameters bad;
    bad.a = 1.5;
    CHECK_THROWS_AS(optimize_hyperparameters(model, bad), Error);
  }

  TEST_CASE("latent dimension guard") {
    const auto t = make_tiny(72);
    CHECK_THROWS_AS(LatentModel(t.m, t.fem, priors::PriorSet{}, 10), Error);
  }
}
