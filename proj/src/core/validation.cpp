#include "core/validation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/stats.hpp"

namespace pmspde::validation {

std::vector<int> SplitPlan::validation_all() const {
  std::vector<int> out;
  for (const auto& v : validation) out.insert(out.end(), v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

int stratum_count(int size, double fraction) {
  if (fraction < 0.0 || fraction > 1.0) throw invalid_argument("split fraction must be in [0, 1]");
  // The tolerance keeps products such as 0.1 * 45 on the half.
  return static_cast<int>(std::floor(fraction * size + 0.5 + 1e-9));
}

SplitPlan stratified_split(const std::vector<Station>& stations, const SplitOptions& options,
                           std::uint64_t seed, int trial) {
  SplitPlan plan;
  plan.trial = trial;
  std::array<std::vector<int>, 3> members;
  for (size_t i = 0; i < stations.size(); ++i) members[static_cast<int>(stations[i].stratum)].push_back(static_cast<int>(i));
  std::vector<bool> held(stations.size(), false);
  for (int s = 0; s < 3; ++s) {
    auto& pool = members[s];
    const int size = static_cast<int>(pool.size());
    const int k = options.counts[s] ? *options.counts[s] : stratum_count(size, options.fraction);
    if (size == 0) {
      plan.warnings.push_back(std::string("stratum ") + stratum_name(static_cast<Stratum>(s)) +
                              " has no stations; it contributes no validation sites");
      continue;
    }
    if (k < 0 || k > size) {
      throw invalid_argument(std::string("validation count for stratum ") + stratum_name(static_cast<Stratum>(s)) +
                             " must be between 0 and " + std::to_string(size));
    }
    // Partial Fisher-Yates.
    StreamRng rng(seed, streams::split, static_cast<std::uint64_t>(trial) * 3 + s);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.uniform() * (size - i));
      std::swap(pool[i], pool[std::min(j, size - 1)]);
    }
    plan.validation[s].assign(pool.begin(), pool.begin() + k);
    std::sort(plan.validation[s].begin(), plan.validation[s].end());
    for (int v : plan.validation[s]) held[v] = true;
  }
  for (size_t i = 0; i < stations.size(); ++i) {
    if (!held[i]) plan.training.push_back(static_cast<int>(i));
  }
  return plan;
}

PredictiveSummary backtransform(const Eigen::Ref<const Eigen::MatrixXd>& log_draws) {
  const Eigen::Index m = log_draws.cols();
  const Eigen::Index S = log_draws.rows();
  if (S < 1) throw invalid_argument("backtransform: no draws");
  PredictiveSummary out;
  out.mean.resize(m);
  out.lower.resize(m);
  out.upper.resize(m);
  std::vector<double> v(static_cast<size_t>(S));
  for (Eigen::Index j = 0; j < m; ++j) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < S; ++k) {
      v[k] = std::exp(log_draws(k, j));
      sum += v[k];
    }
    std::sort(v.begin(), v.end());
    out.mean[j] = sum / static_cast<double>(S);
    out.lower[j] = stats::quantile_sorted(v, 0.025);
    out.upper[j] = stats::quantile_sorted(v, 0.975);
  }
  return out;
}

Metrics compute_metrics(const Eigen::VectorXd& obs, const PredictiveSummary& pred) {
  if (pred.mean.size() != obs.size() || pred.lower.size() != obs.size() || pred.upper.size() != obs.size()) {
    throw invalid_argument("compute_metrics: observations and predictions are not aligned");
  }
  Metrics r;
  r.n = static_cast<int>(obs.size());
  if (r.n == 0) return r;
  const Eigen::ArrayXd d = (pred.mean - obs).array();
  r.bias = d.mean();
  r.rmse = std::sqrt(d.square().mean());
  int inside = 0;
  for (int i = 0; i < r.n; ++i) inside += obs[i] >= pred.lower[i] && obs[i] <= pred.upper[i];
  r.coverage = 100.0 * inside / r.n;
  if (r.n >= 2) {
    const Eigen::ArrayXd x = obs.array() - obs.mean();
    const Eigen::ArrayXd y = pred.mean.array() - pred.mean.mean();
    const double den = std::sqrt((x * x).sum() * (y * y).sum());
    if (den > 0.0) r.correlation = (x * y).sum() / den;
  }
  return r;
}

std::vector<VariogramBin> st_variogram(const std::vector<Residual>& res, const std::vector<geometry::Point>& loc,
                                       double width, double max_distance, int max_lag) {
  if (!(width > 0.0) || !(max_distance > 0.0) || max_lag < 0) {
    throw invalid_argument("st_variogram: bin width, range and lags must be positive");
  }
  const int nb = static_cast<int>(std::ceil(max_distance / width - 1e-12));
  const int ns = static_cast<int>(loc.size());
  // Distance bin per station pair, -1 beyond the range.
  std::vector<int> bin(static_cast<size_t>(ns) * ns);
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < ns; ++j) {
      const double h = std::hypot(loc[i].x - loc[j].x, loc[i].y - loc[j].y);
      const int b = static_cast<int>(std::floor(h / width));
      bin[static_cast<size_t>(i) * ns + j] = h < max_distance && b < nb ? b : -1;
    }
  }
  std::map<int, std::vector<const Residual*>> by_day;
  for (const auto& r : res) {
    if (r.station < 0 || r.station >= ns) throw invalid_argument("st_variogram: station index out of range");
    by_day[r.day].push_back(&r);
  }
  std::vector<double> sum(static_cast<size_t>(nb) * (max_lag + 1), 0.0);
  std::vector<long long> count(sum.size(), 0);
  for (auto it = by_day.begin(); it != by_day.end(); ++it) {
    for (auto jt = it; jt != by_day.end() && jt->first - it->first <= max_lag; ++jt) {
      const int lag = jt->first - it->first;
      const auto& a = it->second;
      const auto& b = jt->second;
      for (size_t i = 0; i < a.size(); ++i) {
        // Same day: each unordered pair once.
        for (size_t j = lag == 0 ? i + 1 : 0; j < b.size(); ++j) {
          const int k = bin[static_cast<size_t>(a[i]->station) * ns + b[j]->station];
          if (k < 0) continue;
          const double d = a[i]->value - b[j]->value;
          sum[static_cast<size_t>(k) * (max_lag + 1) + lag] += 0.5 * d * d;
          ++count[static_cast<size_t>(k) * (max_lag + 1) + lag];
        }
      }
    }
  }
  std::vector<VariogramBin> out;
  for (int k = 0; k < nb; ++k) {
    for (int l = 0; l <= max_lag; ++l) {
      const size_t idx = static_cast<size_t>(k) * (max_lag + 1) + l;
      VariogramBin v;
      v.h_lower = k * width;
      v.h_upper = std::min((k + 1) * width, max_distance);
      v.lag = l;
      v.pairs = count[idx];
      if (count[idx] > 0) v.gamma = sum[idx] / static_cast<double>(count[idx]);
      out.push_back(v);
    }
  }
  return out;
}

void write_variogram(const std::vector<VariogramBin>& bins, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"h_bin", "lag", "gamma", "n_pairs"});
  for (const auto& b : bins) {
    w.cells({csv::format_double(b.h_mid()), std::to_string(b.lag),
             std::isnan(b.gamma) ? std::string() : csv::format_double(b.gamma), std::to_string(b.pairs)});
  }
  w.close();
}

}  // namespace pmspde::validation
