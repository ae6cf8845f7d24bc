#include "core/spacetime.hpp"

#include <cmath>

#include "core/error.hpp"

namespace pmspde::spacetime {

SparseMatrix ar1_precision(const Ar1Params& p) {
  if (!(std::abs(p.a) < 1.0)) throw invalid_argument("ar1_precision: require |a| < 1");
  if (p.T < 1) throw invalid_argument("ar1_precision: require T >= 1");
  const int T = p.T;
  SparseMatrix q(T, T);
  if (T == 1) {
    q.insert(0, 0) = 1.0 - p.a * p.a;
    q.makeCompressed();
    return q;
  }
  std::vector<Triplet> trip;
  trip.reserve(3 * T);
  for (int t = 0; t < T; ++t) {
    const bool end = (t == 0 || t == T - 1);
    trip.emplace_back(t, t, end ? 1.0 : 1.0 + p.a * p.a);
    if (t + 1 < T) {
      trip.emplace_back(t, t + 1, -p.a);
      trip.emplace_back(t + 1, t, -p.a);
    }
  }
  q.setFromTriplets(trip.begin(), trip.end());
  q.makeCompressed();
  return q;
}

double ar1_log_determinant(double a) { return std::log1p(-a * a); }

SparseMatrix spacetime_precision(const SparseMatrix& ar1, const SparseMatrix& qs,
                                 long long max_dimension) {
  if (ar1.rows() != ar1.cols() || qs.rows() != qs.cols()) {
    throw invalid_argument("spacetime_precision: inputs must be square");
  }
  const long long T = ar1.rows();
  const long long n = qs.rows();
  if (T * n > max_dimension) {
    throw invalid_argument("spacetime_precision: dimension " + std::to_string(T * n) +
                           " exceeds the configured limit " + std::to_string(max_dimension));
  }
  const int N = static_cast<int>(T * n);
  SparseMatrix out(N, N);
  std::vector<int> col_nnz(N, 0);
  for (int tc = 0; tc < T; ++tc) {
    const int ar1_nnz = ar1.outerIndexPtr()[tc + 1] - ar1.outerIndexPtr()[tc];
    for (int jc = 0; jc < n; ++jc) {
      col_nnz[tc * n + jc] = ar1_nnz * (qs.outerIndexPtr()[jc + 1] - qs.outerIndexPtr()[jc]);
    }
  }
  out.reserve(col_nnz);
  // Column (tc, jc): rows ordered by tr then ir, which is sorted.
  for (int tc = 0; tc < T; ++tc) {
    for (int jc = 0; jc < n; ++jc) {
      const int col = static_cast<int>(tc * n + jc);
      for (SparseMatrix::InnerIterator at(ar1, tc); at; ++at) {
        for (SparseMatrix::InnerIterator qt(qs, jc); qt; ++qt) {
          out.insert(static_cast<int>(at.row() * n + qt.row()), col) = at.value() * qt.value();
        }
      }
    }
  }
  out.makeCompressed();
  return out;
}

}  // namespace pmspde::spacetime
