#pragma once

#include "core/sparse_cholesky.hpp"

namespace pmspde::spacetime {

struct Ar1Params {
  double a = 0.0;  // |a| < 1
  int T = 1;
};

// Stationary AR(1) precision with unit innovation variance. Off-diagonal
// entries are stored even when a = 0 so the pattern does not depend on a.
SparseMatrix ar1_precision(const Ar1Params& params);

// log det of ar1_precision: log(1 - a^2) for every T >= 1.
double ar1_log_determinant(double a);

// Q_ar1 (x) Q_s, time-major: entry (t*n + i, t'*n + j) = Q_ar1(t,t') Q_s(i,j).
// Explicit zeros of either factor are kept.
SparseMatrix spacetime_precision(const SparseMatrix& ar1, const SparseMatrix& qs,
                                 long long max_dimension = 50'000'000);

}  // namespace pmspde::spacetime
