#include "core/sparse_cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include <cholmod.h>

#include "core/error.hpp"

namespace pmspde {

namespace {

void start_common(cholmod_common& c) {
  cholmod_start(&c);
  c.print = 0;
  c.error_handler = nullptr;
  c.final_ll = 1;
  c.supernodal = CHOLMOD_AUTO;
  c.quick_return_if_not_posdef = 1;
}

cholmod_dense* dense_from(const Eigen::MatrixXd& v, cholmod_common* c) {
  cholmod_dense* d = cholmod_allocate_dense(v.rows(), v.cols(), v.rows(), CHOLMOD_REAL, c);
  if (d == nullptr) throw numerical_error("cholmod: dense allocation failed");
  std::memcpy(d->x, v.data(), sizeof(double) * v.size());
  return d;
}

Eigen::MatrixXd matrix_from(cholmod_dense* d, cholmod_common* c) {
  Eigen::MatrixXd out(d->nrow, d->ncol);
  std::memcpy(out.data(), d->x, sizeof(double) * out.size());
  cholmod_free_dense(&d, c);
  return out;
}

}  // namespace

struct SolveWorkspace::Impl {
  cholmod_common common{};
  Impl() { start_common(common); }
  ~Impl() { cholmod_finish(&common); }
};

SolveWorkspace::SolveWorkspace() : impl_(std::make_unique<Impl>()) {}
SolveWorkspace::~SolveWorkspace() = default;

struct SparseCholesky::Impl {
  mutable cholmod_common common{};
  cholmod_sparse* matrix = nullptr;
  cholmod_factor* factor = nullptr;
  bool ok = false;

  Impl() { start_common(common); }
  ~Impl() {
    if (factor) cholmod_free_factor(&factor, &common);
    if (matrix) cholmod_free_sparse(&matrix, &common);
    cholmod_finish(&common);
  }

  Eigen::VectorXd solve(int system, const Eigen::VectorXd& rhs, cholmod_common* c) const {
    if (!ok) throw numerical_error("cholesky: solve requested without a valid factor");
    if (rhs.size() != static_cast<Eigen::Index>(factor->n)) {
      throw invalid_argument("cholesky: right-hand side has wrong length");
    }
    cholmod_dense* b = dense_from(rhs, c);
    cholmod_dense* x = cholmod_solve(system, factor, b, c);
    cholmod_free_dense(&b, c);
    if (x == nullptr) throw numerical_error("cholmod: solve failed");
    return matrix_from(x, c);
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& z, cholmod_common* c) const {
    if (!ok) throw numerical_error("cholesky: solve requested without a valid factor");
    if (z.rows() != static_cast<Eigen::Index>(factor->n)) throw invalid_argument("cholesky: block has wrong length");
    cholmod_dense* b = dense_from(z, c);
    cholmod_dense* y = cholmod_solve(CHOLMOD_Lt, factor, b, c);
    cholmod_free_dense(&b, c);
    if (y == nullptr) throw numerical_error("cholmod: solve failed");
    cholmod_dense* x = cholmod_solve(CHOLMOD_Pt, factor, y, c);
    cholmod_free_dense(&y, c);
    if (x == nullptr) throw numerical_error("cholmod: solve failed");
    return matrix_from(x, c);
  }
};

SparseCholesky::SparseCholesky() : impl_(std::make_unique<Impl>()) {}
SparseCholesky::~SparseCholesky() = default;
SparseCholesky::SparseCholesky(SparseCholesky&&) noexcept = default;
SparseCholesky& SparseCholesky::operator=(SparseCholesky&&) noexcept = default;

void SparseCholesky::analyze(const SparseMatrix& lower) {
  if (lower.rows() != lower.cols()) throw invalid_argument("cholesky: matrix not square");
  if (!lower.isCompressed()) throw invalid_argument("cholesky: matrix not compressed");
  auto& c = impl_->common;
  if (impl_->factor) cholmod_free_factor(&impl_->factor, &c);
  if (impl_->matrix) cholmod_free_sparse(&impl_->matrix, &c);
  impl_->ok = false;

  const auto n = static_cast<size_t>(lower.rows());
  const auto nnz = static_cast<size_t>(lower.nonZeros());
  cholmod_sparse* a = cholmod_allocate_sparse(n, n, nnz, 1, 1, -1, CHOLMOD_REAL, &c);
  if (a == nullptr) throw numerical_error("cholmod: sparse allocation failed");
  std::memcpy(a->p, lower.outerIndexPtr(), sizeof(int) * (n + 1));
  std::memcpy(a->i, lower.innerIndexPtr(), sizeof(int) * nnz);
  std::memcpy(a->x, lower.valuePtr(), sizeof(double) * nnz);
  impl_->matrix = a;

  impl_->factor = cholmod_analyze(a, &c);
  if (impl_->factor == nullptr) throw numerical_error("cholmod: symbolic analysis failed");
}

bool SparseCholesky::factorize(const SparseMatrix& lower) {
  if (!analyzed()) analyze(lower);
  if (lower.nonZeros() != static_cast<Eigen::Index>(impl_->matrix->nzmax)) {
    analyze(lower);
  }
  return factorize(std::span<const double>(lower.valuePtr(), lower.nonZeros()));
}

bool SparseCholesky::factorize(std::span<const double> values) {
  if (!analyzed()) throw invalid_argument("cholesky: factorize before analyze");
  if (values.size() != impl_->matrix->nzmax) {
    throw invalid_argument("cholesky: value array does not match the analyzed pattern");
  }
  auto& c = impl_->common;
  std::memcpy(impl_->matrix->x, values.data(), sizeof(double) * values.size());
  for (double v : values) {
    if (!std::isfinite(v)) {
      impl_->ok = false;
      return false;
    }
  }
  const int status = cholmod_factorize(impl_->matrix, impl_->factor, &c);
  impl_->ok = status == 1 && c.status == CHOLMOD_OK && impl_->factor->minor == impl_->factor->n;
  return impl_->ok;
}

SparseCholesky SparseCholesky::clone() const {
  SparseCholesky out;
  auto& c = out.impl_->common;
  if (impl_->matrix) {
    out.impl_->matrix = cholmod_copy_sparse(impl_->matrix, &c);
    if (out.impl_->matrix == nullptr) throw numerical_error("cholmod: copy failed");
  }
  if (impl_->factor) {
    out.impl_->factor = cholmod_copy_factor(impl_->factor, &c);
    if (out.impl_->factor == nullptr) throw numerical_error("cholmod: copy failed");
  }
  out.impl_->ok = impl_->ok;
  return out;
}

bool SparseCholesky::analyzed() const { return impl_->factor != nullptr; }
bool SparseCholesky::factorized() const { return impl_->ok; }
int SparseCholesky::size() const {
  return impl_->matrix ? static_cast<int>(impl_->matrix->nrow) : 0;
}

double SparseCholesky::log_determinant() const {
  if (!impl_->ok) throw numerical_error("cholesky: log determinant of a failed factor");
  const cholmod_factor* L = impl_->factor;
  const auto* x = static_cast<const double*>(L->x);
  double sum = 0.0;
  if (L->is_super) {
    const auto* super = static_cast<const int*>(L->super);
    const auto* pi = static_cast<const int*>(L->pi);
    const auto* px = static_cast<const int*>(L->px);
    for (size_t s = 0; s < L->nsuper; ++s) {
      const int ncols = super[s + 1] - super[s];
      const int nrows = pi[s + 1] - pi[s];
      const double* block = x + px[s];
      for (int j = 0; j < ncols; ++j) sum += std::log(block[j + static_cast<size_t>(j) * nrows]);
    }
  } else {
    const auto* p = static_cast<const int*>(L->p);
    for (size_t j = 0; j < L->n; ++j) sum += std::log(x[p[j]]);
  }
  return 2.0 * sum;
}

Eigen::VectorXd SparseCholesky::solve(const Eigen::VectorXd& rhs) const {
  return impl_->solve(CHOLMOD_A, rhs, &impl_->common);
}

Eigen::VectorXd SparseCholesky::solve(const Eigen::VectorXd& rhs, SolveWorkspace& ws) const {
  return impl_->solve(CHOLMOD_A, rhs, &ws.impl().common);
}

Eigen::VectorXd SparseCholesky::sample_transform(const Eigen::VectorXd& z) const {
  return impl_->transform(z, &impl_->common);
}

Eigen::VectorXd SparseCholesky::sample_transform(const Eigen::VectorXd& z,
                                                 SolveWorkspace& ws) const {
  return impl_->transform(z, &ws.impl().common);
}

Eigen::MatrixXd SparseCholesky::sample_transform_block(const Eigen::MatrixXd& z, SolveWorkspace& ws) const {
  return impl_->transform(z, &ws.impl().common);
}

Eigen::VectorXd SparseCholesky::inverse_diagonal() const {
  if (!impl_->ok) throw numerical_error("cholesky: inverse diagonal of a failed factor");
  auto& c = impl_->common;
  cholmod_factor* L = cholmod_copy_factor(impl_->factor, &c);
  if (L == nullptr || !cholmod_change_factor(CHOLMOD_REAL, 1, 0, 1, 1, L, &c)) {
    if (L) cholmod_free_factor(&L, &c);
    throw numerical_error("cholmod: conversion to simplicial factor failed");
  }
  const int n = static_cast<int>(L->n);
  const auto* Lp = static_cast<const int*>(L->p);
  const auto* Li = static_cast<const int*>(L->i);
  const auto* Lx = static_cast<const double*>(L->x);
  const auto* Lnz = static_cast<const int*>(L->nz);
  std::vector<int> perm(n);
  if (L->Perm) {
    std::memcpy(perm.data(), L->Perm, sizeof(int) * n);
  } else {
    std::iota(perm.begin(), perm.end(), 0);
  }

  // Sorted copy of the column structure (diagonal first).
  std::vector<int> start(n + 1, 0);
  for (int j = 0; j < n; ++j) start[j + 1] = start[j] + Lnz[j];
  std::vector<int> rows(start[n]);
  std::vector<double> vals(start[n]);
  std::vector<int> order;
  for (int j = 0; j < n; ++j) {
    const int cnt = Lnz[j];
    order.resize(cnt);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return Li[Lp[j] + a] < Li[Lp[j] + b]; });
    for (int k = 0; k < cnt; ++k) {
      rows[start[j] + k] = Li[Lp[j] + order[k]];
      vals[start[j] + k] = Lx[Lp[j] + order[k]];
    }
  }
  cholmod_free_factor(&L, &c);

  std::vector<double> sigma(start[n], 0.0);
  auto lookup = [&](int r, int col) -> double {
    if (r < col) std::swap(r, col);
    const auto first = rows.begin() + start[col];
    const auto last = rows.begin() + start[col + 1];
    const auto it = std::lower_bound(first, last, r);
    if (it == last || *it != r) return 0.0;
    return sigma[static_cast<size_t>(it - rows.begin())];
  };

  for (int j = n - 1; j >= 0; --j) {
    const int b = start[j];
    const int e = start[j + 1];
    const double ljj = vals[b];
    for (int q = e - 1; q >= b; --q) {
      const int i = rows[q];
      double acc = (i == j) ? 1.0 / ljj : 0.0;
      for (int k = b + 1; k < e; ++k) acc -= vals[k] * lookup(rows[k], i);
      sigma[q] = acc / ljj;
    }
  }

  Eigen::VectorXd out(n);
  for (int k = 0; k < n; ++k) {
    out[perm[k]] = sigma[start[k]];
  }
  return out;
}

SparseMatrix lower_triangle(const SparseMatrix& symmetric) {
  SparseMatrix lower = symmetric.triangularView<Eigen::Lower>();
  lower.makeCompressed();
  return lower;
}

}  // namespace pmspde
