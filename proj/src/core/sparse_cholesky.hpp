#pragma once

#include <memory>
#include <span>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace pmspde {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

// Scratch space for solves against a shared factor from several threads.
// Each worker owns one; the factor itself is only read.
class SolveWorkspace {
 public:
  SolveWorkspace();
  ~SolveWorkspace();
  SolveWorkspace(const SolveWorkspace&) = delete;
  SolveWorkspace& operator=(const SolveWorkspace&) = delete;

  struct Impl;
  Impl& impl() { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

// Supernodal sparse Cholesky (CHOLMOD) of a symmetric positive definite
// matrix given by its lower triangle. The symbolic analysis is done once per
// sparsity pattern; refactorizations only replace values.
class SparseCholesky {
 public:
  SparseCholesky();
  ~SparseCholesky();
  SparseCholesky(SparseCholesky&&) noexcept;
  SparseCholesky& operator=(SparseCholesky&&) noexcept;

  // `lower` must be compressed with sorted inner indices; only entries with
  // row >= col are read.
  void analyze(const SparseMatrix& lower);

  // Returns false when the matrix is not positive definite.
  bool factorize(const SparseMatrix& lower);
  // Values laid out as the nonzeros of the pattern passed to analyze().
  bool factorize(std::span<const double> values);

  // Deep copy of the pattern and the current factor.
  SparseCholesky clone() const;

  bool analyzed() const;
  bool factorized() const;
  int size() const;

  double log_determinant() const;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, SolveWorkspace& ws) const;

  // Returns P' L^{-T} z. For z ~ N(0, I) the result is distributed as
  // N(0, A^{-1}).
  Eigen::VectorXd sample_transform(const Eigen::VectorXd& z) const;
  Eigen::VectorXd sample_transform(const Eigen::VectorXd& z, SolveWorkspace& ws) const;
  // Column-wise transform of a block; faster than one column at a time.
  Eigen::MatrixXd sample_transform_block(const Eigen::MatrixXd& z, SolveWorkspace& ws) const;

  // diag(A^{-1}) by the Takahashi recursion on the factor pattern.
  Eigen::VectorXd inverse_diagonal() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Lower triangle (row >= col) of a symmetric matrix, compressed.
SparseMatrix lower_triangle(const SparseMatrix& symmetric);

}  // namespace pmspde
