#pragma once

#include "core/tables.hpp"

namespace fusion {

// Orthonormalize the columns of `cols` under the diagonal inner product
// <x,y> = sum_i x_i y_i w_i. Modified Gram-Schmidt with one reorthogonalization
// pass; columns whose remainder falls below 1e-10 of their original norm are
// dropped. Deterministic: no pivoting.
Mat gram_schmidt(const Mat& cols, const Vec& w);

// Numerical rank with the module-wide relative singular-value threshold.
int numerical_rank(const Mat& m, double rel_tol = tol::rank_rel);

// Minimum-norm least-squares solution of A x ~= b via SVD, truncating singular
// values below rel_tol * sigma_max. Also reports the residual norm ||Ax - b||.
struct LstsqResult {
  Vec x;
  double residual;
  int rank;
};
LstsqResult lstsq_min_norm(const Mat& a, const Vec& b, double rel_tol = tol::rank_rel);

// Orthonormal basis (plain Euclidean) of the null space of A.
Mat null_space(const Mat& a, double rel_tol = tol::rank_rel);

// Orthonormal basis (plain Euclidean) of the column space of A.
Mat column_space(const Mat& a, double rel_tol = tol::rank_rel);

// Basis of span(B1) ∩ span(B2) where both have w-orthonormal columns; result
// columns are w-orthonormal. Detection via principal angles: cos(theta) >= 1 - angle_tol.
Mat subspace_intersection(const Mat& b1, const Mat& b2, const Vec& w,
                          double angle_tol = tol::rank_rel);

// Moore-Penrose pseudoinverse with relative truncation.
Mat pinv(const Mat& a, double rel_tol = tol::rank_rel);

// splitmix64, used to derive independent per-replication seeds.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fusion
