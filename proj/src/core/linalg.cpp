#include "core/linalg.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace fusion {

namespace {
double wdot(const Vec& x, const Vec& y, const Vec& w) {
  return (x.array() * y.array() * w.array()).sum();
}
}  // namespace

Mat gram_schmidt(const Mat& cols, const Vec& w) {
  const Eigen::Index n = cols.rows();
  std::vector<Vec> kept;
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    Vec v = cols.col(j);
    const double norm0 = std::sqrt(std::max(0.0, wdot(v, v, w)));
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& q : kept) v -= wdot(v, q, w) * q;
    }
    const double norm1 = std::sqrt(std::max(0.0, wdot(v, v, w)));
    if (norm1 <= 1e-10 * norm0) continue;
    kept.push_back(v / norm1);
  }
  Mat out(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = kept[j];
  return out;
}

int numerical_rank(const Mat& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > rel_tol * sv[0]) ++r;
  return r;
}

LstsqResult lstsq_min_norm(const Mat& a, const Vec& b, double rel_tol) {
  LstsqResult out;
  if (a.cols() == 0) {
    out.x = Vec::Zero(0);
    out.residual = b.norm();
    out.rank = 0;
    return out;
  }
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cut = (sv.size() && sv[0] > 0.0) ? rel_tol * sv[0] : 0.0;
  Vec ub = svd.matrixU().transpose() * b;
  Vec y = Vec::Zero(sv.size());
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cut) {
      y[i] = ub[i] / sv[i];
      ++rank;
    }
  }
  diag::counters().pinv_truncations +=
      static_cast<std::uint64_t>(sv.size() - rank);
  out.x = svd.matrixV() * y;
  out.residual = (a * out.x - b).norm();
  out.rank = rank;
  return out;
}

Mat null_space(const Mat& a, double rel_tol) {
  if (a.cols() == 0) return Mat(0, 0);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = (sv.size() && sv[0] > 0.0) ? rel_tol * sv[0] : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

Mat column_space(const Mat& a, double rel_tol) {
  if (a.cols() == 0 || a.rows() == 0) return Mat(a.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cut = (sv.size() && sv[0] > 0.0) ? rel_tol * sv[0] : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++rank;
  return svd.matrixU().leftCols(rank);
}

Mat subspace_intersection(const Mat& b1, const Mat& b2, const Vec& w, double angle_tol) {
  if (b1.cols() == 0 || b2.cols() == 0) return Mat(b1.rows(), 0);
  Mat cross(b1.cols(), b2.cols());
  for (Eigen::Index i = 0; i < b1.cols(); ++i)
    for (Eigen::Index j = 0; j < b2.cols(); ++j)
      cross(i, j) = wdot(b1.col(i), b2.col(j), w);
  Eigen::JacobiSVD<Mat> svd(cross, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int dim = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] >= 1.0 - angle_tol) ++dim;
  if (dim == 0) return Mat(b1.rows(), 0);
  Mat raw = b1 * svd.matrixU().leftCols(dim);
  return gram_schmidt(raw, w);
}

Mat pinv(const Mat& a, double rel_tol) {
  if (a.rows() == 0 || a.cols() == 0) return Mat(a.cols(), a.rows());
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cut = (sv.size() && sv[0] > 0.0) ? rel_tol * sv[0] : 0.0;
  Vec inv = Vec::Zero(sv.size());
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cut) {
      inv[i] = 1.0 / sv[i];
      ++kept;
    }
  }
  diag::counters().pinv_truncations += static_cast<std::uint64_t>(sv.size() - kept);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x5851f42d4c957f2dULL * (stream + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

}  // namespace fusion
