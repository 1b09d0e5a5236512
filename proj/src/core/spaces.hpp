#pragma once

#include "core/model.hpp"

namespace fusion {

// Real function on the observed sample space ⋃_j {j} x range(Z^(j)).
struct ObsFunction {
  std::vector<RealTable> per_source;

  static ObsFunction zeros(const FusedModel& m);
  std::size_t total_cells() const;
};

double obs_mean(const FusedLaw& p, const ObsFunction& f);
double obs_inner(const FusedLaw& p, const ObsFunction& f, const ObsFunction& g);
double obs_variance(const FusedLaw& p, const ObsFunction& f);
ObsFunction obs_add(const ObsFunction& a, const ObsFunction& b, double scale_b = 1.0);

Vec flatten_obs(const ObsFunction& f);
ObsFunction unflatten_obs(const FusedModel& m, const Vec& v);
// lambda_j * p_j(z), concatenated: the L2(P) weights of the flattened layout.
Vec obs_weights(const FusedModel& m);

// Element of H = T(Q,Q) x Π_j L2_0(U^(j)) x L2_0(lambda).
struct HVector {
  RealTable q;                // over the ideal space
  std::vector<RealTable> u;   // over each source's Z^(j)
  Vec lam;                    // one entry per source

  static HVector zeros(const FusedModel& m);
};

double h_inner(const FusedModel& m, const HVector& a, const HVector& b);
double h_norm(const FusedModel& m, const HVector& a);
// component means within 1e-10 and, for restricted models, membership of h_q in T(Q,Q)
void validate_hvector(const FusedModel& m, const HVector& h, double tolerance = tol::mean_zero);

Vec flatten_h(const HVector& h);
HVector unflatten_h(const FusedModel& m, const Vec& v);
Vec h_weights(const FusedModel& m);

// Orthonormal basis of a subspace of a weighted L2 space. `ambient` is a
// human-readable tag recorded for dumps.
struct SubspaceBasis {
  std::string ambient;
  Vec weight;
  Mat columns;
  std::size_t dim() const { return static_cast<std::size_t>(columns.cols()); }
};

// D_k^(j)(Q): functions of z̄_k vanishing off the alignment region with zero
// Q-conditional mean given z̄_{k-1}. Vectors live on the ideal space, ambient L2(Q).
SubspaceBasis basis_D(const FusedModel& m, std::size_t j, std::size_t k);

// R_k^(j)(P): the complement-region mirror under P(.|S=j), on the source space.
SubspaceBasis basis_R(const FusedModel& m, std::size_t j, std::size_t k);

// Conditional-increment projections (exact, no basis needed).
// project_D: I(z̄_{k-1} in region) * (E_Q[f|z̄_k] - E_Q[f|z̄_{k-1}]) over prefix k+1.
RealTable project_D(const FusedModel& m, std::size_t j, std::size_t k, const RealTable& f_ideal);
// project_R under the measure `law` (U^(j) for scores, P(.|S=j) for decompositions).
RealTable project_R(const FusedModel& m, std::size_t j, std::size_t k, const RealTable& f_source,
                    const FinitePmf& law);

// Orthonormal coefficient bases for the three H components.
struct HBasis {
  Mat q_cols;               // T(Q,Q) basis (or L2_0(Q) when nonparametric)
  std::vector<Mat> u_cols;  // L2_0(U^(j)) bases
  Mat lam_cols;             // L2_0(lambda) basis
  std::size_t q_dim() const { return static_cast<std::size_t>(q_cols.cols()); }
  std::size_t dim() const;
  HVector member(const FusedModel& m, const Vec& coef) const;
  Vec coefficients(const FusedModel& m, const HVector& h) const;
};
HBasis h_basis(const FusedModel& m);

// Orthonormal basis of L2_0(p) built from centered indicators (deterministic).
Mat l20_basis(const FinitePmf& p);

}  // namespace fusion
