#pragma once

#include "core/spaces.hpp"

namespace fusion {

// Score operator A_{Q,U,lambda}: observed-data score of the submodel with
// component scores h. Mean-zero under P whenever h is a valid H element.
ObsFunction apply_A(const FusedModel& m, const HVector& h);

// The decomposition g = gamma(s) + sum_{j,k} { m_k^(j) + n_k^(j) } by
// sequential conditional increments along each source chain.
struct ObsDecomposition {
  std::vector<std::vector<RealTable>> m_parts;  // [j][k] over prefix k+1, supported on the region
  std::vector<std::vector<RealTable>> n_parts;  // [j][k] over prefix k+1, supported off the region
  Vec gamma;                                    // per source
};
ObsDecomposition decompose_obs_function(const FusedModel& m, const ObsFunction& g);
// max |g - reconstruction| over positive-mass cells
double decomposition_residual(const FusedModel& m, const ObsFunction& g,
                              const ObsDecomposition& d);

// Adjoint A*: (A*_Q g, A*_{U^(j)} g, A*_lambda g) per the score-operator lemma.
HVector apply_A_star(const FusedModel& m, const ObsFunction& g);

// Projection of an ideal-space function onto T(Q,Q) (identity-minus-mean when
// the model is nonparametric in Q).
RealTable project_tangent_q(const FusedModel& m, const RealTable& f);

// Cell-coordinate matrices (for dumps and cross-checks).
Mat a_matrix_cells(const FusedModel& m);       // obs-cells x H-cells
Mat a_star_matrix_cells(const FusedModel& m);  // H-cells x obs-cells
Mat information_matrix_cells(const FusedModel& m);

// Coefficient-space matrix of A over an orthonormal H basis.
Mat a_matrix(const FusedModel& m, const HBasis& b);
// Gram matrix <A b_i, A b_j>_{L2(P)}: the information operator in coordinates.
Mat information_gram(const FusedModel& m, const HBasis& b, const Mat& a_coef);

// T(P,P): L2(P)-orthonormal basis of the column space of A over H.
SubspaceBasis tangent_space(const FusedModel& m);

// Labels for dump headers.
std::vector<std::string> obs_cell_labels(const FusedModel& m);
std::vector<std::string> h_cell_labels(const FusedModel& m);

}  // namespace fusion
