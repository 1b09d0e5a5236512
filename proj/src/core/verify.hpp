#pragma once

#include "core/estimation.hpp"

namespace fusion {

// Multiplicative tilts mass*(1 + t h) of each model component; exact scores
// at t = 0 with no renormalization needed.
struct TiltedTriple {
  FinitePmf q;
  std::vector<FinitePmf> u;
  Vec lambda;
};
TiltedTriple tilt_triple(const FusedModel& m, const HVector& h, double t);
FusedLaw tilted_law(const FusedModel& m, const HVector& h, double t);

// Largest safe |t|: 0.5 / max|h| across components.
double submodel_t_max(const FusedModel& m, const HVector& h);

// Central-difference pathwise derivative of the framework functional along
// the tilt, against <phi1, A h>_{L2(P)}. Independent of the influence
// machinery: only phi evaluations and inner products. Falls back to a
// Richardson step when the plain central difference misses 1e-6.
struct PathwiseResult {
  double derivative = 0.0;
  double pairing = 0.0;
  double residual = 0.0;
  bool richardson = false;
};
PathwiseResult pathwise_check(const Framework& fw, const FusedModel& m, const ObsFunction& phi1,
                              const HVector& h, double step);

// Finite-difference score check for the tilt itself: max over components of
// the L2 distance between (dP_t/dP - 1)/t and the score at step t.
double tilt_score_residual(const FusedModel& m, const HVector& h, double t);

// The two-alignment binary-outcome model where I - A*A expands some
// directions even though the information operator is invertible on the
// orthocomplement of its null space.
struct ContractionReport {
  double expansion_ratio = 0.0;    // ||(I - A*A) h|| / ||h||
  double predicted_factor = 0.0;   // |1 - P(Y=1|S=1) P(S=1) / Q(Y=1)|
  double inverse_residual = 0.0;   // explicit-inverse verification
  double condition_number = 0.0;   // information operator on Null-perp
  bool non_contraction = false;
  bool boundary = false;           // factor within 1e-9 of 1
};
ContractionReport contraction_counterexample(double ratio_target);

// Efficient-influence-function variances of the three transport scenarios on
// the appendix data-generating process, over a grid of P(S=1).
struct AreRow {
  double p_s1 = 0.0;
  double var_iiia = 0.0;
  double var_ii = 0.0;
  double var_iiib = 0.0;
  double are_ii = 0.0;
  double are_iiib = 0.0;
};
std::vector<AreRow> are_curves(const std::vector<double>& s1_grid);
std::vector<double> default_s1_grid();  // 0.05, 0.10, ..., 0.95
std::string are_csv(const std::vector<AreRow>& rows);

}  // namespace fusion
