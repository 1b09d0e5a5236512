#pragma once

#include "core/score.hpp"

namespace fusion {

// An ideal influence function split into aligned-block components:
// psi1 = sum_{j,k} m_k^(j) with m_k^(j) in D_k^(j)(Q).
struct IFDecomposition {
  std::vector<std::vector<RealTable>> m_parts;  // [j][k] over prefix k+1
  RealTable psi1;                               // over the ideal space
};

struct DecomposeOutcome {
  bool ok = false;
  IFDecomposition dec;
  double residual = 0.0;             // worst relative least-squares residual across steps
  std::vector<RealTable> f_tilde;    // per-step solutions, over the ideal space
};

// Algorithm DECOMPOSE. FAIL (ok=false) when a step's least-squares residual
// exceeds 1e-8 relative to ||psi1||_Q; the minimum-norm solution is taken at
// every step. `forced_f` overrides the per-step solutions (completeness tests).
DecomposeOutcome decompose_algorithm(const FusedModel& m, const RealTable& psi1,
                                     const std::vector<RealTable>* forced_f = nullptr);

// Two-source shortcut: one linear solve for m^(2) in ⊕_k D_k^(2)(Q).
DecomposeOutcome two_source_solve(const FusedModel& m, const RealTable& psi1);

// phi1(o) = sum_j 1(s=j)/P(S=j) sum_k dQ/dP(.|S=j)(z̄_{k-1}) m_k^(j)(z̄_k).
ObsFunction lift_to_observed(const FusedModel& m, const IFDecomposition& dec);

// Max component norm of A* phi1 - (Pi[psi1|T(Q,Q)], 0, 0).
double gradient_equation_residual(const FusedModel& m, const ObsFunction& phi1,
                                  const RealTable& psi1);

// Basis of ⊕_k D_k^(1)(Q) ∩ ⊕_k D_k^(2)(Q); the family of observed IFs that
// correspond to one ideal IF is phi1 plus the signed ratio-weighted lift of
// any member of this space.
SubspaceBasis d_intersection(const FusedModel& m);
ObsFunction family_member(const FusedModel& m, const ObsFunction& phi1, const RealTable& f);

// Orthogonal L2(P)-projection onto T(P,P).
ObsFunction eif_project(const FusedModel& m, const ObsFunction& phi1);

struct EifSolveResult {
  HVector h;
  ObsFunction phi_eff;
  double range_residual = 0.0;     // information-equation in-range residual
  double gradient_residual = 0.0;  // verification of the lifted solution
};
// Information-operator route: solve A*A h = (psi1_eff, 0, 0) by pseudoinverse
// restricted to the orthocomplement of the null space. Throws NumericFailure
// ("not in range") when the residual exceeds the rank tolerance.
EifSolveResult eif_solve(const FusedModel& m, const RealTable& psi1_eff);

struct PathwiseWitness {
  bool differentiable = false;
  RealTable witness;  // the decomposable member of the ideal-IF family
  DecomposeOutcome outcome;
};
// The ideal-IF family is psi1_eff + span(perp_basis) with perp_basis spanning
// the relevant part of T(Q,Q)^perp. Reports whether some member decomposes.
PathwiseWitness check_pathwise_differentiable(const FusedModel& m, const RealTable& psi1_eff,
                                              const Mat& perp_basis);

}  // namespace fusion
