#pragma once

#include "core/influence.hpp"

namespace fusion {

enum class FrameworkKind {
  Prevalence,
  TSIV,
  TransportI,
  TransportII,
  TransportIIIa,
  TransportIIIb,
  GenericUBPoint,
  GenericUBFull,
};

FrameworkKind framework_kind_from_string(const std::string& s);
std::string to_string(FrameworkKind k);
std::vector<FrameworkKind> all_framework_kinds();

struct FrameworkParams {
  // transport family
  std::vector<std::string> l_axes;
  std::string a_axis, y_axis;
  std::vector<std::string> l0;  // level labels over l_axes (scenario iii.b anchor)
  // prevalence
  std::vector<std::string> x_axes;
  std::string v_axis;
  // tsiv
  std::string tsiv_l, tsiv_x, tsiv_y;
  // generic (U,B) frameworks
  std::vector<std::string> u_axes, b_axes;
  std::vector<std::string> u0;      // anchor levels over u_axes
  std::vector<std::string> u_star;  // demo target Q(U=u*|B=b*)
  std::vector<std::string> b_star;
};
FrameworkParams parse_framework_params(const std::string& framework_json);
std::string framework_params_to_json(FrameworkKind k, const FrameworkParams& p);

// A framework bound to an observed law. Q is the canonical identified (or
// canonically completed) ideal law reconstructed from the observed one, so
// the same instance works at exact laws and at (possibly model-disobedient)
// empirical laws.
struct Framework {
  FrameworkKind kind;
  FrameworkParams params;
  AlignmentSpec spec;
  FusedLaw law;
  FinitePmf q;
};

// The alignment collection each framework kind assumes, over the given ideal
// axes. Source 1 comes first in the paper's ordering for that example.
AlignmentSpec canonical_framework_spec(FrameworkKind kind, const FrameworkParams& params,
                                       const AxisSet& ideal);

// `validate` additionally requires check_alignment(law, q, spec) to pass.
// `q_hint` skips the reconstruction (degenerate laws where the anchor formula
// is undefined, e.g. the deterministic-map demonstration).
Framework bind_framework(FrameworkKind kind, const FrameworkParams& params,
                         const AlignmentSpec& spec, const FusedLaw& law, bool validate = true,
                         const FinitePmf* q_hint = nullptr);
Framework bind_framework(const ModelFile& file, bool validate = true);
Framework rebind(const Framework& fw, const FusedLaw& new_law);

double framework_phi(const Framework& fw);
// The framework's closed-form influence function (the anchor member when the
// family is nontrivial); for TSIV this is the phi component.
ObsFunction framework_if(const Framework& fw);
ObsFunction framework_eif(const Framework& fw);
RealTable framework_ideal_if(const Framework& fw);  // psi^1_Q at the reconstructed Q
// Strictly aligned operator-side binding (exact laws only). TSIV attaches its
// computed T(Q,Q) basis.
FusedModel framework_model(const Framework& fw);

// --- prevalence (misclassified disease + validation study) ---

// m_Q(x,v) = (v - E_Q[V|Y=0,x]) / (E_Q[V|Y=1,x] - E_Q[V|Y=0,x]); the unique
// solution of E_Q[m(X,V)|X,Y] = Y. Denominators below 1e-6 are rejected.
RealTable mq(const FinitePmf& q, const FrameworkParams& p);
double phi_prevalence(const Framework& fw);
ObsFunction if_prevalence(const Framework& fw);
// General ideal IF psi1(x,v,y) = a(x) + b(x) v + c(x) y + d(x) v y.
struct PrevalenceIdealIF {
  RealTable a, b, c, d;  // over the X sub-space
};
ObsFunction prevalence_if_general(const Framework& fw, const PrevalenceIdealIF& psi);

// --- two-sample IV ---

struct TsivFit {
  double tau = 0.0;
  double phi = 0.0;
  double moment_residual = 0.0;  // weighted residual of the moment equation
};
TsivFit tsiv_solve(const Framework& fw);
// t maps L-cells to R^2; the two IF components returned separately.
struct TsivIF {
  ObsFunction tau_comp, phi_comp;
};
TsivIF tsiv_if(const Framework& fw, const Mat& t);  // t: |L| x 2
TsivIF tsiv_eif(const Framework& fw);
Mat tsiv_t_eff(const Framework& fw);
Mat tsiv_canonical_t(const Framework& fw);  // t(l) = (1, E_{P(.|S=2)}[X|l])
// the member corresponding to the gradient B^{-1}(1, E_Q[X|l]) eps under the
// canonical completion q(l) = p(l|S=1)
Mat tsiv_t_for_canonical_gradient(const Framework& fw);
Mat tsiv_efficiency_bound(const Framework& fw);  // 2x2, = covariance of tsiv_eif
ObsFunction tsiv_epsilon(const Framework& fw);
// T(Q,Q) for the moment-restricted ideal model, computed numerically.
Mat tsiv_tangent_basis(const FinitePmf& q, const FrameworkParams& p);
// alpha(Q), psi(Q) under an ideal law satisfying the moment model.
TsivFit tsiv_solve_ideal(const FinitePmf& q, const FrameworkParams& p);

// --- ATE transport ---

RealTable aipw_ideal_if(const FinitePmf& q, const FrameworkParams& p);
double ate_ideal(const FinitePmf& q, const FrameworkParams& p);
double ate_transport_phi(const Framework& fw);
ObsFunction transport_if(const Framework& fw);

// --- generic (U,B) frameworks ---

// Unique IF when only Q(B|U=u0) aligns in the second source.
ObsFunction generic_ub_if(const Framework& fw, const RealTable& psi1_q);
// Discrete-U efficient influence function via the matrix-pencil solve.
struct GenericUbEif {
  ObsFunction phi_eff;
  RealTable h;  // over the ideal space: the information-equation solution
};
GenericUbEif generic_ub_eif_discrete(const Framework& fw, const RealTable& psi1_q);

// q(u,b) from q(u|b) and q(b|u0); p1_cond over [b...,u...], p2_cond over [b...].
// The result lives on [b...,u...].
FinitePmf reconstruct_joint(const RealTable& p1_cond, const RealTable& p2_cond,
                            const std::vector<std::string>& u_axes,
                            const std::vector<std::string>& u0);

struct NaiveObedientReport {
  bool invertible_map = false;
  double var_naive = 0.0;
  double var_eff = 0.0;
  double gap = 0.0;
  double incompatibility_residual = 0.0;  // joint least-squares residual of (s1)+(s2)
  double grad_residual_naive = 0.0;
  double grad_residual_eff = 0.0;
  double phi_value = 0.0;
};
// The one-step caveat demonstration for psi(Q) = Q(U=u*|B=b*).
NaiveObedientReport naive_vs_obedient_demo(const Framework& fw);

// --- Appendix-C data generating process ---

// The two-source (L1,L2,A,Y) law used by the efficiency figure; carries
// framework parameters for the requested transport scenario.
ModelFile appendix_c_model(double p_s1, FrameworkKind scenario = FrameworkKind::TransportII);

// numeric value of a level label (frameworks treat binary axes as 0/1)
double level_value(const Axis& axis, std::size_t idx);
RealTable axis_values(const AxisSet& space, const std::string& axis);

}  // namespace fusion
