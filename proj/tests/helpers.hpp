#pragma once

#include <random>

#include "core/estimation.hpp"
#include "core/frameworks.hpp"
#include "core/verify.hpp"

namespace fusion::testing {

inline std::mt19937_64 rng_for(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Vec random_positive(std::mt19937_64& rng, std::size_t n, double spread = 1.0) {
  std::normal_distribution<double> g;
  Vec w(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) w[static_cast<Eigen::Index>(i)] = std::exp(spread * g(rng));
  return w;
}

inline FinitePmf random_pmf(std::mt19937_64& rng, const AxisSet& space, double spread = 1.0) {
  return FinitePmf::normalized(space, random_positive(rng, space.cell_count(), spread));
}

inline RealTable random_table(std::mt19937_64& rng, const AxisSet& space) {
  std::normal_distribution<double> g;
  Vec v(static_cast<Eigen::Index>(space.cell_count()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
  return RealTable(space, std::move(v));
}

inline RealTable random_mean_zero(std::mt19937_64& rng, const FinitePmf& p) {
  RealTable t = random_table(rng, p.space());
  t.values.array() -= mean(p, t);
  return t;
}

// Random strictly positive U laws + lambda, chained through the alignments.
inline FusedLaw random_aligned_law(std::mt19937_64& rng, const FinitePmf& q,
                                   const AlignmentSpec& spec, double spread = 0.7) {
  std::vector<FinitePmf> u;
  for (const auto& s : spec.sources) {
    SourceStructure st = build_structure(q.space(), s);
    u.push_back(random_pmf(rng, st.z_space, spread));
  }
  Vec lambda = random_positive(rng, spec.source_count(), 0.3);
  lambda /= lambda.sum();
  return assemble_observed_law(q, u, lambda, spec);
}

inline HVector random_hvector(std::mt19937_64& rng, const FusedModel& m) {
  HVector h = HVector::zeros(m);
  h.q = random_mean_zero(rng, m.q());
  if (!m.q_nonparametric()) {
    const Mat& b = m.tangent_q_basis();
    Vec coef = b.transpose() * (m.q().mass().asDiagonal() * h.q.values);
    h.q.values = b * coef;
  }
  for (std::size_t j = 0; j < m.source_count(); ++j)
    h.u[j] = random_mean_zero(rng, m.u()[j]);
  std::normal_distribution<double> g;
  Vec lam(static_cast<Eigen::Index>(m.source_count()));
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam[i] = g(rng);
  lam.array() -= (lam.array() * m.p().lambda.array()).sum();
  h.lam = lam;
  return h;
}

inline ObsFunction random_obs_mean_zero(std::mt19937_64& rng, const FusedModel& m) {
  ObsFunction f = ObsFunction::zeros(m);
  for (auto& t : f.per_source) t = random_table(rng, t.space);
  double mu = obs_mean(m.p(), f);
  for (auto& t : f.per_source) t.values.array() -= mu;
  return f;
}

// A small two-source toy: W = (A,B,C) binary axes; source 1 observes (A,B)
// with B|A aligned, source 2 observes (B,C) with the B-marginal aligned and
// C|B not aligned.
inline AlignmentSpec toy_spec() {
  AlignmentSpec spec;
  SourceSpec s1;
  s1.id = 1;
  s1.observed_axes = {"A", "B"};
  s1.blocks = {{"A"}, {"B"}};
  s1.regions = {BlockRegion{BlockRegion::Kind::Empty, {}}, BlockRegion{BlockRegion::Kind::All, {}}};
  SourceSpec s2;
  s2.id = 2;
  s2.observed_axes = {"B", "C"};
  s2.blocks = {{"B"}, {"C"}};
  s2.regions = {BlockRegion{BlockRegion::Kind::Star, {}}, BlockRegion{BlockRegion::Kind::Empty, {}}};
  spec.sources = {s1, s2};
  return spec;
}

inline AxisSet toy_ideal_space() {
  return AxisSet({Axis{"A", {"0", "1"}}, Axis{"B", {"0", "1"}}, Axis{"C", {"0", "1", "2"}}});
}

inline FusedModel toy_model(std::uint64_t seed) {
  auto rng = rng_for(seed);
  FinitePmf q = random_pmf(rng, toy_ideal_space());
  AlignmentSpec spec = toy_spec();
  FusedLaw law = random_aligned_law(rng, q, spec);
  return FusedModel::bind(q, spec, law);
}

// A catalog of small random strongly aligned models with varied block and
// region structure over 3-4 axes.
FusedModel random_small_model(std::uint64_t seed);

// Transport toy over (L,A,Y), L with `nl` levels, strictly positive.
inline FinitePmf random_transport_q(std::mt19937_64& rng, std::size_t nl = 3) {
  std::vector<std::string> llv;
  for (std::size_t i = 1; i <= nl; ++i) llv.push_back(std::to_string(i));
  AxisSet ideal({Axis{"L", llv}, Axis{"A", {"0", "1"}}, Axis{"Y", {"0", "1"}}});
  // keep conditionals away from 0/1 so positivity checks pass comfortably
  std::uniform_real_distribution<double> mid(0.15, 0.85);
  Vec mass(static_cast<Eigen::Index>(ideal.cell_count()));
  std::vector<double> ql(nl), pa(nl);
  std::vector<std::vector<double>> py(nl, std::vector<double>(2));
  double qs = 0.0;
  for (std::size_t l = 0; l < nl; ++l) {
    ql[l] = mid(rng);
    qs += ql[l];
    pa[l] = mid(rng);
    py[l][0] = mid(rng);
    py[l][1] = mid(rng);
  }
  for (std::size_t c = 0; c < ideal.cell_count(); ++c) {
    auto m = ideal.unflatten(c);
    double base = ql[m[0]] / qs * (m[1] == 1 ? pa[m[0]] : 1 - pa[m[0]]);
    double prob_y1 = py[m[0]][m[1]];
    mass[static_cast<Eigen::Index>(c)] = base * (m[2] == 1 ? prob_y1 : 1 - prob_y1);
  }
  return FinitePmf(ideal, std::move(mass));
}

inline FrameworkParams transport_params() {
  FrameworkParams p;
  p.l_axes = {"L"};
  p.a_axis = "A";
  p.y_axis = "Y";
  p.l0 = {"1"};
  return p;
}

inline Framework random_transport_framework(FrameworkKind kind, std::uint64_t seed,
                                            std::size_t nl = 3) {
  auto rng = rng_for(seed);
  FinitePmf q = random_transport_q(rng, nl);
  FrameworkParams params = transport_params();
  AlignmentSpec spec = canonical_framework_spec(kind, params, q.space());
  FusedLaw law = random_aligned_law(rng, q, spec);
  return bind_framework(kind, params, spec, law);
}

inline Framework random_prevalence_framework(std::uint64_t seed, std::size_t nx = 3) {
  auto rng = rng_for(seed);
  std::vector<std::string> xlv;
  for (std::size_t i = 1; i <= nx; ++i) xlv.push_back(std::to_string(i));
  AxisSet ideal({Axis{"X", xlv}, Axis{"V", {"0", "1"}}, Axis{"Y", {"0", "1"}}});
  std::uniform_real_distribution<double> sens(0.7, 0.9), spec1(0.1, 0.3), prev(0.25, 0.75);
  Vec mass(static_cast<Eigen::Index>(ideal.cell_count()));
  std::vector<double> qx(nx), qy(nx), v1(nx), v0(nx);
  double qs = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    qx[x] = prev(rng);
    qs += qx[x];
    qy[x] = prev(rng);
    v1[x] = sens(rng);
    v0[x] = spec1(rng);
  }
  for (std::size_t c = 0; c < ideal.cell_count(); ++c) {
    auto m = ideal.unflatten(c);
    double py = m[2] == 1 ? qy[m[0]] : 1 - qy[m[0]];
    double pv = m[2] == 1 ? v1[m[0]] : v0[m[0]];
    mass[static_cast<Eigen::Index>(c)] =
        qx[m[0]] / qs * py * (m[1] == 1 ? pv : 1 - pv);
  }
  FinitePmf q(ideal, std::move(mass));
  FrameworkParams params;
  params.x_axes = {"X"};
  params.v_axis = "V";
  params.y_axis = "Y";
  AlignmentSpec spec = canonical_framework_spec(FrameworkKind::Prevalence, params, ideal);
  FusedLaw law = random_aligned_law(rng, q, spec);
  return bind_framework(FrameworkKind::Prevalence, params, spec, law);
}

// TSIV toy with the moment model holding exactly; L with nl levels, X and Y
// small numeric grids.
Framework random_tsiv_framework(std::uint64_t seed, std::size_t nl = 3);

// Generic (U,B) toy with T = |U|, NB = |B| levels.
Framework random_ub_framework(FrameworkKind kind, std::uint64_t seed, std::size_t t_levels = 3,
                              std::size_t b_levels = 3);

}  // namespace fusion::testing
