#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/influence.hpp"
#include "core/linalg.hpp"
#include "helpers.hpp"

using namespace fusion;
using namespace fusion::testing;

TEST_CASE("mq: perfect classifier gives m = v; conditional equation holds on random laws") {
  for (std::uint64_t seed : {1, 2, 3}) {
    Framework fw = random_prevalence_framework(seed);
    RealTable m = mq(fw.q, fw.params);
    // E_Q[m(X,V)|x,y] = y cell-wise
    RealTable expanded = expand(m, fw.q.space());
    RealTable cm = cond_mean(fw.q, expanded, std::vector<std::string>{"X", "Y"});
    std::size_t y_ai = cm.space.axis_index("Y");
    for (std::size_t c = 0; c < cm.size(); ++c) {
      double y = level_value(cm.space.axis(y_ai), cm.space.coord(c, y_ai));
      CHECK(cm[c] == doctest::Approx(y).epsilon(1e-12));
    }
  }
  // V = Y exactly: E[V|Y=y,x] = y, so m(x,v) = v
  AxisSet ideal({Axis{"X", {"0", "1"}}, Axis{"V", {"0", "1"}}, Axis{"Y", {"0", "1"}}});
  Vec mass(8);
  for (std::size_t c = 0; c < 8; ++c) {
    auto mlt = ideal.unflatten(c);
    double base = (mlt[0] == 0 ? 0.4 : 0.6) * (mlt[2] == 1 ? 0.3 : 0.7);
    mass[static_cast<Eigen::Index>(c)] = mlt[1] == mlt[2] ? base : 0.0;
  }
  FinitePmf q(ideal, std::move(mass));
  FrameworkParams p;
  p.x_axes = {"X"};
  p.v_axis = "V";
  p.y_axis = "Y";
  RealTable m = mq(q, p);
  std::size_t v_ai = m.space.axis_index("V");
  for (std::size_t c = 0; c < m.size(); ++c)
    CHECK(m[c] == doctest::Approx(level_value(m.space.axis(v_ai), m.space.coord(c, v_ai))));
  // degenerate instrumenting is rejected
  Vec flat = Vec::Constant(8, 1.0 / 8.0);
  CHECK_THROWS_AS(mq(FinitePmf(ideal, flat), p), NumericFailure);
}

TEST_CASE("prevalence identification: phi(P) = E_Q[Y]; broken alignment moves it") {
  for (std::uint64_t seed : {5, 6, 7}) {
    Framework fw = random_prevalence_framework(seed);
    double truth = mean(fw.q, axis_values(fw.q.space(), "Y"));
    CHECK(phi_prevalence(fw) == doctest::Approx(truth).epsilon(1e-12));
    // perturb the aligned V|X,Y conditional in source 2 -> phi drifts
    FusedLaw broken = fw.law;
    Vec m2 = broken.source_laws[1].mass();
    m2[0] *= 1.35;
    broken.source_laws[1] = FinitePmf::normalized(broken.source_laws[1].space(), m2);
    Framework fw2 = rebind(fw, broken);
    CHECK(std::abs(phi_prevalence(fw2) - truth) > 1e-6);
  }
}

TEST_CASE("prevalence IF: mean-zero, unique, and the general form covers the E[Y] case") {
  Framework fw = random_prevalence_framework(9);
  ObsFunction f = if_prevalence(fw);
  CHECK(std::abs(obs_mean(fw.law, f)) < 1e-12);
  AxisSet xspace = fw.q.space().subset({"X"});
  double phi = phi_prevalence(fw);
  PrevalenceIdealIF psi{RealTable::constant(xspace, -phi), RealTable::zeros(xspace),
                        RealTable::constant(xspace, 1.0), RealTable::zeros(xspace)};
  ObsFunction g = prevalence_if_general(fw, psi);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK((f.per_source[j].values - g.per_source[j].values).cwiseAbs().maxCoeff() == 0.0);
  // a general psi1 still satisfies the gradient equation after the pipeline
  auto rng = rng_for(10);
  std::normal_distribution<double> gg;
  PrevalenceIdealIF psi2{random_table(rng, xspace), random_table(rng, xspace),
                         random_table(rng, xspace), random_table(rng, xspace)};
  // center so the ideal IF is mean-zero
  RealTable ideal_if = RealTable::zeros(fw.q.space());
  {
    RealTable v = axis_values(fw.q.space(), "V"), y = axis_values(fw.q.space(), "Y");
    Projection to_x(fw.q.space(), xspace);
    for (std::size_t c = 0; c < ideal_if.size(); ++c) {
      std::size_t x = to_x(c);
      ideal_if[c] = psi2.a[x] + psi2.b[x] * v[c] + psi2.c[x] * y[c] + psi2.d[x] * v[c] * y[c];
    }
    double mu = mean(fw.q, ideal_if);
    psi2.a.values.array() -= mu;
    ideal_if.values.array() -= mu;
    (void)gg;
  }
  ObsFunction general = prevalence_if_general(fw, psi2);
  FusedModel m = framework_model(fw);
  CHECK(gradient_equation_residual(m, general, ideal_if) < 1e-10);
  ObsFunction lifted = lift_to_observed(m, two_source_solve(m, ideal_if).dec);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK((general.per_source[j].values - lifted.per_source[j].values).cwiseAbs().maxCoeff() <
          1e-10);
}

TEST_CASE("tsiv: binary L gives the exact Wald solution; residual vanishes in-model") {
  Framework fw = random_tsiv_framework(11, /*nl=*/2);
  TsivFit fit = tsiv_solve(fw);
  TsivFit ideal = tsiv_solve_ideal(fw.q, fw.params);
  CHECK(fit.phi == doctest::Approx(ideal.phi).epsilon(1e-10));
  CHECK(fit.tau == doctest::Approx(ideal.tau).epsilon(1e-10));
  CHECK(fit.moment_residual < 1e-12);
  // Wald ratio by hand
  RealTable a = cond_mean(fw.law.source_laws[0], axis_values(fw.law.source_laws[0].space(), "Y"),
                          std::vector<std::string>{"L"});
  RealTable b = cond_mean(fw.law.source_laws[1], axis_values(fw.law.source_laws[1].space(), "X"),
                          std::vector<std::string>{"L"});
  CHECK(fit.phi == doctest::Approx((a[1] - a[0]) / (b[1] - b[0])).epsilon(1e-10));
}

TEST_CASE("tsiv: polytomous L stays exact while the model holds") {
  Framework fw = random_tsiv_framework(13, /*nl=*/4);
  TsivFit fit = tsiv_solve(fw);
  CHECK(fit.moment_residual < 1e-12);
  CHECK(fit.phi == doctest::Approx(0.15).epsilon(1e-9));  // the builder's slope
  CHECK(fit.tau == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("tsiv IF members: mean-zero; the t built from an ideal g matches the lifted split") {
  Framework fw = random_tsiv_framework(17);
  Mat t = tsiv_canonical_t(fw);
  TsivIF nu = tsiv_if(fw, t);
  CHECK(std::abs(obs_mean(fw.law, nu.tau_comp)) < 1e-11);
  CHECK(std::abs(obs_mean(fw.law, nu.phi_comp)) < 1e-11);

  // ideal gradient for g(l) = (1, E_Q[X|l]): decompose + lift its phi row
  FusedModel m = framework_model(fw);
  RealTable psi = framework_ideal_if(fw);
  DecomposeOutcome out = two_source_solve(m, psi);
  REQUIRE(out.ok);
  ObsFunction lifted = lift_to_observed(m, out.dec);
  // t_{g,q}(l) = g(l) q(l)/p2(l), with q(l) := p1(l) by the canonical completion
  AxisSet lspace = fw.q.space().subset({"L"});
  FinitePmf p1_l = marginal(fw.law.source_laws[0], {"L"});
  FinitePmf p2_l = marginal(fw.law.source_laws[1], {"L"});
  Mat tg = t;
  for (std::size_t l = 0; l < lspace.cell_count(); ++l) {
    double shift = p1_l.mass(l) / p2_l.mass(l);
    tg(static_cast<Eigen::Index>(l), 0) *= shift;
    tg(static_cast<Eigen::Index>(l), 1) *= shift;
  }
  TsivIF from_t = tsiv_if(fw, tg);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK((from_t.phi_comp.per_source[j].values - lifted.per_source[j].values)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
}

TEST_CASE("tsiv EIF: dominates random members, matches the bound and eif_project") {
  Framework fw = random_tsiv_framework(19);
  TsivIF eff = tsiv_eif(fw);
  double var_eff = obs_variance(fw.law, eff.phi_comp);
  Mat bound = tsiv_efficiency_bound(fw);
  CHECK(var_eff == doctest::Approx(bound(1, 1)).epsilon(1e-10));

  auto rng = rng_for(20);
  std::normal_distribution<double> g;
  AxisSet lspace = fw.q.space().subset({"L"});
  for (int trial = 0; trial < 100; ++trial) {
    Mat t(static_cast<Eigen::Index>(lspace.cell_count()), 2);
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i / 2, i % 2) = g(rng);
    TsivIF member = [&]() {
      try {
        return tsiv_if(fw, t);
      } catch (const NumericFailure&) {
        return eff;  // singular draw: skip by comparing eff with itself
      }
    }();
    CHECK(var_eff <= obs_variance(fw.law, member.phi_comp) + 1e-12);
  }

  // cross-method: projecting any member onto T(P,P) gives the same phi-EIF
  FusedModel m = framework_model(fw);
  ObsFunction projected = eif_project(m, tsiv_if(fw, tsiv_canonical_t(fw)).phi_comp);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK((projected.per_source[j].values - eff.phi_comp.per_source[j].values)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
}

TEST_CASE("tsiv: binary L makes the whole family collapse to one function") {
  Framework fw = random_tsiv_framework(23, /*nl=*/2);
  auto rng = rng_for(24);
  std::normal_distribution<double> g;
  TsivIF ref = tsiv_eif(fw);
  for (int trial = 0; trial < 10; ++trial) {
    Mat t(2, 2);
    t << 1 + g(rng), g(rng), g(rng), 1 + g(rng);
    TsivIF member = tsiv_if(fw, t);
    for (std::size_t j = 0; j < 2; ++j)
      CHECK((member.phi_comp.per_source[j].values - ref.phi_comp.per_source[j].values)
                .cwiseAbs()
                .maxCoeff() < 1e-9);
  }
}

TEST_CASE("aipw: null effect reduces to weighted residuals; derivative check; two routes") {
  // Y independent of A given L with equal arms
  AxisSet ideal({Axis{"L", {"1", "2"}}, Axis{"A", {"0", "1"}}, Axis{"Y", {"0", "1"}}});
  Vec mass(8);
  for (std::size_t c = 0; c < 8; ++c) {
    auto m = ideal.unflatten(c);
    double py = m[0] == 0 ? 0.3 : 0.6;
    mass[static_cast<Eigen::Index>(c)] =
        (m[0] == 0 ? 0.45 : 0.55) * 0.5 * (m[2] == 1 ? py : 1 - py);
  }
  FinitePmf q(ideal, std::move(mass));
  FrameworkParams p = transport_params();
  CHECK(ate_ideal(q, p) == doctest::Approx(0.0).epsilon(1e-14));
  RealTable psi = aipw_ideal_if(q, p);
  CHECK(std::abs(mean(q, psi)) < 1e-13);
  RealTable y = axis_values(ideal, "Y"), a = axis_values(ideal, "A");
  RealTable ey = cond_mean(q, y, std::vector<std::string>{"L", "A"});
  Projection to_la(ideal, ideal.subset({"L", "A"}));
  for (std::size_t c = 0; c < 8; ++c)
    CHECK(psi[c] == doctest::Approx((2 * a[c] - 1) / 0.5 * (y[c] - ey[to_la(c)])).epsilon(1e-12));

  // pathwise: finite-difference derivative of psi(Q_t) matches <psi1, h>_Q
  auto rng = rng_for(31);
  Framework fw = random_transport_framework(FrameworkKind::TransportII, 31);
  RealTable psi2 = aipw_ideal_if(fw.q, fw.params);
  for (int trial = 0; trial < 10; ++trial) {
    RealTable h = random_mean_zero(rng, fw.q);
    double hmax = h.values.cwiseAbs().maxCoeff();
    double s = std::min(1e-4, 0.1 / hmax);
    double up = ate_ideal(tilt(fw.q, h, s), fw.params);
    double dn = ate_ideal(tilt(fw.q, h, -s), fw.params);
    CHECK(std::abs((up - dn) / (2 * s) - l2_inner(fw.q, psi2, h)) < 1e-6);
  }

  // Appendix DGP: plug-in psi(Q) equals E_Q[IF + psi]
  ModelFile mf = appendix_c_model(0.4);
  FrameworkParams pc;
  pc.l_axes = {"L1", "L2"};
  pc.a_axis = "A";
  pc.y_axis = "Y";
  double psi_plug = ate_ideal(mf.ideal, pc);
  RealTable if_c = aipw_ideal_if(mf.ideal, pc);
  RealTable sum = if_c;
  sum.values.array() += psi_plug;
  CHECK(mean(mf.ideal, sum) == doctest::Approx(psi_plug).epsilon(1e-12));
}

TEST_CASE("transport identification: every scenario recovers the ideal ATE on aligned laws") {
  for (auto kind : {FrameworkKind::TransportI, FrameworkKind::TransportII,
                    FrameworkKind::TransportIIIa, FrameworkKind::TransportIIIb}) {
    for (std::uint64_t seed : {41, 42, 43}) {
      Framework fw = random_transport_framework(kind, seed);
      double want = ate_ideal(fw.q, fw.params);
      CHECK(ate_transport_phi(fw) == doctest::Approx(want).epsilon(1e-10));
      CHECK(framework_phi(fw) == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("the three appendix scenarios agree on the shared law") {
  double v1 = framework_phi(bind_framework(appendix_c_model(0.5, FrameworkKind::TransportII)));
  double v2 = framework_phi(bind_framework(appendix_c_model(0.5, FrameworkKind::TransportIIIa)));
  double v3 = framework_phi(bind_framework(appendix_c_model(0.5, FrameworkKind::TransportIIIb)));
  CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
  CHECK(v1 == doctest::Approx(v3).epsilon(1e-12));
  // and all equal the ideal-law ATE of the DGP
  ModelFile mf = appendix_c_model(0.5);
  FrameworkParams pc;
  pc.l_axes = {"L1", "L2"};
  pc.a_axis = "A";
  pc.y_axis = "Y";
  CHECK(v1 == doctest::Approx(ate_ideal(mf.ideal, pc)).epsilon(1e-12));
}

TEST_CASE("transport IFs: mean-zero, gradient equation, and solver agreement") {
  for (auto kind : {FrameworkKind::TransportI, FrameworkKind::TransportII,
                    FrameworkKind::TransportIIIb}) {
    Framework fw = random_transport_framework(kind, 51);
    ObsFunction f = transport_if(fw);
    CHECK(std::abs(obs_mean(fw.law, f)) < 1e-11);
    FusedModel m = framework_model(fw);
    RealTable psi = aipw_ideal_if(fw.q, fw.params);
    CHECK(gradient_equation_residual(m, f, psi) < 1e-10);
    // unique-IF scenarios: matches the generic pipeline cell-wise
    DecomposeOutcome out = two_source_solve(m, psi);
    REQUIRE(out.ok);
    ObsFunction lifted = lift_to_observed(m, out.dec);
    for (std::size_t j = 0; j < 2; ++j)
      CHECK((f.per_source[j].values - lifted.per_source[j].values).cwiseAbs().maxCoeff() <
            1e-10);
  }
}

TEST_CASE("generic UB point: specializes to scenarios (ii) and (iii.b) by relabeling") {
  // scenario (ii) as a (U,B) framework: U = Y, B = (L,A) -- same formula
  Framework fw = random_transport_framework(FrameworkKind::TransportII, 61);
  ObsFunction via_transport = transport_if(fw);
  ObsFunction via_ub = generic_ub_if(fw, aipw_ideal_if(fw.q, fw.params));
  for (std::size_t j = 0; j < 2; ++j)
    CHECK((via_transport.per_source[j].values - via_ub.per_source[j].values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  Framework fw3 = random_transport_framework(FrameworkKind::TransportIIIb, 62);
  ObsFunction a3 = transport_if(fw3);
  ObsFunction b3 = generic_ub_if(fw3, aipw_ideal_if(fw3.q, fw3.params));
  for (std::size_t j = 0; j < 2; ++j)
    CHECK((a3.per_source[j].values - b3.per_source[j].values).cwiseAbs().maxCoeff() == 0.0);

  // standalone (U,B) instance: mean-zero + gradient equation
  Framework ub = random_ub_framework(FrameworkKind::GenericUBPoint, 63);
  RealTable psi = framework_ideal_if(ub);
  ObsFunction f = generic_ub_if(ub, psi);
  CHECK(std::abs(obs_mean(ub.law, f)) < 1e-11);
  FusedModel m = framework_model(ub);
  CHECK(gradient_equation_residual(m, f, psi) < 1e-10);
}

TEST_CASE("reconstruct_joint: round trip, product law, and the scenario (ii) identity") {
  auto rng = rng_for(71);
  AxisSet ub({Axis{"B", {"1", "2", "3"}}, Axis{"U", {"1", "2"}}});
  for (int trial = 0; trial < 50; ++trial) {
    FinitePmf q = random_pmf(rng, ub);
    RealTable ucond = conditional(q, {"U"}, {"B"}).table;
    FinitePmf q_bu0 = [&] {
      // q(b|u0): condition on U = "1"
      ConditionalTable c = conditional(marginal(q, {"U", "B"}), {"B"}, {"U"});
      AxisSet bspace = ub.subset({"B"});
      RealTable out = RealTable::zeros(bspace);
      Projection to_u(c.table.space, ub.subset({"U"}));
      Projection to_b(c.table.space, bspace);
      for (std::size_t i = 0; i < c.table.size(); ++i)
        if (to_u(i) == 0) out[to_b(i)] = c.table[i];
      return FinitePmf(bspace, out.values);
    }();
    FinitePmf back = reconstruct_joint(ucond, RealTable(q_bu0.space(), q_bu0.mass()), {"U"},
                                       {"1"});
    FinitePmf reord = marginal(back, {"B", "U"});
    for (std::size_t c = 0; c < q.cell_count(); ++c)
      CHECK(reord.mass(c) == doctest::Approx(q.mass(c)).epsilon(1e-12));
  }
  // independent U and B: reconstruction is the product law
  {
    Vec bu = random_positive(rng, 3), uu = random_positive(rng, 2);
    bu /= bu.sum();
    uu /= uu.sum();
    Vec mass(6);
    for (std::size_t c = 0; c < 6; ++c) {
      auto m = ub.unflatten(c);
      mass[static_cast<Eigen::Index>(c)] = bu[static_cast<Eigen::Index>(m[0])] *
                                           uu[static_cast<Eigen::Index>(m[1])];
    }
    FinitePmf q(ub, std::move(mass));
    RealTable ucond = conditional(q, {"U"}, {"B"}).table;
    RealTable bcond(ub.subset({"B"}), bu);
    FinitePmf back = reconstruct_joint(ucond, bcond, {"U"}, {"1"});
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(back.mass(c) == doctest::Approx(q.mass(c)).epsilon(1e-13));
  }
  // scenario (ii): the reconstructed ideal law reproduces the aligned conditionals
  {
    Framework fw = random_transport_framework(FrameworkKind::TransportII, 72);
    ConditionalTable y_la = conditional(fw.q, {"Y"}, {"L", "A"});
    ConditionalTable y_la_p = conditional(fw.law.source_laws[0], {"Y"}, {"L", "A"});
    Projection align(y_la.table.space, y_la_p.table.space);
    for (std::size_t c = 0; c < y_la.table.size(); ++c)
      CHECK(y_la.table[c] == doctest::Approx(y_la_p.table[align(c)]).epsilon(1e-12));
  }
}

TEST_CASE("anchor positivity violations are reported") {
  auto rng = rng_for(73);
  AxisSet ub({Axis{"B", {"1", "2"}}, Axis{"U", {"1", "2"}}});
  FinitePmf q = random_pmf(rng, ub);
  RealTable ucond = conditional(q, {"U"}, {"B"}).table;
  // zero out the anchor row at one b
  Projection to_u(ucond.space, ub.subset({"U"}));
  for (std::size_t c = 0; c < ucond.size(); ++c)
    if (to_u(c) == 0) ucond[c] = 0.0;
  RealTable bcond(ub.subset({"B"}), Vec::Constant(2, 0.5));
  CHECK_THROWS_AS(reconstruct_joint(ucond, bcond, {"U"}, {"1"}), NumericFailure);
}

TEST_CASE("C-invariance: equivalent ideal laws assemble the same P and the same value") {
  // transport (i): the propensity is unrestricted by the alignments
  Framework fw = random_transport_framework(FrameworkKind::TransportI, 81);
  auto rng = rng_for(82);
  // replace q(a|l) wholesale
  ConditionalTable y_la = conditional(fw.q, {"Y"}, {"L", "A"});
  FinitePmf q_l = marginal(fw.q, {"L"});
  AxisSet la = fw.q.space().subset({"L", "A"});
  std::uniform_real_distribution<double> mid(0.2, 0.8);
  RealTable new_pa = RealTable::zeros(fw.q.space().subset({"L"}));
  for (std::size_t l = 0; l < new_pa.size(); ++l) new_pa[l] = mid(rng);
  Vec mass(static_cast<Eigen::Index>(fw.q.cell_count()));
  Projection to_l(fw.q.space(), q_l.space());
  Projection to_cond(fw.q.space(), y_la.table.space);
  RealTable a_vals = axis_values(fw.q.space(), "A");
  for (std::size_t c = 0; c < fw.q.cell_count(); ++c) {
    double pa = new_pa[to_l(c)];
    mass[static_cast<Eigen::Index>(c)] =
        q_l.mass(to_l(c)) * (a_vals[c] > 0.5 ? pa : 1 - pa) * y_la.table[to_cond(c)];
  }
  FinitePmf q2(fw.q.space(), std::move(mass));
  REQUIRE(c_equivalent(fw.q, q2, fw.spec));
  CHECK(ate_ideal(fw.q, fw.params) == doctest::Approx(ate_ideal(q2, fw.params)).epsilon(1e-12));
  // assembling P from the equivalent law reproduces P cell-for-cell
  FusedLaw re = assemble_observed_law(q2, canonical_u(fw.law), fw.law.lambda, fw.spec);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t c = 0; c < fw.law.source_laws[j].cell_count(); ++c)
      CHECK(re.source_laws[j].mass(c) ==
            doctest::Approx(fw.law.source_laws[j].mass(c)).epsilon(1e-13));
}

TEST_CASE("generic UB full EIF: strictly better than the anchor on the appendix law") {
  Framework fw = bind_framework(appendix_c_model(0.5, FrameworkKind::TransportIIIa));
  ObsFunction anchor = transport_if(fw);
  ObsFunction eff = framework_eif(fw);
  double va = obs_variance(fw.law, anchor);
  double ve = obs_variance(fw.law, eff);
  CHECK(ve < va - 1e-6);
  FusedModel m = framework_model(fw);
  RealTable psi = aipw_ideal_if(fw.q, fw.params);
  CHECK(gradient_equation_residual(m, eff, psi) < 1e-9);
  // matches the generic solver
  EifSolveResult solve = eif_solve(m, project_tangent_q(m, psi));
  for (std::size_t j = 0; j < 2; ++j)
    CHECK((solve.phi_eff.per_source[j].values - eff.per_source[j].values)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
}

TEST_CASE("a one-level U is rejected by the discrete EIF solver") {
  auto rng = rng_for(91);
  AxisSet ideal({Axis{"U", {"1"}}, Axis{"B", {"1", "2"}}});
  FinitePmf q = random_pmf(rng, ideal);
  FrameworkParams p;
  p.u_axes = {"U"};
  p.b_axes = {"B"};
  p.u0 = {"1"};
  p.u_star = {"1"};
  p.b_star = {"1"};
  AlignmentSpec spec = canonical_framework_spec(FrameworkKind::GenericUBFull, p, ideal);
  FusedLaw law = random_aligned_law(rng, q, spec);
  Framework fw = bind_framework(FrameworkKind::GenericUBFull, p, spec, law);
  CHECK_THROWS_AS(generic_ub_eif_discrete(fw, framework_ideal_if(fw)), ValidationFailure);
}

TEST_CASE("naive vs obedient demonstration") {
  SUBCASE("random 3x3 model: strict variance gap and a real incompatibility residual") {
    Framework fw = random_ub_framework(FrameworkKind::GenericUBFull, 95);
    NaiveObedientReport rep = naive_vs_obedient_demo(fw);
    CHECK_FALSE(rep.invertible_map);
    CHECK(rep.gap > 1e-6);
    CHECK(rep.incompatibility_residual > 1e-6);
    CHECK(rep.grad_residual_naive < 1e-10);
    CHECK(rep.grad_residual_eff < 1e-10);
    CHECK(rep.grad_residual_naive >= 0.0);
  }
  SUBCASE("invertible deterministic map: the gap closes") {
    AxisSet ideal({Axis{"U", {"1", "2", "3"}}, Axis{"B", {"1", "2", "3"}}});
    // U = B exactly, uniform on the graph
    Vec mass = Vec::Zero(9);
    for (std::size_t i = 0; i < 3; ++i)
      mass[static_cast<Eigen::Index>(i * 3 + i)] = 1.0 / 3.0;
    FinitePmf q(ideal, std::move(mass));
    FrameworkParams p;
    p.u_axes = {"U"};
    p.b_axes = {"B"};
    p.u0 = {"1"};
    p.u_star = {"2"};
    p.b_star = {"2"};
    AlignmentSpec spec = canonical_framework_spec(FrameworkKind::GenericUBFull, p, ideal);
    FusedLaw law;
    law.lambda = Vec(2);
    law.lambda << 0.5, 0.5;
    law.source_laws = {marginal(q, {"B", "U"}), marginal(q, {"U", "B"})};
    Framework fw = bind_framework(FrameworkKind::GenericUBFull, p, spec, law,
                                  /*validate=*/false, &q);
    NaiveObedientReport rep = naive_vs_obedient_demo(fw);
    CHECK(rep.invertible_map);
    CHECK(std::abs(rep.gap) <= 1e-12);
  }
}
