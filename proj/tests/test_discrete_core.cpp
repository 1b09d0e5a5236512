#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/frameworks.hpp"
#include "core/io.hpp"
#include "helpers.hpp"

using namespace fusion;
using namespace fusion::testing;

namespace {
double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}

TEST_CASE("marginal: uniform square collapses to uniform") {
  AxisSet sq({Axis{"A", {"0", "1"}}, Axis{"B", {"0", "1"}}});
  FinitePmf p = FinitePmf::uniform(sq);
  FinitePmf m = marginal(p, {"B"});
  CHECK(m.mass(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.mass(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("marginal: appendix DGP covariates are independent uniforms") {
  ModelFile mf = appendix_c_model(0.5);
  FinitePmf ml = marginal(mf.ideal, {"L1", "L2"});
  for (std::size_t c = 0; c < ml.cell_count(); ++c)
    CHECK(ml.mass(c) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("marginal: random table matches the summation oracle") {
  auto rng = rng_for(11);
  AxisSet sp({Axis{"R", {"0", "1", "2"}}, Axis{"C", {"0", "1", "2", "3"}}});
  FinitePmf p = random_pmf(rng, sp);
  FinitePmf m = marginal(p, {"R"});
  for (std::size_t r = 0; r < 3; ++r) {
    double want = 0.0;
    for (std::size_t c = 0; c < 4; ++c) want += p.mass(p.space().flatten({r, c}));
    CHECK(m.mass(r) == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("conditional: appendix DGP outcome model reproduces its logit") {
  ModelFile mf = appendix_c_model(0.3);
  ConditionalTable ct = conditional(mf.ideal, {"Y"}, {"A", "L1", "L2"});
  // q(Y=1 | A=1, L1=1, L2=1) = expit(0.5 + 0.5 + 0.25 - 0.25)
  const AxisSet& sp = ct.table.space;
  std::vector<std::size_t> multi(4);
  multi[sp.axis_index("A")] = 1;
  multi[sp.axis_index("L1")] = 0;
  multi[sp.axis_index("L2")] = 0;
  multi[sp.axis_index("Y")] = 1;
  CHECK(ct.table[sp.flatten(multi)] == doctest::Approx(expit(1.0)).epsilon(1e-12));
}

TEST_CASE("conditional: independence makes conditionals equal marginals") {
  AxisSet sp({Axis{"A", {"0", "1"}}, Axis{"B", {"0", "1", "2"}}});
  Vec mass(6);
  double pa[2] = {0.3, 0.7}, pb[3] = {0.2, 0.5, 0.3};
  for (std::size_t c = 0; c < 6; ++c) {
    auto m = sp.unflatten(c);
    mass[static_cast<Eigen::Index>(c)] = pa[m[0]] * pb[m[1]];
  }
  FinitePmf p(sp, std::move(mass));
  ConditionalTable ct = conditional(p, {"B"}, {"A"});
  for (std::size_t c = 0; c < ct.table.size(); ++c) {
    auto m = ct.table.space.unflatten(c);
    CHECK(ct.table[c] == doctest::Approx(pb[m[1]]).epsilon(1e-14));
  }
}

TEST_CASE("conditional times marginal reconstructs the joint") {
  auto rng = rng_for(17);
  AxisSet sp({Axis{"A", {"0", "1", "2"}}, Axis{"B", {"0", "1"}}, Axis{"C", {"0", "1"}}});
  FinitePmf p = random_pmf(rng, sp);
  ConditionalTable ct = conditional(p, {"C"}, {"A", "B"});
  FinitePmf mab = marginal(p, {"A", "B"});
  Projection to_ab(ct.table.space, mab.space());
  Projection to_joint(p.space(), ct.table.space);
  for (std::size_t c = 0; c < p.cell_count(); ++c) {
    std::size_t cc = to_joint(c);
    CHECK(p.mass(c) == doctest::Approx(ct.table[cc] * mab.mass(to_ab(cc))).epsilon(1e-13));
  }
  SUBCASE("each conditioning slice is normalized") {
    Projection slice(ct.table.space, mab.space());
    Vec sums = Vec::Zero(static_cast<Eigen::Index>(mab.cell_count()));
    for (std::size_t c = 0; c < ct.table.size(); ++c)
      sums[static_cast<Eigen::Index>(slice(c))] += ct.table[c];
    for (Eigen::Index i = 0; i < sums.size(); ++i) CHECK(sums[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("conditional: zero-mass cell errors in strict mode, flagged otherwise") {
  AxisSet sp({Axis{"A", {"0", "1"}}, Axis{"B", {"0", "1"}}});
  Vec mass(4);
  mass << 0.5, 0.5, 0.0, 0.0;  // A=1 never occurs
  FinitePmf p(sp, std::move(mass));
  CHECK_THROWS_AS(conditional(p, {"B"}, {"A"}), NumericFailure);
  ConditionalTable ct = conditional(p, {"B"}, {"A"}, /*strict=*/false);
  REQUIRE(ct.undefined.size() == 1);
  CHECK(ct.undefined[0] == 1);
}

TEST_CASE("rn_ratio: identity, bounds, and the aligned factorization") {
  auto rng = rng_for(23);
  AxisSet sp({Axis{"A", {"0", "1"}}, Axis{"B", {"0", "1", "2"}}});
  FinitePmf p = random_pmf(rng, sp);
  SUBCASE("num = den gives 1 on the support") {
    RealTable r = rn_ratio(p, p, {"A", "B"});
    for (std::size_t c = 0; c < r.size(); ++c) CHECK(r[c] == doctest::Approx(1.0));
  }
  SUBCASE("delta-bounded pair stays within [1/delta, delta]") {
    FinitePmf q = random_pmf(rng, sp, 0.4);
    RealTable r = rn_ratio(p, q, {"A", "B"});
    double delta = 0.0;
    for (std::size_t c = 0; c < p.cell_count(); ++c) {
      double ratio = p.mass(c) / q.mass(c);
      delta = std::max({delta, ratio, 1.0 / ratio});
    }
    for (std::size_t c = 0; c < r.size(); ++c) {
      CHECK(r[c] <= delta * (1 + 1e-12));
      CHECK(r[c] >= 1.0 / delta * (1 - 1e-12));
    }
  }
  SUBCASE("prevalence covariate-shift factorization") {
    Framework fw = random_prevalence_framework(5);
    // q(x,y)/p(x,y|S=2) = {q(y|x)/p(y|x,S=2)} {p(x|S=1)/p(x|S=2)} cell-wise
    FinitePmf p2 = marginal(fw.law.source_laws[1], {"X", "Y"});
    FinitePmf q_xy = marginal(fw.q, {"X", "Y"});
    RealTable lhs = rn_ratio(fw.q, p2, {"X", "Y"});
    ConditionalTable qy_x = conditional(q_xy, {"Y"}, {"X"});
    ConditionalTable py_x = conditional(p2, {"Y"}, {"X"});
    FinitePmf p1_x = marginal(fw.law.source_laws[0], {"X"});
    FinitePmf p2_x = marginal(p2, {"X"});
    Projection to_x(lhs.space, p1_x.space());
    Projection to_cond(lhs.space, qy_x.table.space);
    for (std::size_t c = 0; c < lhs.size(); ++c) {
      double rhs = qy_x.table[to_cond(c)] / py_x.table[to_cond(c)] * p1_x.mass(to_x(c)) /
                   p2_x.mass(to_x(c));
      CHECK(lhs[c] == doctest::Approx(rhs).epsilon(1e-11));
    }
  }
}

TEST_CASE("cond_exp_operator: constants, tower, and the brute-force oracle") {
  auto rng = rng_for(31);
  AxisSet sp({Axis{"A", {"0", "1"}}, Axis{"B", {"0", "1", "2"}}, Axis{"C", {"0", "1"}}});
  FinitePmf p = random_pmf(rng, sp);
  RealTable f = random_table(rng, sp);

  SUBCASE("constant maps to the same constant") {
    LinearOpMatrix op = cond_exp_operator(p, {"A", "B", "C"}, {"A"});
    Vec ones = Vec::Ones(static_cast<Eigen::Index>(sp.cell_count()));
    Vec out = op.entries * ones;
    for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(1.0));
  }
  SUBCASE("tower property via composition") {
    LinearOpMatrix to_ab = cond_exp_operator(p, {"A", "B", "C"}, {"A", "B"});
    LinearOpMatrix ab_to_a = cond_exp_operator(p, {"A", "B"}, {"A"});
    LinearOpMatrix direct = cond_exp_operator(p, {"A", "B", "C"}, {"A"});
    Mat composed = ab_to_a.entries * to_ab.entries;
    CHECK((composed - direct.entries).cwiseAbs().maxCoeff() < 1e-12);
    // E[E[f|A]] = E[f]
    Vec ef = direct.entries * f.values;
    FinitePmf pa = marginal(p, {"A"});
    double total = 0.0;
    for (std::size_t a = 0; a < 2; ++a) total += pa.mass(a) * ef[static_cast<Eigen::Index>(a)];
    CHECK(total == doctest::Approx(mean(p, f)).epsilon(1e-13));
  }
  SUBCASE("projector is idempotent and self-adjoint in L2(p)") {
    LinearOpMatrix proj = cond_exp_projector(p, {"B"});
    CHECK((proj.entries * proj.entries - proj.entries).cwiseAbs().maxCoeff() < 1e-12);
    RealTable g = random_table(rng, sp);
    RealTable pf(sp, proj.entries * f.values);
    RealTable pg(sp, proj.entries * g.values);
    CHECK(l2_inner(p, pf, g) == doctest::Approx(l2_inner(p, f, pg)).epsilon(1e-12));
  }
  SUBCASE("matches the direct weighted-average oracle") {
    RealTable got = cond_mean(p, f, std::vector<std::string>{"A", "C"});
    AxisSet sub = sp.subset({"A", "C"});
    for (std::size_t s = 0; s < sub.cell_count(); ++s) {
      double num = 0.0, den = 0.0;
      for (std::size_t c = 0; c < sp.cell_count(); ++c) {
        Projection pr(sp, sub);
        if (pr(c) == s) {
          num += p.mass(c) * f[c];
          den += p.mass(c);
        }
      }
      CHECK(got[s] == doctest::Approx(num / den).epsilon(1e-13));
    }
  }
}

TEST_CASE("l2_inner basics and the loop oracle") {
  auto rng = rng_for(37);
  AxisSet sp({Axis{"A", {"0", "1", "2"}}, Axis{"B", {"0", "1"}}});
  FinitePmf p = random_pmf(rng, sp);
  RealTable f = random_table(rng, sp);
  RealTable g = random_table(rng, sp);
  RealTable one = RealTable::constant(sp, 1.0);
  CHECK(l2_inner(p, f, one) == doctest::Approx(mean(p, f)).epsilon(1e-14));
  CHECK(l2_inner(p, f, f) >= 0.0);
  double want = 0.0;
  for (std::size_t c = 0; c < sp.cell_count(); ++c) want += f[c] * g[c] * p.mass(c);
  CHECK(l2_inner(p, f, g) == doctest::Approx(want).epsilon(1e-14));
  AxisSet other({Axis{"Z", {"0", "1"}}});
  CHECK_THROWS_AS(l2_inner(p, f, RealTable::zeros(other)), InvalidSpec);
}

TEST_CASE("mutual absolute continuity is support equality") {
  auto rng = rng_for(41);
  AxisSet sp({Axis{"A", {"0", "1"}}, Axis{"B", {"0", "1"}}});
  FinitePmf p = random_pmf(rng, sp);
  CHECK(mutually_abs_continuous(p, p));
  Vec disjoint(4);
  disjoint << 0.0, 0.0, 0.4, 0.6;
  Vec other(4);
  other << 0.5, 0.5, 0.0, 0.0;
  CHECK_FALSE(mutually_abs_continuous(FinitePmf(sp, disjoint), FinitePmf(sp, other)));
  for (int trial = 0; trial < 20; ++trial) {
    Vec a = random_positive(rng, 4), b = random_positive(rng, 4);
    std::uniform_int_distribution<int> coin(0, 3);
    if (trial % 2) a[coin(rng)] = 0.0;
    if (trial % 3 == 0) b[coin(rng)] = 0.0;
    FinitePmf pa = FinitePmf::normalized(sp, a), pb = FinitePmf::normalized(sp, b);
    bool same_support = true;
    for (std::size_t c = 0; c < 4; ++c) same_support &= (pa.mass(c) > 0) == (pb.mass(c) > 0);
    CHECK(mutually_abs_continuous(pa, pb) == same_support);
  }
}

TEST_CASE("pmf construction enforces normalization; floor touches only zeros") {
  AxisSet sp({Axis{"A", {"0", "1"}}});
  Vec bad(2);
  bad << 0.5, 0.6;
  CHECK_THROWS_AS(FinitePmf(sp, bad), InvalidSpec);
  Vec with_zero(2);
  with_zero << 1.0, 0.0;
  FinitePmf floored = FinitePmf(sp, with_zero).floored();
  CHECK(floored.mass(1) > 0.0);
  CHECK(floored.mass(1) == doctest::Approx(1e-12).epsilon(1e-3));
  CHECK(floored.mass(0) + floored.mass(1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pmf JSON round trip is bit-exact") {
  auto rng = rng_for(43);
  AxisSet sp({Axis{"A", {"x", "y"}}, Axis{"B", {"0", "1", "2"}}});
  FinitePmf p = random_pmf(rng, sp);
  FinitePmf back = pmf_from_json(pmf_to_json(p));
  REQUIRE(back.space().same_as(p.space()));
  for (std::size_t c = 0; c < p.cell_count(); ++c) CHECK(back.mass(c) == p.mass(c));
}

TEST_CASE("tilt: score is exact and positivity is guarded") {
  auto rng = rng_for(47);
  AxisSet sp({Axis{"A", {"0", "1", "2"}}});
  FinitePmf p = random_pmf(rng, sp);
  RealTable h = random_mean_zero(rng, p);
  FinitePmf pt = tilt(p, h, 0.1);
  for (std::size_t c = 0; c < sp.cell_count(); ++c)
    CHECK(pt.mass(c) == doctest::Approx(p.mass(c) * (1 + 0.1 * h[c])).epsilon(1e-14));
  double hmax = h.values.cwiseAbs().maxCoeff();
  CHECK_THROWS_AS(tilt(p, h, 1.5 / hmax), NumericFailure);
}
