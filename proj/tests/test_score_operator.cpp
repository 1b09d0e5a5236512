#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/linalg.hpp"
#include "core/score.hpp"
#include "helpers.hpp"

using namespace fusion;
using namespace fusion::testing;

TEST_CASE("basis_D dimensions follow the counting rule; empty regions give zero spaces") {
  FusedModel m = toy_model(101);
  // source 1: block 1 has empty region, block 2 aligned on all of A's range
  CHECK(basis_D(m, 0, 0).dim() == 0);
  CHECK(basis_D(m, 0, 1).dim() == 2 * (2 - 1));  // two A-cells, |B|-1 each
  // source 2: block 1 star-aligned marginal over B, block 2 empty
  CHECK(basis_D(m, 1, 0).dim() == 2 - 1);
  CHECK(basis_D(m, 1, 1).dim() == 0);
  SUBCASE("columns are orthonormal, conditionally mean-zero, and region-supported") {
    SubspaceBasis b = basis_D(m, 0, 1);
    for (std::size_t i = 0; i < b.dim(); ++i) {
      RealTable fi(m.q().space(), b.columns.col(static_cast<Eigen::Index>(i)));
      for (std::size_t i2 = 0; i2 <= i; ++i2) {
        RealTable fj(m.q().space(), b.columns.col(static_cast<Eigen::Index>(i2)));
        CHECK(l2_inner(m.q(), fi, fj) == doctest::Approx(i == i2 ? 1.0 : 0.0).epsilon(1e-10));
      }
      RealTable cm = cond_mean(m.q(), fi, std::vector<std::string>{"A"});
      for (std::size_t g = 0; g < cm.size(); ++g) CHECK(std::abs(cm[g]) < 1e-12);
    }
  }
}

TEST_CASE("basis_R mirrors on the complement under the source law") {
  FusedModel m = toy_model(103);
  // source 1 block 1: no alignment -> all conditionally-mean-zero increments of A
  CHECK(basis_R(m, 0, 0).dim() == 2 - 1);
  CHECK(basis_R(m, 0, 1).dim() == 0);  // fully aligned block
  // source 2 block 2: C|B never aligned -> (|C|-1) per B-cell
  CHECK(basis_R(m, 1, 1).dim() == 2 * (3 - 1));
  CHECK(basis_R(m, 1, 0).dim() == 0);  // star block fully aligned
}

TEST_CASE("component D spaces are mutually orthogonal within a source") {
  FusedModel m = random_small_model(2);  // shape 2: three sources
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    std::vector<SubspaceBasis> bases;
    for (std::size_t k = 0; k < m.structure(j).block_count(); ++k)
      bases.push_back(basis_D(m, j, k));
    for (std::size_t k = 0; k < bases.size(); ++k)
      for (std::size_t k2 = k + 1; k2 < bases.size(); ++k2)
        for (std::size_t a = 0; a < bases[k].dim(); ++a)
          for (std::size_t b = 0; b < bases[k2].dim(); ++b) {
            RealTable fa(m.q().space(), bases[k].columns.col(static_cast<Eigen::Index>(a)));
            RealTable fb(m.q().space(), bases[k2].columns.col(static_cast<Eigen::Index>(b)));
            CHECK(std::abs(l2_inner(m.q(), fa, fb)) < 1e-11);
          }
  }
}

TEST_CASE("component R spaces are mutually orthogonal under the source law") {
  FusedModel m = toy_model(107);
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const FinitePmf& pj = m.p().source_laws[j];
    std::vector<SubspaceBasis> bases;
    for (std::size_t k = 0; k < m.structure(j).block_count(); ++k)
      bases.push_back(basis_R(m, j, k));
    for (std::size_t k = 0; k < bases.size(); ++k)
      for (std::size_t k2 = k + 1; k2 < bases.size(); ++k2)
        for (std::size_t a = 0; a < bases[k].dim(); ++a)
          for (std::size_t b = 0; b < bases[k2].dim(); ++b) {
            RealTable fa(pj.space(), bases[k].columns.col(static_cast<Eigen::Index>(a)));
            RealTable fb(pj.space(), bases[k2].columns.col(static_cast<Eigen::Index>(b)));
            CHECK(std::abs(l2_inner(pj, fa, fb)) < 1e-11);
          }
  }
}

TEST_CASE("H vectors are validated componentwise") {
  FusedModel m = toy_model(109);
  auto rng = rng_for(110);
  HVector good = random_hvector(rng, m);
  CHECK_NOTHROW(validate_hvector(m, good));
  HVector bad = good;
  bad.q.values.array() += 0.5;  // breaks mean-zero under Q
  CHECK_THROWS_AS(validate_hvector(m, bad), ValidationFailure);
}

TEST_CASE("apply_A: zero maps to zero; scores are mean-zero under P") {
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    FusedModel m = random_small_model(seed);
    auto rng = rng_for(seed + 1000);
    ObsFunction zero = apply_A(m, HVector::zeros(m));
    for (const auto& t : zero.per_source) CHECK(t.values.cwiseAbs().maxCoeff() == 0.0);
    for (int trial = 0; trial < 5; ++trial) {
      HVector h = random_hvector(rng, m);
      ObsFunction g = apply_A(m, h);
      CHECK(std::abs(obs_mean(m.p(), g)) < 1e-10);
    }
  }
}

TEST_CASE("apply_A on a fully aligned single chain telescopes to E_Q[h|Z] - E_Q[h]") {
  auto rng = rng_for(7);
  AxisSet ideal = toy_ideal_space();
  FinitePmf q = random_pmf(rng, ideal);
  AlignmentSpec spec;
  {
    SourceSpec s;
    s.id = 1;
    s.observed_axes = {"A", "B"};
    s.blocks = {{"A"}, {"B"}};
    s.regions = {BlockRegion{BlockRegion::Kind::Star, {}},
                 BlockRegion{BlockRegion::Kind::All, {}}};
    spec.sources = {s};
  }
  std::vector<FinitePmf> u{random_pmf(rng, ideal.subset({"A", "B"}))};
  FusedLaw law = assemble_observed_law(q, u, Vec::Ones(1), spec);
  FusedModel m = FusedModel::bind(q, spec, law);
  HVector h = HVector::zeros(m);
  h.q = random_mean_zero(rng, q);
  ObsFunction g = apply_A(m, h);
  RealTable want = cond_mean(q, h.q, std::vector<std::string>{"A", "B"});
  for (std::size_t c = 0; c < g.per_source[0].size(); ++c)
    CHECK(g.per_source[0][c] == doctest::Approx(want[c]).epsilon(1e-12));
}

TEST_CASE("apply_A agrees with the explicit projection-matrix oracle") {
  FusedModel m = toy_model(11);
  auto rng = rng_for(13);
  HVector h = random_hvector(rng, m);
  ObsFunction g = apply_A(m, h);
  // oracle: project h_q on each D_k with its orthonormal basis, h_u on R_k
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const SourceStructure& st = m.structure(j);
    RealTable want = RealTable::zeros(st.z_space);
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      SubspaceBasis d = basis_D(m, j, k);
      if (d.dim() > 0) {
        Vec coef = d.columns.transpose() * (m.q().mass().asDiagonal() * h.q.values);
        RealTable proj(m.q().space(), d.columns * coef);
        // projection is a function of the prefix: read it through any cell
        RealTable on_post = cond_mean(m.q(), proj, st.prefix_space[k + 1], false);
        Projection to_post(st.z_space, st.prefix_space[k + 1]);
        for (std::size_t c = 0; c < want.size(); ++c) want[c] += on_post[to_post(c)];
      }
      SubspaceBasis r = basis_R(m, j, k);
      if (r.dim() > 0) {
        const FinitePmf& pj = m.p().source_laws[j];
        Vec coef = r.columns.transpose() * (pj.mass().asDiagonal() * h.u[j].values);
        // h_u lives in L2(U); project under P's geometry only on the
        // complement where the two conditionals coincide
        RealTable proj(st.z_space, r.columns * coef);
        RealTable on_post = cond_mean(pj, proj, st.prefix_space[k + 1], false);
        Projection to_post(st.z_space, st.prefix_space[k + 1]);
        for (std::size_t c = 0; c < want.size(); ++c) want[c] += on_post[to_post(c)];
      }
    }
    want.values.array() += h.lam[static_cast<Eigen::Index>(j)];
    for (std::size_t c = 0; c < want.size(); ++c)
      if (m.p().source_laws[j].mass(c) > 0)
        CHECK(g.per_source[j][c] == doctest::Approx(want[c]).epsilon(1e-9));
  }
}

TEST_CASE("decomposition of observed functions: exactness and degenerate cases") {
  for (std::uint64_t seed : {31, 32, 33, 34}) {
    FusedModel m = random_small_model(seed);
    auto rng = rng_for(seed + 50);
    SUBCASE("pure source function decomposes into gamma only") {
      ObsFunction g = ObsFunction::zeros(m);
      for (std::size_t j = 0; j < m.source_count(); ++j)
        g.per_source[j] = RealTable::constant(m.structure(j).z_space, 0.3 * (j + 1.0));
      ObsDecomposition d = decompose_obs_function(m, g);
      for (std::size_t j = 0; j < m.source_count(); ++j) {
        CHECK(d.gamma[static_cast<Eigen::Index>(j)] == doctest::Approx(0.3 * (j + 1.0)));
        for (std::size_t k = 0; k < m.structure(j).block_count(); ++k) {
          CHECK(d.m_parts[j][k].values.cwiseAbs().maxCoeff() < 1e-13);
          CHECK(d.n_parts[j][k].values.cwiseAbs().maxCoeff() < 1e-13);
        }
      }
    }
    SUBCASE("random g reconstructs within 1e-11") {
      ObsFunction g = random_obs_mean_zero(rng, m);
      ObsDecomposition d = decompose_obs_function(m, g);
      CHECK(decomposition_residual(m, g, d) < 1e-11);
      // membership: m-parts have zero Q-conditional mean given the prefix
      for (std::size_t j = 0; j < m.source_count(); ++j) {
        const SourceStructure& st = m.structure(j);
        for (std::size_t k = 0; k < st.block_count(); ++k) {
          RealTable expanded = expand(d.m_parts[j][k], m.q().space());
          RealTable cm = cond_mean(m.q(), expanded, st.prefix_space[k], false);
          for (std::size_t g2 = 0; g2 < cm.size(); ++g2)
            if (st.region_mask[k][g2]) CHECK(std::abs(cm[g2]) < 1e-11);
        }
      }
    }
  }
}

TEST_CASE("adjoint identity holds to 1e-11 on random pairs") {
  for (std::uint64_t seed : {41, 42, 43, 44}) {
    FusedModel m = random_small_model(seed);
    auto rng = rng_for(seed + 77);
    for (int trial = 0; trial < 25; ++trial) {
      HVector h = random_hvector(rng, m);
      ObsFunction g = random_obs_mean_zero(rng, m);
      double lhs = obs_inner(m.p(), g, apply_A(m, h));
      double rhs = h_inner(m, apply_A_star(m, g), h);
      CHECK(std::abs(lhs - rhs) <= 1e-11);
    }
  }
}

TEST_CASE("A* of a pure lambda score has a vanishing Q component") {
  FusedModel m = toy_model(51);
  HVector h = HVector::zeros(m);
  h.lam[0] = 1.0;
  h.lam[1] = -m.lambda(0) / m.lambda(1);
  ObsFunction g = apply_A(m, h);
  HVector back = apply_A_star(m, g);
  CHECK(l2_norm(m.q(), back.q) < 1e-12);
  for (std::size_t j = 0; j < m.source_count(); ++j)
    CHECK(l2_norm(m.u()[j], back.u[j]) < 1e-12);
}

TEST_CASE("boundedness witness: ||A h||^2 <= max{J delta K, eps, 1} ||h||^2") {
  for (std::uint64_t seed : {61, 62, 63}) {
    FusedModel m = random_small_model(seed);
    auto rng = rng_for(seed);
    double kmax = 0;
    for (std::size_t j = 0; j < m.source_count(); ++j)
      kmax = std::max(kmax, static_cast<double>(m.structure(j).block_count()));
    double bound = std::max({static_cast<double>(m.source_count()) * m.delta() * kmax,
                             m.epsilon(), 1.0});
    for (int trial = 0; trial < 20; ++trial) {
      HVector h = random_hvector(rng, m);
      ObsFunction g = apply_A(m, h);
      double lhs = obs_inner(m.p(), g, g);
      CHECK(lhs <= bound * h_inner(m, h, h) * (1 + 1e-12));
    }
  }
}

TEST_CASE("information operator: block structure, lambda identity, PSD, product identity") {
  FusedModel m = toy_model(71);
  Mat info = information_matrix_cells(m);
  Mat prod = a_star_matrix_cells(m) * a_matrix_cells(m);
  CHECK((info - prod).cwiseAbs().maxCoeff() < 1e-12);

  const std::size_t nq = m.q().cell_count();
  std::size_t nu = 0;
  for (std::size_t j = 0; j < m.source_count(); ++j)
    nu += m.u()[j].cell_count();
  const std::size_t nl = m.source_count();
  // lambda block acts as the identity
  Mat lam_block = info.bottomRightCorner(nl, nl);
  CHECK((lam_block - Mat::Identity(nl, nl)).cwiseAbs().maxCoeff() < 1e-12);
  // off-diagonal blocks vanish
  CHECK(info.topRightCorner(nq, nl).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(info.bottomLeftCorner(nl, nq).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(info.block(0, nq, nq, nu).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(info.block(nq, 0, nu, nq).cwiseAbs().maxCoeff() < 1e-12);

  // via the orthonormal H basis the Gram form is symmetric PSD
  HBasis b = h_basis(m);
  Mat a = a_matrix(m, b);
  Mat gram = information_gram(m, b, a);
  CHECK((gram - gram.transpose()).cwiseAbs().maxCoeff() < 1e-11);
  Eigen::SelfAdjointEigenSolver<Mat> es(gram);
  CHECK(es.eigenvalues().minCoeff() > -1e-11);
}

TEST_CASE("tangent space: nonparametric models fill L2_0(P), the UB-full model does not") {
  // toy model: no constraints on P (alignments pin conditionals of separate factors)
  {
    FusedModel m = toy_model(81);
    SubspaceBasis t = tangent_space(m);
    std::size_t nobs = 0;
    for (std::size_t j = 0; j < m.source_count(); ++j)
      nobs += m.p().source_laws[j].cell_count();
    CHECK(t.dim() == nobs - 1);
  }
  // both-conditionals (U,B) model: the alignments impose equality constraints
  {
    Framework fw = random_ub_framework(FrameworkKind::GenericUBFull, 83);
    FusedModel m = framework_model(fw);
    SubspaceBasis t = tangent_space(m);
    std::size_t nobs = 0;
    for (std::size_t j = 0; j < m.source_count(); ++j)
      nobs += m.p().source_laws[j].cell_count();
    CHECK(t.dim() < nobs - 1);
    // dimension oracle: rank of the stacked score matrix in sqrt-weighted coords
    HBasis b = h_basis(m);
    Mat a = a_matrix(m, b);
    Vec w = obs_weights(m);
    Mat y = w.array().sqrt().matrix().asDiagonal() * a;
    CHECK(t.dim() == static_cast<std::size_t>(numerical_rank(y)));
  }
}

TEST_CASE("null/range duality: T(P,P) is the orthocomplement of null(A*)") {
  FusedModel m = random_small_model(3);  // UB-full shape: nontrivial null space
  SubspaceBasis t = tangent_space(m);
  Vec w = obs_weights(m);
  // represent A* in coordinates: obs L2_0(P) basis -> H coefficients
  HBasis hb = h_basis(m);
  // mean-zero obs basis: centered indicators orthonormalized
  Mat span(static_cast<Eigen::Index>(w.size()), w.size());
  for (Eigen::Index c = 0; c < w.size(); ++c) {
    Vec v = Vec::Zero(w.size());
    v[c] = 1.0;
    v.array() -= w[c];
    span.col(c) = v;
  }
  Mat obs_basis = gram_schmidt(span, w);
  Mat astar(static_cast<Eigen::Index>(hb.dim()), obs_basis.cols());
  for (Eigen::Index c = 0; c < obs_basis.cols(); ++c) {
    ObsFunction g = unflatten_obs(m, obs_basis.col(c));
    astar.col(c) = hb.coefficients(m, apply_A_star(m, g));
  }
  Mat null_cols = null_space(astar);  // coordinates in the obs basis
  // every null direction is L2(P)-orthogonal to the tangent space
  for (Eigen::Index c = 0; c < null_cols.cols(); ++c) {
    Vec fn = obs_basis * null_cols.col(c);
    Vec inner = t.columns.transpose() * (w.asDiagonal() * fn);
    CHECK(inner.cwiseAbs().maxCoeff() < 1e-9);
  }
  // dimensions add up within L2_0(P)
  CHECK(t.dim() + static_cast<std::size_t>(null_cols.cols()) ==
        static_cast<std::size_t>(obs_basis.cols()));
}
