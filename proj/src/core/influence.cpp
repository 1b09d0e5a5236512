#include "core/influence.hpp"

#include <cmath>

#include "core/io.hpp"
#include "core/linalg.hpp"

namespace fusion {

namespace {

// Orthogonal projection onto ⊕_k D_k^(j)(Q), as a function on the ideal space.
RealTable project_d_sum(const FusedModel& m, std::size_t j, const RealTable& f) {
  RealTable out = RealTable::zeros(m.q().space());
  for (std::size_t k = 0; k < m.structure(j).block_count(); ++k)
    out.values += expand(project_D(m, j, k, f), m.q().space()).values;
  return out;
}

Mat d_sum_columns(const FusedModel& m, std::size_t j) {
  std::vector<Mat> parts;
  Eigen::Index cols = 0;
  for (std::size_t k = 0; k < m.structure(j).block_count(); ++k) {
    parts.push_back(basis_D(m, j, k).columns);
    cols += parts.back().cols();
  }
  Mat out(static_cast<Eigen::Index>(m.q().cell_count()), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return out;
}

IFDecomposition split_into_components(const FusedModel& m,
                                      const std::vector<RealTable>& per_source_w,
                                      const RealTable& psi1) {
  IFDecomposition dec;
  dec.psi1 = psi1;
  dec.m_parts.resize(m.source_count());
  for (std::size_t j = 0; j < m.source_count(); ++j)
    for (std::size_t k = 0; k < m.structure(j).block_count(); ++k)
      dec.m_parts[j].push_back(project_D(m, j, k, per_source_w[j]));
  return dec;
}

}  // namespace

DecomposeOutcome decompose_algorithm(const FusedModel& m, const RealTable& psi1,
                                     const std::vector<RealTable>* forced_f) {
  if (!psi1.space.same_as(m.q().space())) throw InvalidSpec("psi1 must live on the ideal space");
  const double scale = std::max(l2_norm(m.q(), psi1), 1e-300);
  const Vec sqrtw = m.q().mass().array().sqrt();
  const std::size_t nsrc = m.source_count();

  DecomposeOutcome out;
  out.dec.psi1 = psi1;
  out.dec.m_parts.resize(nsrc);
  out.ok = true;

  RealTable target = psi1;
  for (std::size_t j = 0; j < nsrc; ++j) {
    RealTable rhs_perp = target;
    rhs_perp.values -= project_d_sum(m, j, target).values;

    RealTable f_tilde = RealTable::zeros(m.q().space());
    if (forced_f) {
      f_tilde = (*forced_f)[j];
      Vec check = f_tilde.values - project_d_sum(m, j, f_tilde).values - rhs_perp.values;
      double r = std::sqrt((check.array().square() * m.q().mass().array()).sum()) / scale;
      out.residual = std::max(out.residual, r);
      if (r > tol::residual) {
        out.ok = false;
        return out;
      }
    } else {
      // dictionary: the later sources' D spaces
      std::vector<Mat> later;
      Eigen::Index cols = 0;
      for (std::size_t l = j + 1; l < nsrc; ++l) {
        later.push_back(d_sum_columns(m, l));
        cols += later.back().cols();
      }
      if (cols == 0) {
        double r = l2_norm(m.q(), rhs_perp) / scale;
        out.residual = std::max(out.residual, r);
        if (r > tol::residual) {
          out.ok = false;
          return out;
        }
      } else {
        Mat dict(static_cast<Eigen::Index>(m.q().cell_count()), cols);
        Eigen::Index at = 0;
        for (const auto& p : later) {
          dict.middleCols(at, p.cols()) = p;
          at += p.cols();
        }
        // apply (I - P_j) to each column, then solve in sqrt-mass coordinates
        Mat lhs(dict.rows(), dict.cols());
        for (Eigen::Index col = 0; col < dict.cols(); ++col) {
          RealTable fc(m.q().space(), dict.col(col));
          lhs.col(col) = (fc.values - project_d_sum(m, j, fc).values).cwiseProduct(sqrtw);
        }
        Vec b = rhs_perp.values.cwiseProduct(sqrtw);
        LstsqResult ls = lstsq_min_norm(lhs, b);
        double r = ls.residual / scale;
        out.residual = std::max(out.residual, r);
        if (r > tol::residual) {
          out.ok = false;
          return out;
        }
        f_tilde.values = dict * ls.x;
      }
    }
    out.f_tilde.push_back(f_tilde);

    RealTable reduced = target;
    reduced.values -= f_tilde.values;
    for (std::size_t k = 0; k < m.structure(j).block_count(); ++k) {
      RealTable mk = project_D(m, j, k, reduced);
      target.values -= expand(mk, m.q().space()).values;
      out.dec.m_parts[j].push_back(std::move(mk));
    }
  }
  return out;
}

DecomposeOutcome two_source_solve(const FusedModel& m, const RealTable& psi1) {
  if (m.source_count() != 2) throw InvalidSpec("two_source_solve requires exactly two sources");
  if (!psi1.space.same_as(m.q().space())) throw InvalidSpec("psi1 must live on the ideal space");
  const double scale = std::max(l2_norm(m.q(), psi1), 1e-300);
  const Vec sqrtw = m.q().mass().array().sqrt();

  RealTable rhs = psi1;
  rhs.values -= project_d_sum(m, 0, psi1).values;

  Mat dict = d_sum_columns(m, 1);
  Mat lhs(dict.rows(), dict.cols());
  for (Eigen::Index col = 0; col < dict.cols(); ++col) {
    RealTable fc(m.q().space(), dict.col(col));
    lhs.col(col) = (fc.values - project_d_sum(m, 0, fc).values).cwiseProduct(sqrtw);
  }
  LstsqResult ls = lstsq_min_norm(lhs, rhs.values.cwiseProduct(sqrtw));

  DecomposeOutcome out;
  out.residual = ls.residual / scale;
  out.ok = out.residual <= tol::residual;
  if (!out.ok) return out;

  RealTable m2(m.q().space(), dict * ls.x);
  RealTable m1 = psi1;
  m1.values -= m2.values;
  out.f_tilde.push_back(m2);
  out.dec = split_into_components(m, {m1, m2}, psi1);
  return out;
}

ObsFunction lift_to_observed(const FusedModel& m, const IFDecomposition& dec) {
  ObsFunction phi = ObsFunction::zeros(m);
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const SourceStructure& st = m.structure(j);
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      const RealTable& ratio = m.ratio_q_over_p(j, k);
      Projection to_post(st.z_space, st.prefix_space[k + 1]);
      Projection to_pre(st.z_space, st.prefix_space[k]);
      for (std::size_t c = 0; c < st.z_space.cell_count(); ++c)
        phi.per_source[j][c] += ratio[to_pre(c)] * dec.m_parts[j][k][to_post(c)] / m.lambda(j);
    }
  }
  return phi;
}

double gradient_equation_residual(const FusedModel& m, const ObsFunction& phi1,
                                  const RealTable& psi1) {
  HVector adj = apply_A_star(m, phi1);
  RealTable want = project_tangent_q(m, psi1);
  adj.q.values -= want.values;
  double worst = l2_norm(m.q(), adj.q);
  for (std::size_t j = 0; j < m.source_count(); ++j)
    worst = std::max(worst, l2_norm(m.u()[j], adj.u[j]));
  worst = std::max(worst, std::sqrt((adj.lam.array().square() * m.p().lambda.array()).sum()));
  return worst;
}

SubspaceBasis d_intersection(const FusedModel& m) {
  if (m.source_count() != 2) throw InvalidSpec("d_intersection requires exactly two sources");
  Mat b1 = d_sum_columns(m, 0);
  Mat b2 = d_sum_columns(m, 1);
  SubspaceBasis out;
  out.ambient = "ideal:Q";
  out.weight = m.q().mass();
  out.columns = subspace_intersection(b1, b2, out.weight);
  return out;
}

ObsFunction family_member(const FusedModel& m, const ObsFunction& phi1, const RealTable& f) {
  ObsFunction out = phi1;
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const double sign = (j == 0) ? 1.0 : -1.0;
    const SourceStructure& st = m.structure(j);
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      RealTable pf = project_D(m, j, k, f);
      const RealTable& ratio = m.ratio_q_over_p(j, k);
      Projection to_post(st.z_space, st.prefix_space[k + 1]);
      Projection to_pre(st.z_space, st.prefix_space[k]);
      for (std::size_t c = 0; c < st.z_space.cell_count(); ++c)
        out.per_source[j][c] += sign * ratio[to_pre(c)] * pf[to_post(c)] / m.lambda(j);
    }
  }
  return out;
}

ObsFunction eif_project(const FusedModel& m, const ObsFunction& phi1) {
  SubspaceBasis t = tangent_space(m);
  Vec flat = flatten_obs(phi1);
  Vec coef = t.columns.transpose() * (t.weight.asDiagonal() * flat);
  return unflatten_obs(m, t.columns * coef);
}

EifSolveResult eif_solve(const FusedModel& m, const RealTable& psi1_eff) {
  RealTable projected = project_tangent_q(m, psi1_eff);
  {
    Vec diff = psi1_eff.values - projected.values;
    double r = std::sqrt((diff.array().square() * m.q().mass().array()).sum());
    if (r > tol::residual * std::max(1.0, l2_norm(m.q(), psi1_eff)))
      throw ValidationFailure("psi1_eff does not lie in T(Q,Q)");
  }

  HBasis b = h_basis(m);
  Mat a_coef = a_matrix(m, b);
  Mat gram = information_gram(m, b, a_coef);

  Vec rhs = Vec::Zero(static_cast<Eigen::Index>(b.dim()));
  rhs.head(b.q_cols.cols()) =
      b.q_cols.transpose() * (m.q().mass().asDiagonal() * projected.values);

  Vec coef = pinv(gram) * rhs;
  double rhs_norm = rhs.norm();
  double range_residual = (gram * coef - rhs).norm() / std::max(rhs_norm, 1e-300);
  if (rhs_norm > 0.0 && range_residual > tol::rank_rel * 1e3)
    throw NumericFailure("(psi1_eff, 0, 0) is not in the range of the information operator "
                         "(residual " + format_double(range_residual) + ")");

  EifSolveResult out;
  out.h = b.member(m, coef);
  out.phi_eff = apply_A(m, out.h);
  out.range_residual = range_residual;
  out.gradient_residual = gradient_equation_residual(m, out.phi_eff, projected);
  if (out.gradient_residual > 1e-9 * std::max(1.0, l2_norm(m.q(), projected)))
    throw NumericFailure("eif_solve verification failed: gradient residual " +
                         format_double(out.gradient_residual));
  return out;
}

PathwiseWitness check_pathwise_differentiable(const FusedModel& m, const RealTable& psi1_eff,
                                              const Mat& perp_basis) {
  const double scale = std::max(l2_norm(m.q(), psi1_eff), 1e-300);
  const Vec sqrtw = m.q().mass().array().sqrt();

  // distance from psi1_eff to span(all D spaces) + span(perp directions)
  std::vector<Mat> parts;
  Eigen::Index cols = 0;
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    parts.push_back(d_sum_columns(m, j));
    cols += parts.back().cols();
  }
  Mat dict(static_cast<Eigen::Index>(m.q().cell_count()), cols + perp_basis.cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    dict.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  if (perp_basis.cols() > 0) dict.middleCols(at, perp_basis.cols()) = perp_basis;

  Mat lhs = sqrtw.asDiagonal() * dict;
  LstsqResult ls = lstsq_min_norm(lhs, psi1_eff.values.cwiseProduct(sqrtw));

  PathwiseWitness out;
  out.witness = psi1_eff;
  if (ls.residual / scale > tol::residual) {
    out.differentiable = false;
    return out;
  }
  // witness = psi1_eff - perp-part: the member of the family inside span(D)
  if (perp_basis.cols() > 0) {
    Vec perp_coef = ls.x.tail(perp_basis.cols());
    out.witness.values -= perp_basis * perp_coef;
  }
  out.outcome = decompose_algorithm(m, out.witness);
  out.differentiable = out.outcome.ok;
  return out;
}

}  // namespace fusion
