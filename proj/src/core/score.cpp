#include "core/score.hpp"

#include <cmath>

#include "core/linalg.hpp"

namespace fusion {

ObsFunction apply_A(const FusedModel& m, const HVector& h) {
  ObsFunction g = ObsFunction::zeros(m);
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const SourceStructure& st = m.structure(j);
    RealTable& out = g.per_source[j];
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      RealTable d = project_D(m, j, k, h.q);
      RealTable r = project_R(m, j, k, h.u[j], m.u()[j]);
      Projection src_to_post(st.z_space, st.prefix_space[k + 1]);
      for (std::size_t c = 0; c < out.size(); ++c) {
        std::size_t post = src_to_post(c);
        out[c] += d[post] + r[post];
      }
    }
    out.values.array() += h.lam[static_cast<Eigen::Index>(j)];
  }
  return g;
}

ObsDecomposition decompose_obs_function(const FusedModel& m, const ObsFunction& g) {
  ObsDecomposition dec;
  dec.m_parts.resize(m.source_count());
  dec.n_parts.resize(m.source_count());
  dec.gamma = Vec::Zero(static_cast<Eigen::Index>(m.source_count()));
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const SourceStructure& st = m.structure(j);
    const FinitePmf& pj = m.p().source_laws[j];
    dec.gamma[static_cast<Eigen::Index>(j)] = mean(pj, g.per_source[j]);
    RealTable prev = RealTable::constant(st.prefix_space[0], dec.gamma[static_cast<Eigen::Index>(j)]);
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      RealTable cur = cond_mean(pj, g.per_source[j], st.prefix_space[k + 1], /*strict=*/false);
      Projection post_to_pre(st.prefix_space[k + 1], st.prefix_space[k]);
      RealTable mk = RealTable::zeros(st.prefix_space[k + 1]);
      RealTable nk = RealTable::zeros(st.prefix_space[k + 1]);
      for (std::size_t c = 0; c < cur.size(); ++c) {
        std::size_t pre = post_to_pre(c);
        double t = cur[c] - prev[pre];
        if (st.region_mask[k][pre])
          mk[c] = t;
        else
          nk[c] = t;
      }
      dec.m_parts[j].push_back(std::move(mk));
      dec.n_parts[j].push_back(std::move(nk));
      prev = std::move(cur);
    }
  }
  return dec;
}

double decomposition_residual(const FusedModel& m, const ObsFunction& g,
                              const ObsDecomposition& d) {
  double worst = 0.0;
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const SourceStructure& st = m.structure(j);
    const FinitePmf& pj = m.p().source_laws[j];
    std::vector<Projection> to_post;
    for (std::size_t k = 0; k < st.block_count(); ++k)
      to_post.emplace_back(st.z_space, st.prefix_space[k + 1]);
    for (std::size_t c = 0; c < pj.cell_count(); ++c) {
      if (!(pj.mass(c) > 0.0)) continue;
      double r = d.gamma[static_cast<Eigen::Index>(j)];
      for (std::size_t k = 0; k < st.block_count(); ++k) {
        std::size_t post = to_post[k](c);
        r += d.m_parts[j][k][post] + d.n_parts[j][k][post];
      }
      worst = std::max(worst, std::abs(r - g.per_source[j][c]));
    }
  }
  return worst;
}

RealTable project_tangent_q(const FusedModel& m, const RealTable& f) {
  if (m.q_nonparametric()) {
    RealTable out = f;
    out.values.array() -= mean(m.q(), f);
    return out;
  }
  const Mat& b = m.tangent_q_basis();
  Vec coef = b.transpose() * (m.q().mass().asDiagonal() * f.values);
  return RealTable(f.space, b * coef);
}

HVector apply_A_star(const FusedModel& m, const ObsFunction& g) {
  ObsDecomposition dec = decompose_obs_function(m, g);
  HVector out = HVector::zeros(m);

  RealTable q_raw = RealTable::zeros(m.q().space());
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const SourceStructure& st = m.structure(j);
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      const RealTable& ratio = m.ratio_p_over_q(j, k);  // on prefix k
      Projection post_to_pre(st.prefix_space[k + 1], st.prefix_space[k]);
      RealTable f = RealTable::zeros(st.prefix_space[k + 1]);
      for (std::size_t c = 0; c < f.size(); ++c)
        f[c] = ratio[post_to_pre(c)] * m.lambda(j) * dec.m_parts[j][k][c];
      q_raw.values += expand(f, m.q().space()).values;
    }
  }
  out.q = project_tangent_q(m, q_raw);

  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const SourceStructure& st = m.structure(j);
    RealTable acc = RealTable::zeros(st.z_space);
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      const RealTable& ratio = m.ratio_p_over_u(j, k);
      Projection src_to_post(st.z_space, st.prefix_space[k + 1]);
      Projection src_to_pre(st.z_space, st.prefix_space[k]);
      for (std::size_t c = 0; c < acc.size(); ++c)
        acc[c] += ratio[src_to_pre(c)] * m.lambda(j) * dec.n_parts[j][k][src_to_post(c)];
    }
    out.u[j] = std::move(acc);
  }

  out.lam = dec.gamma;
  return out;
}

Mat a_matrix_cells(const FusedModel& m) {
  HVector proto = HVector::zeros(m);
  const Vec flat = flatten_h(proto);
  const auto ncols = flat.size();
  Mat out(flatten_obs(ObsFunction::zeros(m)).size(), ncols);
  for (Eigen::Index c = 0; c < ncols; ++c) {
    Vec unit = Vec::Zero(ncols);
    unit[c] = 1.0;
    out.col(c) = flatten_obs(apply_A(m, unflatten_h(m, unit)));
  }
  return out;
}

Mat a_star_matrix_cells(const FusedModel& m) {
  ObsFunction proto = ObsFunction::zeros(m);
  const auto ncols = flatten_obs(proto).size();
  Mat out(flatten_h(HVector::zeros(m)).size(), ncols);
  for (Eigen::Index c = 0; c < ncols; ++c) {
    Vec unit = Vec::Zero(ncols);
    unit[c] = 1.0;
    out.col(c) = flatten_h(apply_A_star(m, unflatten_obs(m, unit)));
  }
  return out;
}

Mat information_matrix_cells(const FusedModel& m) {
  return a_star_matrix_cells(m) * a_matrix_cells(m);
}

Mat a_matrix(const FusedModel& m, const HBasis& b) {
  const auto d = static_cast<Eigen::Index>(b.dim());
  Mat out(flatten_obs(ObsFunction::zeros(m)).size(), d);
  for (Eigen::Index c = 0; c < d; ++c) {
    Vec coef = Vec::Zero(d);
    coef[c] = 1.0;
    out.col(c) = flatten_obs(apply_A(m, b.member(m, coef)));
  }
  return out;
}

Mat information_gram(const FusedModel& m, const HBasis& b, const Mat& a_coef) {
  (void)b;
  Vec w = obs_weights(m);
  Mat weighted = w.asDiagonal() * a_coef;
  return a_coef.transpose() * weighted;
}

SubspaceBasis tangent_space(const FusedModel& m) {
  Vec w = obs_weights(m);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!(w[i] > 0.0))
      throw NumericFailure("tangent space needs a strictly positive observed law");
  HBasis b = h_basis(m);
  Mat a = a_matrix(m, b);
  Vec sqrtw = w.array().sqrt();
  Mat y = sqrtw.asDiagonal() * a;
  Mat cols = column_space(y);
  SubspaceBasis out;
  out.ambient = "observed:P";
  out.weight = w;
  out.columns = (sqrtw.array().inverse()).matrix().asDiagonal() * cols;
  return out;
}

std::vector<std::string> obs_cell_labels(const FusedModel& m) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const AxisSet& z = m.structure(j).z_space;
    for (std::size_t c = 0; c < z.cell_count(); ++c)
      out.push_back("s=" + std::to_string(j + 1) + ":" + z.cell_label(c));
  }
  return out;
}

std::vector<std::string> h_cell_labels(const FusedModel& m) {
  std::vector<std::string> out;
  const AxisSet& w = m.q().space();
  for (std::size_t c = 0; c < w.cell_count(); ++c) out.push_back("Q:" + w.cell_label(c));
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const AxisSet& z = m.structure(j).z_space;
    for (std::size_t c = 0; c < z.cell_count(); ++c)
      out.push_back("U" + std::to_string(j + 1) + ":" + z.cell_label(c));
  }
  for (std::size_t j = 1; j <= m.source_count(); ++j)
    out.push_back("lambda:S=" + std::to_string(j));
  return out;
}

}  // namespace fusion
