#include "core/spaces.hpp"

#include <cmath>

#include "core/linalg.hpp"

namespace fusion {

ObsFunction ObsFunction::zeros(const FusedModel& m) {
  ObsFunction f;
  for (std::size_t j = 0; j < m.source_count(); ++j)
    f.per_source.push_back(RealTable::zeros(m.structure(j).z_space));
  return f;
}

std::size_t ObsFunction::total_cells() const {
  std::size_t n = 0;
  for (const auto& t : per_source) n += t.size();
  return n;
}

double obs_mean(const FusedLaw& p, const ObsFunction& f) {
  double out = 0.0;
  for (std::size_t j = 0; j < p.source_count(); ++j)
    out += p.lambda[static_cast<Eigen::Index>(j)] * mean(p.source_laws[j], f.per_source[j]);
  return out;
}

double obs_inner(const FusedLaw& p, const ObsFunction& f, const ObsFunction& g) {
  double out = 0.0;
  for (std::size_t j = 0; j < p.source_count(); ++j)
    out += p.lambda[static_cast<Eigen::Index>(j)] *
           l2_inner(p.source_laws[j], f.per_source[j], g.per_source[j]);
  return out;
}

double obs_variance(const FusedLaw& p, const ObsFunction& f) {
  double m = obs_mean(p, f);
  double s = 0.0;
  for (std::size_t j = 0; j < p.source_count(); ++j) {
    const auto& law = p.source_laws[j];
    for (std::size_t c = 0; c < law.cell_count(); ++c) {
      double d = f.per_source[j][c] - m;
      s += p.lambda[static_cast<Eigen::Index>(j)] * law.mass(c) * d * d;
    }
  }
  return s;
}

ObsFunction obs_add(const ObsFunction& a, const ObsFunction& b, double scale_b) {
  ObsFunction out = a;
  for (std::size_t j = 0; j < out.per_source.size(); ++j)
    out.per_source[j].values += scale_b * b.per_source[j].values;
  return out;
}

Vec flatten_obs(const ObsFunction& f) {
  Vec out(static_cast<Eigen::Index>(f.total_cells()));
  Eigen::Index at = 0;
  for (const auto& t : f.per_source) {
    out.segment(at, t.values.size()) = t.values;
    at += t.values.size();
  }
  return out;
}

ObsFunction unflatten_obs(const FusedModel& m, const Vec& v) {
  ObsFunction f = ObsFunction::zeros(m);
  Eigen::Index at = 0;
  for (auto& t : f.per_source) {
    t.values = v.segment(at, t.values.size());
    at += t.values.size();
  }
  return f;
}

Vec obs_weights(const FusedModel& m) {
  std::size_t n = 0;
  for (std::size_t j = 0; j < m.source_count(); ++j)
    n += m.p().source_laws[j].cell_count();
  Vec out(static_cast<Eigen::Index>(n));
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    const auto& law = m.p().source_laws[j];
    out.segment(at, static_cast<Eigen::Index>(law.cell_count())) = m.lambda(j) * law.mass();
    at += static_cast<Eigen::Index>(law.cell_count());
  }
  return out;
}

HVector HVector::zeros(const FusedModel& m) {
  HVector h;
  h.q = RealTable::zeros(m.q().space());
  for (std::size_t j = 0; j < m.source_count(); ++j)
    h.u.push_back(RealTable::zeros(m.structure(j).z_space));
  h.lam = Vec::Zero(static_cast<Eigen::Index>(m.source_count()));
  return h;
}

double h_inner(const FusedModel& m, const HVector& a, const HVector& b) {
  double out = l2_inner(m.q(), a.q, b.q);
  for (std::size_t j = 0; j < m.source_count(); ++j)
    out += l2_inner(m.u()[j], a.u[j], b.u[j]);
  out += (a.lam.array() * b.lam.array() * m.p().lambda.array()).sum();
  return out;
}

double h_norm(const FusedModel& m, const HVector& a) {
  return std::sqrt(std::max(0.0, h_inner(m, a, a)));
}

void validate_hvector(const FusedModel& m, const HVector& h, double tolerance) {
  if (std::abs(mean(m.q(), h.q)) > tolerance)
    throw ValidationFailure("h_Q is not mean-zero under Q");
  for (std::size_t j = 0; j < m.source_count(); ++j)
    if (std::abs(mean(m.u()[j], h.u[j])) > tolerance)
      throw ValidationFailure("h_U is not mean-zero under U^(j)");
  if (std::abs((h.lam.array() * m.p().lambda.array()).sum()) > tolerance)
    throw ValidationFailure("h_lambda is not mean-zero under lambda");
  if (!m.q_nonparametric()) {
    const Mat& b = m.tangent_q_basis();
    Vec coef = b.transpose() * (m.q().mass().asDiagonal() * h.q.values);
    Vec resid = h.q.values - b * coef;
    double norm = std::sqrt((resid.array().square() * m.q().mass().array()).sum());
    if (norm > tolerance) throw ValidationFailure("h_Q lies outside T(Q,Q)");
  }
}

Vec flatten_h(const HVector& h) {
  std::size_t n = h.q.size() + static_cast<std::size_t>(h.lam.size());
  for (const auto& t : h.u) n += t.size();
  Vec out(static_cast<Eigen::Index>(n));
  Eigen::Index at = 0;
  out.segment(at, h.q.values.size()) = h.q.values;
  at += h.q.values.size();
  for (const auto& t : h.u) {
    out.segment(at, t.values.size()) = t.values;
    at += t.values.size();
  }
  out.segment(at, h.lam.size()) = h.lam;
  return out;
}

HVector unflatten_h(const FusedModel& m, const Vec& v) {
  HVector h = HVector::zeros(m);
  Eigen::Index at = 0;
  h.q.values = v.segment(at, h.q.values.size());
  at += h.q.values.size();
  for (auto& t : h.u) {
    t.values = v.segment(at, t.values.size());
    at += t.values.size();
  }
  h.lam = v.segment(at, h.lam.size());
  return h;
}

Vec h_weights(const FusedModel& m) {
  HVector proto = HVector::zeros(m);
  Vec out(flatten_h(proto).size());
  Eigen::Index at = 0;
  out.segment(at, m.q().mass().size()) = m.q().mass();
  at += m.q().mass().size();
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    out.segment(at, m.u()[j].mass().size()) = m.u()[j].mass();
    at += m.u()[j].mass().size();
  }
  out.segment(at, m.p().lambda.size()) = m.p().lambda;
  return out;
}

namespace {

// Spanning vectors for one conditionally-centered block slice, then MGS.
Mat increment_span(const AxisSet& post, const FinitePmf& post_law,
                   const std::vector<std::uint8_t>& mask, const Projection& post_to_pre,
                   const FinitePmf& pre_law) {
  std::vector<Vec> span;
  for (std::size_t g = 0; g < mask.size(); ++g) {
    if (!mask[g] || !(pre_law.mass(g) > 0.0)) continue;
    // indicators of each post-cell in the slice, centered within the slice
    for (std::size_t c = 0; c < post.cell_count(); ++c) {
      if (post_to_pre(c) != g) continue;
      Vec v = Vec::Zero(static_cast<Eigen::Index>(post.cell_count()));
      double cond = post_law.mass(c) / pre_law.mass(g);
      for (std::size_t c2 = 0; c2 < post.cell_count(); ++c2)
        if (post_to_pre(c2) == g)
          v[static_cast<Eigen::Index>(c2)] = (c2 == c ? 1.0 : 0.0) - cond;
      span.push_back(std::move(v));
    }
  }
  Mat out(static_cast<Eigen::Index>(post.cell_count()), static_cast<Eigen::Index>(span.size()));
  for (std::size_t i = 0; i < span.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = span[i];
  return out;
}

}  // namespace

SubspaceBasis basis_D(const FusedModel& m, std::size_t j, std::size_t k) {
  const SourceStructure& st = m.structure(j);
  const AxisSet& post = st.prefix_space[k + 1];
  Projection post_to_pre(post, st.prefix_space[k]);
  Mat span = increment_span(post, m.q_prefix(j, k + 1), st.region_mask[k], post_to_pre,
                            m.q_prefix(j, k));
  // expand each vector to the ideal space and orthonormalize there
  Projection ideal_to_post(m.q().space(), post);
  Mat full(static_cast<Eigen::Index>(m.q().cell_count()), span.cols());
  for (Eigen::Index col = 0; col < span.cols(); ++col)
    for (std::size_t c = 0; c < m.q().cell_count(); ++c)
      full(static_cast<Eigen::Index>(c), col) = span(static_cast<Eigen::Index>(ideal_to_post(c)), col);
  SubspaceBasis b;
  b.ambient = "ideal:Q";
  b.weight = m.q().mass();
  b.columns = gram_schmidt(full, b.weight);
  return b;
}

SubspaceBasis basis_R(const FusedModel& m, std::size_t j, std::size_t k) {
  const SourceStructure& st = m.structure(j);
  const AxisSet& post = st.prefix_space[k + 1];
  Projection post_to_pre(post, st.prefix_space[k]);
  std::vector<std::uint8_t> complement(st.region_mask[k].size());
  for (std::size_t g = 0; g < complement.size(); ++g) {
    complement[g] = !st.region_mask[k][g] && m.p_prefix(j, k).mass(g) > 0.0;
  }
  Mat span = increment_span(post, m.p_prefix(j, k + 1), complement, post_to_pre,
                            m.p_prefix(j, k));
  Projection src_to_post(st.z_space, post);
  Mat full(static_cast<Eigen::Index>(st.z_space.cell_count()), span.cols());
  for (Eigen::Index col = 0; col < span.cols(); ++col)
    for (std::size_t c = 0; c < st.z_space.cell_count(); ++c)
      full(static_cast<Eigen::Index>(c), col) = span(static_cast<Eigen::Index>(src_to_post(c)), col);
  SubspaceBasis b;
  b.ambient = "source" + std::to_string(j + 1) + ":P";
  b.weight = m.p().source_laws[j].mass();
  b.columns = gram_schmidt(full, b.weight);
  return b;
}

RealTable project_D(const FusedModel& m, std::size_t j, std::size_t k, const RealTable& f_ideal) {
  const SourceStructure& st = m.structure(j);
  RealTable post_mean = cond_mean(m.q(), f_ideal, st.prefix_space[k + 1], /*strict=*/false);
  RealTable pre_mean = cond_mean(m.q(), f_ideal, st.prefix_space[k], /*strict=*/false);
  Projection post_to_pre(st.prefix_space[k + 1], st.prefix_space[k]);
  RealTable out = RealTable::zeros(st.prefix_space[k + 1]);
  for (std::size_t c = 0; c < out.size(); ++c) {
    std::size_t g = post_to_pre(c);
    if (st.region_mask[k][g]) out[c] = post_mean[c] - pre_mean[g];
  }
  return out;
}

RealTable project_R(const FusedModel& m, std::size_t j, std::size_t k, const RealTable& f_source,
                    const FinitePmf& law) {
  const SourceStructure& st = m.structure(j);
  RealTable post_mean = cond_mean(law, f_source, st.prefix_space[k + 1], /*strict=*/false);
  RealTable pre_mean = cond_mean(law, f_source, st.prefix_space[k], /*strict=*/false);
  Projection post_to_pre(st.prefix_space[k + 1], st.prefix_space[k]);
  RealTable out = RealTable::zeros(st.prefix_space[k + 1]);
  for (std::size_t c = 0; c < out.size(); ++c) {
    std::size_t g = post_to_pre(c);
    if (!st.region_mask[k][g]) out[c] = post_mean[c] - pre_mean[g];
  }
  return out;
}

std::size_t HBasis::dim() const {
  std::size_t n = static_cast<std::size_t>(q_cols.cols()) + static_cast<std::size_t>(lam_cols.cols());
  for (const auto& u : u_cols) n += static_cast<std::size_t>(u.cols());
  return n;
}

HVector HBasis::member(const FusedModel& m, const Vec& coef) const {
  HVector h = HVector::zeros(m);
  Eigen::Index at = 0;
  h.q.values = q_cols * coef.segment(at, q_cols.cols());
  at += q_cols.cols();
  for (std::size_t j = 0; j < u_cols.size(); ++j) {
    h.u[j].values = u_cols[j] * coef.segment(at, u_cols[j].cols());
    at += u_cols[j].cols();
  }
  h.lam = lam_cols * coef.segment(at, lam_cols.cols());
  return h;
}

Vec HBasis::coefficients(const FusedModel& m, const HVector& h) const {
  Vec out(static_cast<Eigen::Index>(dim()));
  Eigen::Index at = 0;
  out.segment(at, q_cols.cols()) = q_cols.transpose() * (m.q().mass().asDiagonal() * h.q.values);
  at += q_cols.cols();
  for (std::size_t j = 0; j < u_cols.size(); ++j) {
    out.segment(at, u_cols[j].cols()) =
        u_cols[j].transpose() * (m.u()[j].mass().asDiagonal() * h.u[j].values);
    at += u_cols[j].cols();
  }
  out.segment(at, lam_cols.cols()) =
      lam_cols.transpose() * (m.p().lambda.asDiagonal() * h.lam);
  return out;
}

Mat l20_basis(const FinitePmf& p) {
  const auto n = static_cast<Eigen::Index>(p.cell_count());
  Mat span(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Vec v = Vec::Zero(n);
    v[c] = 1.0;
    v.array() -= p.mass()[c];
    span.col(c) = v;
  }
  return gram_schmidt(span, p.mass());
}

HBasis h_basis(const FusedModel& m) {
  HBasis b;
  b.q_cols = m.q_nonparametric() ? l20_basis(m.q()) : m.tangent_q_basis();
  for (std::size_t j = 0; j < m.source_count(); ++j) b.u_cols.push_back(l20_basis(m.u()[j]));
  FinitePmf lam_pmf = FinitePmf::normalized(
      AxisSet({Axis{"S", [&] {
                      std::vector<std::string> lv;
                      for (std::size_t j = 1; j <= m.source_count(); ++j)
                        lv.push_back(std::to_string(j));
                      return lv;
                    }()}}),
      m.p().lambda);
  b.lam_cols = l20_basis(lam_pmf);
  return b;
}

}  // namespace fusion
