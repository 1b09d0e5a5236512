#include "core/verify.hpp"

#include <cmath>

#include "core/io.hpp"
#include "core/linalg.hpp"

namespace fusion {

TiltedTriple tilt_triple(const FusedModel& m, const HVector& h, double t) {
  TiltedTriple out;
  out.q = tilt(m.q(), h.q, t);
  for (std::size_t j = 0; j < m.source_count(); ++j)
    out.u.push_back(tilt(m.u()[j], h.u[j], t));
  Vec lam = m.p().lambda;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    double factor = 1.0 + t * h.lam[j];
    if (factor < 0.0) throw NumericFailure("lambda tilt leaves the simplex");
    lam[j] *= factor;
  }
  out.lambda = lam;
  return out;
}

FusedLaw tilted_law(const FusedModel& m, const HVector& h, double t) {
  TiltedTriple tt = tilt_triple(m, h, t);
  return assemble_observed_law(tt.q, tt.u, tt.lambda, m.spec());
}

double submodel_t_max(const FusedModel& m, const HVector& h) {
  double worst = 0.0;
  worst = std::max(worst, h.q.values.cwiseAbs().maxCoeff());
  for (const auto& u : h.u) worst = std::max(worst, u.values.cwiseAbs().maxCoeff());
  if (h.lam.size() > 0) worst = std::max(worst, h.lam.cwiseAbs().maxCoeff());
  return worst > 0.0 ? 0.5 / worst : std::numeric_limits<double>::infinity();
}

double tilt_score_residual(const FusedModel& m, const HVector& h, double t) {
  TiltedTriple tt = tilt_triple(m, h, t);
  double worst = 0.0;
  {
    RealTable diff = RealTable::zeros(m.q().space());
    for (std::size_t c = 0; c < m.q().cell_count(); ++c)
      if (m.q().mass(c) > 0.0)
        diff[c] = (tt.q.mass(c) / m.q().mass(c) - 1.0) / t - h.q[c];
    worst = std::max(worst, l2_norm(m.q(), diff));
  }
  for (std::size_t j = 0; j < m.source_count(); ++j) {
    RealTable diff = RealTable::zeros(m.u()[j].space());
    for (std::size_t c = 0; c < m.u()[j].cell_count(); ++c)
      if (m.u()[j].mass(c) > 0.0)
        diff[c] = (tt.u[j].mass(c) / m.u()[j].mass(c) - 1.0) / t - h.u[j][c];
    worst = std::max(worst, l2_norm(m.u()[j], diff));
  }
  double lam_sq = 0.0;
  for (Eigen::Index j = 0; j < h.lam.size(); ++j) {
    double d = (tt.lambda[j] / m.p().lambda[j] - 1.0) / t - h.lam[j];
    lam_sq += d * d * m.p().lambda[j];
  }
  return std::max(worst, std::sqrt(lam_sq));
}

PathwiseResult pathwise_check(const Framework& fw, const FusedModel& m, const ObsFunction& phi1,
                              const HVector& h, double step) {
  double tmax = submodel_t_max(m, h);
  if (!(step < tmax))
    throw NumericFailure("step leaves the positivity region of the submodel");

  auto phi_at = [&](double t) {
    return framework_phi(rebind(fw, tilted_law(m, h, t)));
  };
  auto central = [&](double s) { return (phi_at(s) - phi_at(-s)) / (2.0 * s); };

  PathwiseResult out;
  out.pairing = obs_inner(m.p(), phi1, apply_A(m, h));
  out.derivative = central(step);
  out.residual = std::abs(out.derivative - out.pairing);
  if (out.residual > 1e-6) {
    // Richardson: (4 D(s/2) - D(s)) / 3 kills the s^2 truncation term
    double refined = (4.0 * central(step / 2.0) - out.derivative) / 3.0;
    double refined_residual = std::abs(refined - out.pairing);
    if (refined_residual < out.residual) {
      out.derivative = refined;
      out.residual = refined_residual;
      out.richardson = true;
    }
  }
  return out;
}

ContractionReport contraction_counterexample(double ratio_target) {
  // factor |1 - c| with c = P(Y=1|S=1) P(S=1)/Q(Y=1); we set c = 1 + target
  if (!(ratio_target > 0.0) || !(ratio_target < 1e3))
    throw NumericFailure("requested expansion ratio is not constructible");
  const double c = 1.0 + ratio_target;
  const double lambda1 = 0.8;
  const double py1 = 0.8;  // P(Y=1|S=1)
  const double qy = py1 * lambda1 / c;
  if (!(qy > 0.0) || !(qy < 1.0))
    throw NumericFailure("requested expansion ratio is not constructible");

  AxisSet ideal(std::vector<Axis>{Axis{"Y", {"0", "1"}}, Axis{"X", {"0", "1", "2"}}});
  const double qx_given_y[2][3] = {{0.5, 0.3, 0.2}, {0.2, 0.3, 0.5}};
  Vec qmass(static_cast<Eigen::Index>(ideal.cell_count()));
  for (std::size_t cidx = 0; cidx < ideal.cell_count(); ++cidx) {
    auto mlt = ideal.unflatten(cidx);
    qmass[static_cast<Eigen::Index>(cidx)] =
        (mlt[0] == 1 ? qy : 1.0 - qy) * qx_given_y[mlt[0]][mlt[1]];
  }
  FinitePmf q(ideal, std::move(qmass));

  // source 1 observes (Y,X) with X|Y aligned; source 2 observes Y with the
  // marginal NOT aligned here -- it aligns with Q by construction instead
  AlignmentSpec spec;
  {
    SourceSpec s1;
    s1.id = 1;
    s1.observed_axes = {"Y", "X"};
    s1.blocks = {{"Y"}, {"X"}};
    s1.regions.resize(2);
    s1.regions[0].kind = BlockRegion::Kind::Empty;
    s1.regions[1].kind = BlockRegion::Kind::All;
    SourceSpec s2;
    s2.id = 2;
    s2.observed_axes = {"Y"};
    s2.blocks = {{"Y"}};
    s2.regions.resize(1);
    s2.regions[0].kind = BlockRegion::Kind::Star;
    spec.sources = {s1, s2};
  }
  FusedLaw law;
  law.lambda = Vec(2);
  law.lambda << lambda1, 1.0 - lambda1;
  {
    Vec p1(static_cast<Eigen::Index>(ideal.cell_count()));
    for (std::size_t cidx = 0; cidx < ideal.cell_count(); ++cidx) {
      auto mlt = ideal.unflatten(cidx);
      p1[static_cast<Eigen::Index>(cidx)] =
          (mlt[0] == 1 ? py1 : 1.0 - py1) * qx_given_y[mlt[0]][mlt[1]];
    }
    AxisSet yspace = ideal.subset({"Y"});
    Vec p2(2);
    p2 << 1.0 - qy, qy;
    law.source_laws = {FinitePmf(ideal, std::move(p1)), FinitePmf(yspace, std::move(p2))};
  }
  FusedModel model = FusedModel::bind(q, spec, law);

  // direction h(x,y) = I(y=1) { f(x) - E_Q[f|Y=1] }
  HVector h = HVector::zeros(model);
  {
    RealTable f = RealTable::zeros(ideal);
    const double fx[3] = {1.0, 2.0, 4.0};
    double mean1 = 0.0;
    for (int x = 0; x < 3; ++x) mean1 += qx_given_y[1][x] * fx[x];
    for (std::size_t cidx = 0; cidx < ideal.cell_count(); ++cidx) {
      auto mlt = ideal.unflatten(cidx);
      if (mlt[0] == 1) f[cidx] = fx[mlt[1]] - mean1;
    }
    h.q = f;
  }

  ContractionReport rep;
  HVector ah = apply_A_star(model, apply_A(model, h));
  HVector defect = h;
  defect.q.values -= ah.q.values;
  for (std::size_t j = 0; j < model.source_count(); ++j) defect.u[j].values -= ah.u[j].values;
  defect.lam -= ah.lam;
  rep.expansion_ratio = h_norm(model, defect) / h_norm(model, h);
  rep.predicted_factor = std::abs(1.0 - py1 * lambda1 / qy);
  rep.non_contraction = rep.expansion_ratio > 1.0;
  rep.boundary = std::abs(rep.predicted_factor - 1.0) <= 1e-9;

  // explicit inverse on Null-perp: h~ with A*A h~ = h
  {
    HVector htilde = HVector::zeros(model);
    RealTable ey = cond_mean(model.q(), h.q, {"Y"}, false);
    Projection to_y(ideal, ideal.subset({"Y"}));
    for (std::size_t cidx = 0; cidx < ideal.cell_count(); ++cidx) {
      auto mlt = ideal.unflatten(cidx);
      double qyv = mlt[0] == 1 ? qy : 1.0 - qy;
      double pyv = mlt[0] == 1 ? py1 : 1.0 - py1;
      double centered = h.q[cidx] - ey[to_y(cidx)];
      htilde.q[cidx] = qyv / (pyv * lambda1) * centered + ey[to_y(cidx)] / (1.0 - lambda1);
    }
    HVector back = apply_A_star(model, apply_A(model, htilde));
    back.q.values -= h.q.values;
    rep.inverse_residual = l2_norm(model.q(), back.q);
  }

  // information operator restricted to the orthocomplement of its null space
  {
    HBasis basis = h_basis(model);
    Mat a = a_matrix(model, basis);
    Mat gram = information_gram(model, basis, a);
    Eigen::JacobiSVD<Mat> svd(gram);
    const auto& sv = svd.singularValues();
    double cut = sv.size() ? tol::rank_rel * sv[0] : 0.0;
    double smin = sv[0];
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv[i] > cut) smin = sv[i];
    rep.condition_number = sv[0] / smin;
  }
  return rep;
}

std::vector<double> default_s1_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  return grid;
}

std::vector<AreRow> are_curves(const std::vector<double>& s1_grid) {
  std::vector<AreRow> rows;
  for (double p_s1 : s1_grid) {
    if (!(p_s1 > 0.0) || !(p_s1 < 1.0)) throw InvalidSpec("grid values must lie in (0,1)");
    AreRow row;
    row.p_s1 = p_s1;
    {
      Framework fw = bind_framework(appendix_c_model(p_s1, FrameworkKind::TransportII));
      row.var_ii = obs_variance(fw.law, framework_eif(fw));
    }
    {
      Framework fw = bind_framework(appendix_c_model(p_s1, FrameworkKind::TransportIIIa));
      row.var_iiia = obs_variance(fw.law, framework_eif(fw));
    }
    {
      Framework fw = bind_framework(appendix_c_model(p_s1, FrameworkKind::TransportIIIb));
      row.var_iiib = obs_variance(fw.law, framework_eif(fw));
    }
    row.are_ii = row.var_ii / row.var_iiia;
    row.are_iiib = row.var_iiib / row.var_iiia;
    rows.push_back(row);
  }
  return rows;
}

std::string are_csv(const std::vector<AreRow>& rows) {
  std::string out = "p_s1,var_iiia,var_ii,var_iiib,are_ii,are_iiib\n";
  for (const auto& r : rows) {
    out += format_double(r.p_s1) + "," + format_double(r.var_iiia) + "," +
           format_double(r.var_ii) + "," + format_double(r.var_iiib) + "," +
           format_double(r.are_ii) + "," + format_double(r.are_iiib) + "\n";
  }
  return out;
}

}  // namespace fusion
