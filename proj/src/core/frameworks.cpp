#include "core/frameworks.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "core/io.hpp"
#include "core/linalg.hpp"

namespace fusion {

using nlohmann::json;

namespace {
constexpr double kInstrumentFloor = 1e-6;

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::string& b) {
  a.push_back(b);
  return a;
}

// conditional q(target|given) over [given...,target...], zeros where undefined
RealTable cond_table(const FinitePmf& p, const std::vector<std::string>& target,
                     const std::vector<std::string>& given) {
  return conditional(p, target, given, /*strict=*/false).table;
}

FinitePmf reorder(const FinitePmf& p, const std::vector<std::string>& names) {
  return marginal(p, names);
}
}  // namespace

double level_value(const Axis& axis, std::size_t idx) {
  const std::string& label = axis.levels[idx];
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(label, &pos);
  } catch (...) {
    pos = 0;
  }
  if (pos != label.size())
    throw InvalidSpec("axis '" + axis.name + "' level '" + label + "' is not numeric");
  return v;
}

RealTable axis_values(const AxisSet& space, const std::string& axis) {
  std::size_t ai = space.axis_index(axis);
  RealTable out = RealTable::zeros(space);
  for (std::size_t c = 0; c < space.cell_count(); ++c)
    out[c] = level_value(space.axis(ai), space.coord(c, ai));
  return out;
}

FrameworkKind framework_kind_from_string(const std::string& s) {
  if (s == "prevalence") return FrameworkKind::Prevalence;
  if (s == "tsiv") return FrameworkKind::TSIV;
  if (s == "transport-i") return FrameworkKind::TransportI;
  if (s == "transport-ii") return FrameworkKind::TransportII;
  if (s == "transport-iiia") return FrameworkKind::TransportIIIa;
  if (s == "transport-iiib") return FrameworkKind::TransportIIIb;
  if (s == "generic-ub-point") return FrameworkKind::GenericUBPoint;
  if (s == "generic-ub-full") return FrameworkKind::GenericUBFull;
  throw ParseError("unknown framework kind '" + s + "'");
}

std::string to_string(FrameworkKind k) {
  switch (k) {
    case FrameworkKind::Prevalence: return "prevalence";
    case FrameworkKind::TSIV: return "tsiv";
    case FrameworkKind::TransportI: return "transport-i";
    case FrameworkKind::TransportII: return "transport-ii";
    case FrameworkKind::TransportIIIa: return "transport-iiia";
    case FrameworkKind::TransportIIIb: return "transport-iiib";
    case FrameworkKind::GenericUBPoint: return "generic-ub-point";
    case FrameworkKind::GenericUBFull: return "generic-ub-full";
  }
  throw InvalidSpec("unreachable framework kind");
}

std::vector<FrameworkKind> all_framework_kinds() {
  return {FrameworkKind::Prevalence,    FrameworkKind::TSIV,
          FrameworkKind::TransportI,    FrameworkKind::TransportII,
          FrameworkKind::TransportIIIa, FrameworkKind::TransportIIIb,
          FrameworkKind::GenericUBPoint, FrameworkKind::GenericUBFull};
}

FrameworkParams parse_framework_params(const std::string& framework_json) {
  FrameworkParams p;
  if (framework_json.empty()) return p;
  json j;
  try {
    j = json::parse(framework_json);
  } catch (const json::exception& e) {
    throw ParseError(std::string("framework params: ") + e.what());
  }
  auto strings = [&](const char* key) {
    std::vector<std::string> out;
    if (j.contains(key))
      for (const auto& s : j.at(key)) out.push_back(s.get<std::string>());
    return out;
  };
  auto str = [&](const char* key) {
    return j.contains(key) ? j.at(key).get<std::string>() : std::string{};
  };
  p.l_axes = strings("l_axes");
  p.a_axis = str("a_axis");
  p.y_axis = str("y_axis");
  p.l0 = strings("l0");
  p.x_axes = strings("x_axes");
  p.v_axis = str("v_axis");
  p.tsiv_l = str("l_axis");
  p.tsiv_x = str("x_axis");
  p.tsiv_y = p.y_axis;
  p.u_axes = strings("u_axes");
  p.b_axes = strings("b_axes");
  p.u0 = strings("u0");
  p.u_star = strings("u_star");
  p.b_star = strings("b_star");
  return p;
}

std::string framework_params_to_json(FrameworkKind k, const FrameworkParams& p) {
  JsonWriter w;
  w.begin_object();
  w.key("kind");
  w.string(to_string(k));
  auto put_strings = [&](const char* key, const std::vector<std::string>& v) {
    if (v.empty()) return;
    w.key(key);
    w.begin_array();
    for (const auto& s : v) w.string(s);
    w.end_array();
  };
  auto put = [&](const char* key, const std::string& s) {
    if (s.empty()) return;
    w.key(key);
    w.string(s);
  };
  put_strings("l_axes", p.l_axes);
  put("a_axis", p.a_axis);
  put("y_axis", p.y_axis);
  put_strings("l0", p.l0);
  put_strings("x_axes", p.x_axes);
  put("v_axis", p.v_axis);
  put("l_axis", p.tsiv_l);
  put("x_axis", p.tsiv_x);
  put_strings("u_axes", p.u_axes);
  put_strings("b_axes", p.b_axes);
  put_strings("u0", p.u0);
  put_strings("u_star", p.u_star);
  put_strings("b_star", p.b_star);
  w.end_object();
  return w.str();
}

// ---------------------------------------------------------------------------
// reconstruction of the canonical ideal law per framework kind

namespace {

std::size_t tuple_cell(const AxisSet& space, const std::vector<std::string>& labels) {
  if (labels.size() != space.axis_count()) throw InvalidSpec("anchor tuple arity mismatch");
  std::vector<std::size_t> multi(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    multi[i] = space.level_index(space.axis(i).name, labels[i]);
  return space.flatten(multi);
}

// source roles for the (U,B) view of a framework; j_ub aligns U|B on the full
// B-range, j_bu aligns B|U (point or full)
struct UbView {
  std::vector<std::string> u_axes, b_axes;
  std::size_t j_ub = 0, j_bu = 1;
  std::vector<std::string> u0;
};

UbView ub_view(FrameworkKind kind, const FrameworkParams& p) {
  UbView v;
  switch (kind) {
    case FrameworkKind::TransportII:
      v.u_axes = {p.y_axis};
      v.b_axes = concat(p.l_axes, p.a_axis);
      v.j_ub = 0;
      v.j_bu = 1;
      v.u0 = {"1"};
      break;
    case FrameworkKind::TransportIIIa:
      v.u_axes = {p.y_axis};
      v.b_axes = concat(p.l_axes, p.a_axis);
      v.j_ub = 0;
      v.j_bu = 1;
      v.u0 = {"1"};
      break;
    case FrameworkKind::TransportIIIb:
      v.u_axes = concat(p.l_axes, p.a_axis);
      v.b_axes = {p.y_axis};
      v.j_ub = 1;
      v.j_bu = 0;
      v.u0 = concat(p.l0, std::string("0"));
      break;
    case FrameworkKind::GenericUBPoint:
    case FrameworkKind::GenericUBFull:
      v.u_axes = p.u_axes;
      v.b_axes = p.b_axes;
      v.j_ub = 0;
      v.j_bu = 1;
      v.u0 = p.u0;
      break;
    default:
      throw InvalidSpec("framework has no (U,B) view");
  }
  if (v.u_axes.empty() || v.b_axes.empty() || v.u0.empty())
    throw InvalidSpec("incomplete (U,B) framework parameters");
  return v;
}

FinitePmf reconstruct_ub(const AxisSet& ideal, const FusedLaw& law, const UbView& v) {
  // q(u|b) from the U|B source, q(b|u0) from the B|u0 source, then q-formula
  const FinitePmf& p_ub = law.source_laws[v.j_ub];
  const FinitePmf& p_bu = law.source_laws[v.j_bu];
  RealTable ucond = cond_table(p_ub, v.u_axes, v.b_axes);   // over [b...,u...]
  FinitePmf p_bu_reord = reorder(p_bu, concat(v.u_axes, v.b_axes));
  RealTable bcond_full = cond_table(p_bu_reord, v.b_axes, v.u_axes);  // over [u...,b...]
  AxisSet uspace = ideal.subset(v.u_axes);
  AxisSet bspace = ideal.subset(v.b_axes);
  std::size_t u0_cell = tuple_cell(uspace, v.u0);
  // slice q(b|u0)
  RealTable bcond = RealTable::zeros(bspace);
  {
    Projection to_u(bcond_full.space, uspace);
    Projection to_b(bcond_full.space, bspace);
    for (std::size_t c = 0; c < bcond_full.size(); ++c)
      if (to_u(c) == u0_cell) bcond[to_b(c)] = bcond_full[c];
  }
  FinitePmf joint = reconstruct_joint(ucond, bcond, v.u_axes, v.u0);
  return reorder(joint, ideal.axis_names());
}

FinitePmf reconstruct_prevalence(const AxisSet& ideal, const FusedLaw& law,
                                 const FrameworkParams& p) {
  const FinitePmf& p1 = law.source_laws[0];  // over (x...,v)
  const FinitePmf& p2 = law.source_laws[1];  // over (x...,y,v)
  AxisSet xspace = ideal.subset(p.x_axes);
  AxisSet xv = ideal.subset(concat(p.x_axes, p.v_axis));
  AxisSet ideal_order = ideal;

  FinitePmf q2 = reorder(p2, concat(concat(p.x_axes, p.y_axis), p.v_axis));
  RealTable m = mq(q2, p);  // over [x...,v]

  FinitePmf p1_xv = reorder(p1, concat(p.x_axes, p.v_axis));
  RealTable v_given_x = cond_table(p1_xv, {p.v_axis}, p.x_axes);  // over [x...,v]
  Projection xv_to_x(xv, xspace);
  RealTable prev_x = RealTable::zeros(xspace);  // Q(Y=1|x)
  for (std::size_t c = 0; c < xv.cell_count(); ++c)
    prev_x[xv_to_x(c)] += m[c] * v_given_x[c];
  for (std::size_t c = 0; c < xspace.cell_count(); ++c)
    prev_x[c] = std::min(1.0 - 1e-9, std::max(1e-9, prev_x[c]));

  FinitePmf p1_x = marginal(p1_xv, p.x_axes);
  RealTable v_given_xy = cond_table(q2, {p.v_axis}, concat(p.x_axes, p.y_axis));

  // assemble q(x,v,y) = q(x) q(y|x) q(v|x,y) over [x...,y,v]
  AxisSet xyv = ideal.subset(concat(concat(p.x_axes, p.y_axis), p.v_axis));
  Projection to_x(xyv, xspace);
  Projection to_xyv_cond(xyv, v_given_xy.space);
  std::size_t y_ai = xyv.axis_index(p.y_axis);
  Vec mass(static_cast<Eigen::Index>(xyv.cell_count()));
  for (std::size_t c = 0; c < xyv.cell_count(); ++c) {
    double y = level_value(xyv.axis(y_ai), xyv.coord(c, y_ai));
    double qy = y > 0.5 ? prev_x[to_x(c)] : 1.0 - prev_x[to_x(c)];
    mass[static_cast<Eigen::Index>(c)] = p1_x.mass(to_x(c)) * qy * v_given_xy[to_xyv_cond(c)];
  }
  return reorder(FinitePmf::normalized(xyv, std::move(mass)), ideal_order.axis_names());
}

FinitePmf reconstruct_transport_i(const AxisSet& ideal, const FusedLaw& law,
                                  const FrameworkParams& p) {
  const FinitePmf& p1 = law.source_laws[0];
  const FinitePmf& p2 = law.source_laws[1];
  FinitePmf p2_l = reorder(p2, p.l_axes);
  RealTable a_given_l = cond_table(reorder(p1, concat(p.l_axes, p.a_axis)), {p.a_axis}, p.l_axes);
  std::vector<std::string> lay = concat(concat(p.l_axes, p.a_axis), p.y_axis);
  RealTable y_given_la =
      cond_table(reorder(p1, lay), {p.y_axis}, concat(p.l_axes, p.a_axis));
  AxisSet layspace = ideal.subset(lay);
  Projection to_l(layspace, ideal.subset(p.l_axes));
  Projection to_la_cond(layspace, a_given_l.space);
  Projection to_lay_cond(layspace, y_given_la.space);
  Vec mass(static_cast<Eigen::Index>(layspace.cell_count()));
  for (std::size_t c = 0; c < layspace.cell_count(); ++c)
    mass[static_cast<Eigen::Index>(c)] =
        p2_l.mass(to_l(c)) * a_given_l[to_la_cond(c)] * y_given_la[to_lay_cond(c)];
  return reorder(FinitePmf::normalized(layspace, std::move(mass)), ideal.axis_names());
}

FinitePmf reconstruct_tsiv(const AxisSet& ideal, const FusedLaw& law, const FrameworkParams& p) {
  // conditional-independence completion: q(l) p2(x|l) p1(y|l)
  const FinitePmf& p1 = law.source_laws[0];  // (L,Y)
  const FinitePmf& p2 = law.source_laws[1];  // (L,X)
  FinitePmf p1_l = marginal(p1, {p.tsiv_l});
  RealTable x_given_l = cond_table(reorder(p2, {p.tsiv_l, p.tsiv_x}), {p.tsiv_x}, {p.tsiv_l});
  RealTable y_given_l = cond_table(reorder(p1, {p.tsiv_l, p.tsiv_y}), {p.tsiv_y}, {p.tsiv_l});
  std::vector<std::string> lxy{p.tsiv_l, p.tsiv_x, p.tsiv_y};
  AxisSet space = ideal.subset(lxy);
  Projection to_l(space, ideal.subset({p.tsiv_l}));
  Projection to_lx(space, x_given_l.space);
  Projection to_ly(space, y_given_l.space);
  Vec mass(static_cast<Eigen::Index>(space.cell_count()));
  for (std::size_t c = 0; c < space.cell_count(); ++c)
    mass[static_cast<Eigen::Index>(c)] =
        p1_l.mass(to_l(c)) * x_given_l[to_lx(c)] * y_given_l[to_ly(c)];
  return reorder(FinitePmf::normalized(space, std::move(mass)), ideal.axis_names());
}

AxisSet ideal_space_of(const FusedLaw& law, const AlignmentSpec& spec) {
  // union of observed axes; levels read off the source spaces
  std::vector<Axis> axes;
  std::vector<std::string> seen;
  for (std::size_t j = 0; j < spec.source_count(); ++j) {
    const AxisSet& z = law.source_laws[j].space();
    for (const auto& a : z.axes()) {
      bool have = false;
      for (const auto& s : seen) have |= (s == a.name);
      if (!have) {
        axes.push_back(a);
        seen.push_back(a.name);
      }
    }
  }
  return AxisSet(std::move(axes));
}

}  // namespace

FinitePmf reconstruct_joint(const RealTable& p1_cond, const RealTable& p2_cond,
                            const std::vector<std::string>& u_axes,
                            const std::vector<std::string>& u0) {
  // p1_cond = q(u|b) over [b...,u...]; p2_cond = q(b|u0) over [b...]
  const AxisSet& bu = p1_cond.space;
  const AxisSet& bspace = p2_cond.space;
  AxisSet uspace = bu.subset(u_axes);
  Projection to_b(bu, bspace);
  Projection to_u(bu, uspace);
  std::size_t u0_cell = tuple_cell(uspace, u0);

  // q(u0|b) slice
  RealTable anchor = RealTable::zeros(bspace);
  for (std::size_t c = 0; c < bu.cell_count(); ++c)
    if (to_u(c) == u0_cell) anchor[to_b(c)] = p1_cond[c];

  RealTable weight = RealTable::zeros(bspace);  // q(b|u0)/q(u0|b)
  for (std::size_t b = 0; b < bspace.cell_count(); ++b) {
    if (p2_cond[b] > 0.0) {
      if (!(anchor[b] > 0.0))
        throw NumericFailure("anchor positivity violated: q(u0|b)=0 at '" +
                             bspace.cell_label(b) + "'");
      weight[b] = p2_cond[b] / anchor[b];
    }
  }
  Vec mass(static_cast<Eigen::Index>(bu.cell_count()));
  for (std::size_t c = 0; c < bu.cell_count(); ++c)
    mass[static_cast<Eigen::Index>(c)] = p1_cond[c] * weight[to_b(c)];
  return FinitePmf::normalized(bu, std::move(mass));
}

AlignmentSpec canonical_framework_spec(FrameworkKind kind, const FrameworkParams& p,
                                       const AxisSet& ideal) {
  (void)ideal;
  auto source = [](int id, std::vector<std::vector<std::string>> blocks,
                   std::vector<BlockRegion> regions) {
    SourceSpec s;
    s.id = id;
    for (const auto& b : blocks)
      s.observed_axes.insert(s.observed_axes.end(), b.begin(), b.end());
    s.blocks = std::move(blocks);
    s.regions = std::move(regions);
    return s;
  };
  BlockRegion star{BlockRegion::Kind::Star, {}};
  BlockRegion none{BlockRegion::Kind::Empty, {}};
  BlockRegion all{BlockRegion::Kind::All, {}};
  auto tuples = [](std::vector<std::vector<std::string>> t) {
    return BlockRegion{BlockRegion::Kind::Tuples, std::move(t)};
  };

  AlignmentSpec spec;
  switch (kind) {
    case FrameworkKind::Prevalence:
      spec.sources = {
          source(1, {concat(p.x_axes, p.v_axis)}, {star}),
          source(2, {concat(p.x_axes, p.y_axis), {p.v_axis}}, {none, all})};
      break;
    case FrameworkKind::TSIV:
      spec.sources = {source(1, {{p.tsiv_l}, {p.tsiv_y}}, {none, all}),
                      source(2, {{p.tsiv_l}, {p.tsiv_x}}, {none, all})};
      break;
    case FrameworkKind::TransportI:
      spec.sources = {source(1, {concat(p.l_axes, p.a_axis), {p.y_axis}}, {none, all}),
                      source(2, {p.l_axes}, {star})};
      break;
    case FrameworkKind::TransportII:
      spec.sources = {source(1, {concat(p.l_axes, p.a_axis), {p.y_axis}}, {none, all}),
                      source(2, {{p.y_axis}, concat(p.l_axes, p.a_axis)},
                             {none, tuples({{"1"}})})};
      break;
    case FrameworkKind::TransportIIIa:
      spec.sources = {source(1, {concat(p.l_axes, p.a_axis), {p.y_axis}}, {none, all}),
                      source(2, {{p.y_axis}, concat(p.l_axes, p.a_axis)}, {none, all})};
      break;
    case FrameworkKind::TransportIIIb:
      spec.sources = {
          source(1, {concat(p.l_axes, p.a_axis), {p.y_axis}},
                 {none, tuples({concat(p.l0, std::string("0"))})}),
          source(2, {{p.y_axis}, concat(p.l_axes, p.a_axis)}, {none, all})};
      break;
    case FrameworkKind::GenericUBPoint:
      spec.sources = {source(1, {p.b_axes, p.u_axes}, {none, all}),
                      source(2, {p.u_axes, p.b_axes}, {none, tuples({p.u0})})};
      break;
    case FrameworkKind::GenericUBFull:
      spec.sources = {source(1, {p.b_axes, p.u_axes}, {none, all}),
                      source(2, {p.u_axes, p.b_axes}, {none, all})};
      break;
  }
  return spec;
}

Framework bind_framework(FrameworkKind kind, const FrameworkParams& params,
                         const AlignmentSpec& spec, const FusedLaw& law, bool validate,
                         const FinitePmf* q_hint) {
  law.validate();
  AxisSet ideal = ideal_space_of(law, spec);
  Framework fw{kind, params, spec, law, FinitePmf::uniform(ideal)};
  if (q_hint) {
    fw.q = marginal(*q_hint, ideal.axis_names());
  } else {
    switch (kind) {
      case FrameworkKind::Prevalence:
        fw.q = reconstruct_prevalence(ideal, law, params);
        break;
      case FrameworkKind::TSIV:
        fw.q = reconstruct_tsiv(ideal, law, params);
        break;
      case FrameworkKind::TransportI:
        fw.q = reconstruct_transport_i(ideal, law, params);
        break;
      case FrameworkKind::TransportII:
      case FrameworkKind::TransportIIIa:
      case FrameworkKind::TransportIIIb:
      case FrameworkKind::GenericUBPoint:
      case FrameworkKind::GenericUBFull:
        fw.q = reconstruct_ub(ideal, law, ub_view(kind, params));
        break;
    }
  }
  if (validate) {
    AlignmentReport rep = check_alignment(law, fw.q, spec);
    if (!rep.aligned)
      throw ValidationFailure("law is not aligned with the reconstructed ideal law");
  }
  return fw;
}

Framework bind_framework(const ModelFile& file, bool validate) {
  if (file.framework_json.empty())
    throw InvalidSpec("model file carries no framework block");
  json j = json::parse(file.framework_json);
  if (!j.contains("kind")) throw ParseError("framework block needs a 'kind'");
  FrameworkKind kind = framework_kind_from_string(j.at("kind").get<std::string>());
  FrameworkParams params = parse_framework_params(file.framework_json);
  try {
    return bind_framework(kind, params, file.spec, file.law(), validate);
  } catch (const NumericFailure&) {
    // degenerate laws (deterministic relations) defeat the anchor
    // reconstruction; fall back to the file's declared ideal law
    return bind_framework(kind, params, file.spec, file.law(), /*validate=*/false,
                          &file.ideal);
  }
}

Framework rebind(const Framework& fw, const FusedLaw& new_law) {
  return bind_framework(fw.kind, fw.params, fw.spec, new_law, /*validate=*/false);
}

FusedModel framework_model(const Framework& fw) {
  std::optional<Mat> tangent;
  if (fw.kind == FrameworkKind::TSIV) tangent = tsiv_tangent_basis(fw.q, fw.params);
  return FusedModel::bind(fw.q, fw.spec, fw.law, std::move(tangent));
}

// ---------------------------------------------------------------------------
// prevalence

RealTable mq(const FinitePmf& q, const FrameworkParams& p) {
  // q over at least (x...,v,y); conditional means of V given (x, y)
  RealTable v_vals = axis_values(q.space(), p.v_axis);
  RealTable ev_xy = cond_mean(q, v_vals, concat(p.x_axes, p.y_axis), /*strict=*/false);
  AxisSet xv = q.space().subset(concat(p.x_axes, p.v_axis));
  AxisSet xspace = q.space().subset(p.x_axes);
  std::size_t y_ai = ev_xy.space.axis_index(p.y_axis);
  Projection xy_to_x(ev_xy.space, xspace);
  RealTable e0 = RealTable::zeros(xspace), e1 = RealTable::zeros(xspace);
  for (std::size_t c = 0; c < ev_xy.size(); ++c) {
    double y = level_value(ev_xy.space.axis(y_ai), ev_xy.space.coord(c, y_ai));
    (y > 0.5 ? e1 : e0)[xy_to_x(c)] = ev_xy[c];
  }
  RealTable out = RealTable::zeros(xv);
  std::size_t v_ai = xv.axis_index(p.v_axis);
  Projection xv_to_x(xv, xspace);
  for (std::size_t c = 0; c < xv.cell_count(); ++c) {
    std::size_t x = xv_to_x(c);
    double den = e1[x] - e0[x];
    if (std::abs(den) < kInstrumentFloor)
      throw NumericFailure("degenerate instrumenting: |E[V|Y=1,x]-E[V|Y=0,x]| < 1e-6 at '" +
                           xspace.cell_label(x) + "'");
    double v = level_value(xv.axis(v_ai), xv.coord(c, v_ai));
    out[c] = (v - e0[x]) / den;
  }
  return out;
}

namespace {

struct PrevalenceCtx {
  RealTable m;          // m_{P(.|S=2)} over [x...,v]
  RealTable ev1;        // E_Q[V|Y=1,x] over x
  RealTable ratio_xy;   // q(x,y)/p(x,y|S=2) over [x...,y]
  FinitePmf p2_reord;   // source-2 law over [x...,y,v]
};

PrevalenceCtx prevalence_ctx(const Framework& fw) {
  const FrameworkParams& p = fw.params;
  PrevalenceCtx ctx{RealTable{}, RealTable{}, RealTable{}, FinitePmf{}};
  ctx.p2_reord = reorder(fw.law.source_laws[1], concat(concat(p.x_axes, p.y_axis), p.v_axis));
  ctx.m = mq(ctx.p2_reord, p);
  RealTable v_vals = axis_values(fw.q.space(), p.v_axis);
  RealTable ev_xy = cond_mean(fw.q, v_vals, concat(p.x_axes, p.y_axis), false);
  AxisSet xspace = fw.q.space().subset(p.x_axes);
  ctx.ev1 = RealTable::zeros(xspace);
  std::size_t y_ai = ev_xy.space.axis_index(p.y_axis);
  Projection xy_to_x(ev_xy.space, xspace);
  for (std::size_t c = 0; c < ev_xy.size(); ++c)
    if (level_value(ev_xy.space.axis(y_ai), ev_xy.space.coord(c, y_ai)) > 0.5)
      ctx.ev1[xy_to_x(c)] = ev_xy[c];
  FinitePmf q_xy = marginal(fw.q, concat(p.x_axes, p.y_axis));
  FinitePmf p2_xy = marginal(ctx.p2_reord, concat(p.x_axes, p.y_axis));
  ctx.ratio_xy = RealTable::zeros(q_xy.space());
  for (std::size_t c = 0; c < q_xy.cell_count(); ++c)
    if (p2_xy.mass(c) > 0.0) ctx.ratio_xy[c] = q_xy.mass(c) / p2_xy.mass(c);
  return ctx;
}

}  // namespace

double phi_prevalence(const Framework& fw) {
  PrevalenceCtx ctx = prevalence_ctx(fw);
  FinitePmf p1_xv = reorder(fw.law.source_laws[0], concat(fw.params.x_axes, fw.params.v_axis));
  return mean(p1_xv, RealTable(p1_xv.space(), ctx.m.values));
}

ObsFunction prevalence_if_general(const Framework& fw, const PrevalenceIdealIF& psi) {
  const FrameworkParams& p = fw.params;
  PrevalenceCtx ctx = prevalence_ctx(fw);
  AxisSet xspace = fw.q.space().subset(p.x_axes);

  ObsFunction out;
  out.per_source.resize(2);
  // source 1 over (x...,v) in its own axis order
  {
    const AxisSet& z = fw.law.source_laws[0].space();
    RealTable f = RealTable::zeros(z);
    Projection to_x(z, xspace);
    Projection to_xv(z, ctx.m.space);
    RealTable v_vals = axis_values(z, p.v_axis);
    for (std::size_t c = 0; c < z.cell_count(); ++c) {
      std::size_t x = to_x(c);
      double mv = ctx.m[to_xv(c)];
      f[c] = (psi.a[x] + psi.b[x] * v_vals[c] + psi.c[x] * mv + psi.d[x] * mv * ctx.ev1[x]) /
             fw.law.lambda[0];
    }
    out.per_source[0] = std::move(f);
  }
  // source 2 over (x...,y,v) in its own axis order
  {
    const AxisSet& z = fw.law.source_laws[1].space();
    RealTable f = RealTable::zeros(z);
    Projection to_x(z, xspace);
    Projection to_xv(z, ctx.m.space);
    Projection to_xy(z, ctx.ratio_xy.space);
    RealTable v_vals = axis_values(z, p.v_axis);
    RealTable y_vals = axis_values(z, p.y_axis);
    for (std::size_t c = 0; c < z.cell_count(); ++c) {
      std::size_t x = to_x(c);
      double mv = ctx.m[to_xv(c)];
      double y = y_vals[c], v = v_vals[c];
      f[c] = ctx.ratio_xy[to_xy(c)] *
             (psi.c[x] * (y - mv) + psi.d[x] * (v * y - mv * ctx.ev1[x])) / fw.law.lambda[1];
    }
    out.per_source[1] = std::move(f);
  }
  return out;
}

ObsFunction if_prevalence(const Framework& fw) {
  AxisSet xspace = fw.q.space().subset(fw.params.x_axes);
  double phi = phi_prevalence(fw);
  PrevalenceIdealIF psi{RealTable::constant(xspace, -phi), RealTable::zeros(xspace),
                        RealTable::constant(xspace, 1.0), RealTable::zeros(xspace)};
  return prevalence_if_general(fw, psi);
}

// ---------------------------------------------------------------------------
// two-sample IV

namespace {

struct TsivCtx {
  FinitePmf p1_l, p2_l;
  RealTable a_l;  // E_{P1}[Y|l]
  RealTable b_l;  // E_{P2}[X|l]
  AxisSet lspace;
};

TsivCtx tsiv_ctx(const Framework& fw) {
  const FrameworkParams& p = fw.params;
  TsivCtx ctx;
  const FinitePmf& p1 = fw.law.source_laws[0];
  const FinitePmf& p2 = fw.law.source_laws[1];
  ctx.lspace = fw.q.space().subset({p.tsiv_l});
  ctx.p1_l = marginal(p1, {p.tsiv_l});
  ctx.p2_l = marginal(p2, {p.tsiv_l});
  ctx.a_l = cond_mean(p1, axis_values(p1.space(), p.tsiv_y), {p.tsiv_l}, false);
  ctx.b_l = cond_mean(p2, axis_values(p2.space(), p.tsiv_x), {p.tsiv_l}, false);
  return ctx;
}

TsivFit tsiv_wls(const Vec& w, const RealTable& a, const RealTable& b) {
  double sw = 0, swb = 0, swbb = 0, swa = 0, swab = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    double wl = w[static_cast<Eigen::Index>(l)];
    sw += wl;
    swb += wl * b[l];
    swbb += wl * b[l] * b[l];
    swa += wl * a[l];
    swab += wl * a[l] * b[l];
  }
  double det = sw * swbb - swb * swb;
  double bvar = swbb / sw - (swb / sw) * (swb / sw);
  if (!(bvar > kInstrumentFloor * kInstrumentFloor))
    throw NumericFailure("degenerate instrument: E[X|L] is constant in L");
  TsivFit fit;
  fit.tau = (swbb * swa - swb * swab) / det;
  fit.phi = (sw * swab - swb * swa) / det;
  double r2 = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    double e = a[l] - fit.tau - fit.phi * b[l];
    r2 += w[static_cast<Eigen::Index>(l)] * e * e;
  }
  fit.moment_residual = std::sqrt(r2 / sw);
  return fit;
}

}  // namespace

TsivFit tsiv_solve(const Framework& fw) {
  TsivCtx ctx = tsiv_ctx(fw);
  return tsiv_wls(ctx.p1_l.mass(), ctx.a_l, ctx.b_l);
}

TsivFit tsiv_solve_ideal(const FinitePmf& q, const FrameworkParams& p) {
  FinitePmf q_l = marginal(q, {p.tsiv_l});
  RealTable a = cond_mean(q, axis_values(q.space(), p.tsiv_y), {p.tsiv_l}, false);
  RealTable b = cond_mean(q, axis_values(q.space(), p.tsiv_x), {p.tsiv_l}, false);
  return tsiv_wls(q_l.mass(), a, b);
}

ObsFunction tsiv_epsilon(const Framework& fw) {
  const FrameworkParams& p = fw.params;
  TsivCtx ctx = tsiv_ctx(fw);
  TsivFit fit = tsiv_solve(fw);
  ObsFunction eps;
  eps.per_source.resize(2);
  {
    const AxisSet& z = fw.law.source_laws[0].space();
    RealTable f = RealTable::zeros(z);
    Projection to_l(z, ctx.lspace);
    RealTable y_vals = axis_values(z, p.tsiv_y);
    for (std::size_t c = 0; c < z.cell_count(); ++c) {
      std::size_t l = to_l(c);
      double shift = ctx.p1_l.mass(l) > 0.0 ? ctx.p2_l.mass(l) / ctx.p1_l.mass(l) : 0.0;
      f[c] = shift * (y_vals[c] - ctx.a_l[l]) / fw.law.lambda[0];
    }
    eps.per_source[0] = std::move(f);
  }
  {
    const AxisSet& z = fw.law.source_laws[1].space();
    RealTable f = RealTable::zeros(z);
    Projection to_l(z, ctx.lspace);
    RealTable x_vals = axis_values(z, p.tsiv_x);
    for (std::size_t c = 0; c < z.cell_count(); ++c) {
      std::size_t l = to_l(c);
      f[c] = (ctx.a_l[l] - fit.tau - fit.phi * x_vals[c]) / fw.law.lambda[1];
    }
    eps.per_source[1] = std::move(f);
  }
  return eps;
}

TsivIF tsiv_if(const Framework& fw, const Mat& t) {
  TsivCtx ctx = tsiv_ctx(fw);
  if (static_cast<std::size_t>(t.rows()) != ctx.lspace.cell_count() || t.cols() != 2)
    throw InvalidSpec("t must be |L| x 2");
  // B(t) = E_{P2}[ t(L) (1, X) ]
  Mat bt = Mat::Zero(2, 2);
  for (std::size_t l = 0; l < ctx.lspace.cell_count(); ++l) {
    double w = ctx.p2_l.mass(l);
    bt(0, 0) += w * t(static_cast<Eigen::Index>(l), 0);
    bt(0, 1) += w * t(static_cast<Eigen::Index>(l), 0) * ctx.b_l[l];
    bt(1, 0) += w * t(static_cast<Eigen::Index>(l), 1);
    bt(1, 1) += w * t(static_cast<Eigen::Index>(l), 1) * ctx.b_l[l];
  }
  Eigen::JacobiSVD<Mat> svd(bt);
  double cond = svd.singularValues()(0) / std::max(svd.singularValues()(1), 1e-300);
  if (!(cond < 1e8)) throw NumericFailure("B(t) is singular (condition number >= 1e8)");

  Mat binv = bt.inverse();
  ObsFunction eps = tsiv_epsilon(fw);
  TsivIF out;
  out.tau_comp.per_source.resize(2);
  out.phi_comp.per_source.resize(2);
  for (std::size_t j = 0; j < 2; ++j) {
    const AxisSet& z = fw.law.source_laws[j].space();
    Projection to_l(z, ctx.lspace);
    RealTable tau = RealTable::zeros(z), phi = RealTable::zeros(z);
    for (std::size_t c = 0; c < z.cell_count(); ++c) {
      auto l = static_cast<Eigen::Index>(to_l(c));
      double e = eps.per_source[j][c];
      tau[c] = (binv(0, 0) * t(l, 0) + binv(0, 1) * t(l, 1)) * e;
      phi[c] = (binv(1, 0) * t(l, 0) + binv(1, 1) * t(l, 1)) * e;
    }
    out.tau_comp.per_source[j] = std::move(tau);
    out.phi_comp.per_source[j] = std::move(phi);
  }
  return out;
}

Mat tsiv_t_eff(const Framework& fw) {
  TsivCtx ctx = tsiv_ctx(fw);
  ObsFunction eps = tsiv_epsilon(fw);
  const Vec& lambda = fw.law.lambda;
  const std::size_t nl = ctx.lspace.cell_count();

  // joint P(l), E_P[eps|l], var_P(eps|l), E_P[U|l] with U = 1(s=2)/lambda2 (1,X)'
  Vec pl = Vec::Zero(static_cast<Eigen::Index>(nl));
  Vec m1 = Vec::Zero(static_cast<Eigen::Index>(nl));
  Vec m2 = Vec::Zero(static_cast<Eigen::Index>(nl));
  Mat eu = Mat::Zero(static_cast<Eigen::Index>(nl), 2);
  for (std::size_t j = 0; j < 2; ++j) {
    const FinitePmf& pj = fw.law.source_laws[j];
    Projection to_l(pj.space(), ctx.lspace);
    RealTable x_vals =
        (j == 1) ? axis_values(pj.space(), fw.params.tsiv_x) : RealTable::zeros(pj.space());
    for (std::size_t c = 0; c < pj.cell_count(); ++c) {
      auto l = static_cast<Eigen::Index>(to_l(c));
      double w = lambda[static_cast<Eigen::Index>(j)] * pj.mass(c);
      pl[l] += w;
      double e = eps.per_source[j][c];
      m1[l] += w * e;
      m2[l] += w * e * e;
      if (j == 1) {
        eu(l, 0) += w / lambda[1];
        eu(l, 1) += w * x_vals[c] / lambda[1];
      }
    }
  }
  Mat t(static_cast<Eigen::Index>(nl), 2);
  for (std::size_t l = 0; l < nl; ++l) {
    auto li = static_cast<Eigen::Index>(l);
    double mean_l = pl[li] > 0 ? m1[li] / pl[li] : 0.0;
    double var_l = pl[li] > 0 ? m2[li] / pl[li] - mean_l * mean_l : 0.0;
    if (!(var_l > 0.0))
      throw NumericFailure("zero conditional variance of the TSIV residual at l-cell " +
                           std::to_string(l));
    t(li, 0) = (eu(li, 0) / std::max(pl[li], 1e-300)) / var_l;
    t(li, 1) = (eu(li, 1) / std::max(pl[li], 1e-300)) / var_l;
  }
  return t;
}

TsivIF tsiv_eif(const Framework& fw) { return tsiv_if(fw, tsiv_t_eff(fw)); }

Mat tsiv_canonical_t(const Framework& fw) {
  TsivCtx ctx = tsiv_ctx(fw);
  Mat t(static_cast<Eigen::Index>(ctx.lspace.cell_count()), 2);
  for (std::size_t l = 0; l < ctx.lspace.cell_count(); ++l) {
    t(static_cast<Eigen::Index>(l), 0) = 1.0;
    t(static_cast<Eigen::Index>(l), 1) = ctx.b_l[l];
  }
  return t;
}

// t_{g,q} for the canonical ideal gradient g(l) = (1, E_Q[X|l]) under the
// completion q(l) = p(l|S=1): the member that corresponds to that gradient.
Mat tsiv_t_for_canonical_gradient(const Framework& fw) {
  TsivCtx ctx = tsiv_ctx(fw);
  Mat t = tsiv_canonical_t(fw);
  for (std::size_t l = 0; l < ctx.lspace.cell_count(); ++l) {
    double shift = ctx.p2_l.mass(l) > 0.0 ? ctx.p1_l.mass(l) / ctx.p2_l.mass(l) : 0.0;
    t(static_cast<Eigen::Index>(l), 0) *= shift;
    t(static_cast<Eigen::Index>(l), 1) *= shift;
  }
  return t;
}

Mat tsiv_efficiency_bound(const Framework& fw) {
  // M = E_P[sigma^{-2}(L) E[U|L] E[U|L]'], bound = M^{-1}
  TsivCtx ctx = tsiv_ctx(fw);
  Mat t = tsiv_t_eff(fw);  // rows: sigma^{-2}(l) E[U|l]'
  ObsFunction eps = tsiv_epsilon(fw);
  const Vec& lambda = fw.law.lambda;
  const std::size_t nl = ctx.lspace.cell_count();
  Vec pl = Vec::Zero(static_cast<Eigen::Index>(nl));
  Vec m2 = Vec::Zero(static_cast<Eigen::Index>(nl));
  Vec m1 = Vec::Zero(static_cast<Eigen::Index>(nl));
  for (std::size_t j = 0; j < 2; ++j) {
    const FinitePmf& pj = fw.law.source_laws[j];
    Projection to_l(pj.space(), ctx.lspace);
    for (std::size_t c = 0; c < pj.cell_count(); ++c) {
      auto l = static_cast<Eigen::Index>(to_l(c));
      double w = lambda[static_cast<Eigen::Index>(j)] * pj.mass(c);
      double e = eps.per_source[j][c];
      pl[l] += w;
      m1[l] += w * e;
      m2[l] += w * e * e;
    }
  }
  Mat m = Mat::Zero(2, 2);
  for (std::size_t l = 0; l < nl; ++l) {
    auto li = static_cast<Eigen::Index>(l);
    double mean_l = m1[li] / pl[li];
    double var_l = m2[li] / pl[li] - mean_l * mean_l;
    Vec eul = t.row(li).transpose() * var_l;  // E[U|l] recovered
    m += pl[li] * (eul * eul.transpose()) / var_l;
  }
  return m.inverse();
}

Mat tsiv_tangent_basis(const FinitePmf& q, const FrameworkParams& p) {
  TsivFit fit = tsiv_solve_ideal(q, p);
  AxisSet lspace = q.space().subset({p.tsiv_l});
  FinitePmf q_l = marginal(q, {p.tsiv_l});
  RealTable x_vals = axis_values(q.space(), p.tsiv_x);
  RealTable y_vals = axis_values(q.space(), p.tsiv_y);
  RealTable b_l = cond_mean(q, x_vals, {p.tsiv_l}, false);
  Projection to_l(q.space(), lspace);

  const auto n = static_cast<Eigen::Index>(q.cell_count());
  const auto g = static_cast<Eigen::Index>(lspace.cell_count());
  Mat m = Mat::Zero(g, n);  // h -> (E_Q[eps h | l])_l
  for (std::size_t c = 0; c < q.cell_count(); ++c) {
    auto l = static_cast<Eigen::Index>(to_l(c));
    double e = y_vals[c] - fit.tau - fit.phi * x_vals[c];
    m(l, static_cast<Eigen::Index>(c)) = q.mass(c) * e / q_l.mass(to_l(c));
  }
  Mat span(g, 2);
  for (Eigen::Index l = 0; l < g; ++l) {
    span(l, 0) = 1.0;
    span(l, 1) = b_l[static_cast<std::size_t>(l)];
  }
  // project the constraint rows off span{1, E[X|l]}
  Mat proj = span * (span.transpose() * span).inverse() * span.transpose();
  Mat constraint = m - proj * m;
  Mat null_cols = null_space(constraint);
  // intersect with mean-zero functions then orthonormalize under Q
  for (Eigen::Index col = 0; col < null_cols.cols(); ++col) {
    double mu = null_cols.col(col).dot(q.mass());
    null_cols.col(col).array() -= mu;
  }
  return gram_schmidt(null_cols, q.mass());
}

// ---------------------------------------------------------------------------
// ATE transport

RealTable aipw_ideal_if(const FinitePmf& q, const FrameworkParams& p) {
  std::vector<std::string> la = concat(p.l_axes, p.a_axis);
  RealTable y_vals = axis_values(q.space(), p.y_axis);
  RealTable ey_la = cond_mean(q, y_vals, la, false);
  RealTable a_given_l = cond_table(marginal(q, la), {p.a_axis}, p.l_axes);  // over [l...,a]
  AxisSet laspace = q.space().subset(la);
  AxisSet lspace = q.space().subset(p.l_axes);
  std::size_t a_ai = laspace.axis_index(p.a_axis);
  Projection la_to_l(laspace, lspace);
  RealTable b0 = RealTable::zeros(lspace), b1 = RealTable::zeros(lspace);
  for (std::size_t c = 0; c < laspace.cell_count(); ++c) {
    double a = level_value(laspace.axis(a_ai), laspace.coord(c, a_ai));
    (a > 0.5 ? b1 : b0)[la_to_l(c)] = ey_la[c];
  }
  FinitePmf q_l = marginal(q, p.l_axes);
  double psi = 0.0;
  for (std::size_t c = 0; c < lspace.cell_count(); ++c) psi += q_l.mass(c) * (b1[c] - b0[c]);

  Projection w_to_la(q.space(), laspace);
  Projection w_to_l(q.space(), lspace);
  Projection la_to_cond(laspace, a_given_l.space);
  RealTable a_vals = axis_values(q.space(), p.a_axis);
  RealTable out = RealTable::zeros(q.space());
  for (std::size_t c = 0; c < q.cell_count(); ++c) {
    std::size_t la_cell = w_to_la(c);
    std::size_t l = w_to_l(c);
    double prop = a_given_l[la_to_cond(la_cell)];
    if (!(prop > 0.0) || !(prop < 1.0))
      throw NumericFailure("propensity positivity violated at '" +
                           laspace.cell_label(la_cell) + "'");
    double a = a_vals[c];
    out[c] = b1[l] - b0[l] - psi + (2.0 * a - 1.0) / prop * (y_vals[c] - ey_la[la_cell]);
  }
  return out;
}

double ate_ideal(const FinitePmf& q, const FrameworkParams& p) {
  std::vector<std::string> la = concat(p.l_axes, p.a_axis);
  RealTable ey_la = cond_mean(q, axis_values(q.space(), p.y_axis), la, false);
  AxisSet laspace = q.space().subset(la);
  AxisSet lspace = q.space().subset(p.l_axes);
  std::size_t a_ai = laspace.axis_index(p.a_axis);
  Projection la_to_l(laspace, lspace);
  FinitePmf q_l = marginal(q, p.l_axes);
  double psi = 0.0;
  for (std::size_t c = 0; c < laspace.cell_count(); ++c) {
    double a = level_value(laspace.axis(a_ai), laspace.coord(c, a_ai));
    psi += (a > 0.5 ? 1.0 : -1.0) * q_l.mass(la_to_l(c)) * ey_la[c];
  }
  return psi;
}

namespace {

struct TransportCtx {
  AxisSet lspace, laspace;
  RealTable b;        // P1(Y=1|l,a) over [l...,a]
  FinitePmf p1_la;    // source-1 (L,A) marginal
  FinitePmf p2_y;     // source-2 Y marginal (scenarios ii/iii)
  RealTable la_given_y;  // p2(l,a|y) over [y,l...,a]
};

TransportCtx transport_ctx(const Framework& fw) {
  const FrameworkParams& p = fw.params;
  TransportCtx ctx;
  const FinitePmf& p1 = fw.law.source_laws[0];
  ctx.lspace = fw.q.space().subset(p.l_axes);
  ctx.laspace = fw.q.space().subset(concat(p.l_axes, p.a_axis));
  std::vector<std::string> la = concat(p.l_axes, p.a_axis);
  RealTable ey = cond_mean(p1, axis_values(p1.space(), p.y_axis), la, false);
  ctx.b = ey;  // binary Y: conditional mean is P(Y=1|l,a)
  ctx.p1_la = marginal(p1, la);
  if (fw.kind != FrameworkKind::TransportI) {
    const FinitePmf& p2 = fw.law.source_laws[1];
    ctx.p2_y = marginal(p2, {p.y_axis});
    ctx.la_given_y = cond_table(p2, la, {p.y_axis});
  }
  return ctx;
}

// (l,a) slice values of p2(l,a|Y=y) as a table over [l...,a]
RealTable slice_by_y(const RealTable& la_given_y, const AxisSet& laspace,
                     const std::string& y_axis, double ywant) {
  RealTable out = RealTable::zeros(laspace);
  std::size_t y_ai = la_given_y.space.axis_index(y_axis);
  Projection to_la(la_given_y.space, laspace);
  for (std::size_t c = 0; c < la_given_y.size(); ++c) {
    double y = level_value(la_given_y.space.axis(y_ai), la_given_y.space.coord(c, y_ai));
    if (std::abs(y - ywant) < 0.5) out[to_la(c)] = la_given_y[c];
  }
  return out;
}

}  // namespace

double ate_transport_phi(const Framework& fw) {
  const FrameworkParams& p = fw.params;
  TransportCtx ctx = transport_ctx(fw);
  std::size_t a_ai = ctx.laspace.axis_index(p.a_axis);
  Projection la_to_l(ctx.laspace, ctx.lspace);

  RealTable b0 = RealTable::zeros(ctx.lspace), b1 = RealTable::zeros(ctx.lspace);
  for (std::size_t c = 0; c < ctx.laspace.cell_count(); ++c) {
    double a = level_value(ctx.laspace.axis(a_ai), ctx.laspace.coord(c, a_ai));
    (a > 0.5 ? b1 : b0)[la_to_l(c)] = ctx.b[c];
  }

  switch (fw.kind) {
    case FrameworkKind::TransportI: {
      FinitePmf p2_l = reorder(fw.law.source_laws[1], p.l_axes);
      double out = 0.0;
      for (std::size_t c = 0; c < ctx.lspace.cell_count(); ++c)
        out += p2_l.mass(c) * (b1[c] - b0[c]);
      return out;
    }
    case FrameworkKind::TransportII:
    case FrameworkKind::TransportIIIa: {
      RealTable cases = slice_by_y(ctx.la_given_y, ctx.laspace, p.y_axis, 1.0);
      RealTable w = RealTable::zeros(ctx.lspace);
      double norm = 0.0;
      for (std::size_t c = 0; c < ctx.laspace.cell_count(); ++c) {
        if (!(ctx.b[c] > 0.0))
          throw NumericFailure("P(Y=1|l,a,S=1) must be positive for scenario (ii)/(iii.a)");
        double term = cases[c] / ctx.b[c];
        w[la_to_l(c)] += term;
        norm += term;
      }
      double out = 0.0;
      for (std::size_t c = 0; c < ctx.lspace.cell_count(); ++c)
        out += (b1[c] - b0[c]) * w[c] / norm;
      return out;
    }
    case FrameworkKind::TransportIIIb: {
      RealTable cases = slice_by_y(ctx.la_given_y, ctx.laspace, p.y_axis, 1.0);
      RealTable controls = slice_by_y(ctx.la_given_y, ctx.laspace, p.y_axis, 0.0);
      std::size_t anchor = tuple_cell(ctx.laspace, concat(p.l0, std::string("0")));
      double b_anchor = ctx.b[anchor];
      if (!(b_anchor > 0.0) || !(b_anchor < 1.0))
        throw NumericFailure("P(Y=1|l0,a=0,S=1) must lie strictly inside (0,1)");
      if (!(cases[anchor] > 0.0) || !(controls[anchor] > 0.0))
        throw NumericFailure("anchor cell (l0, a=0) has zero case or control mass");
      double alpha =
          1.0 / (1.0 + (cases[anchor] / b_anchor) / (controls[anchor] / (1.0 - b_anchor)));
      // bracket term = q(l); omega(a,l) weights the case share of the (l,a) mixture
      RealTable q_l = RealTable::zeros(ctx.lspace);
      for (std::size_t c = 0; c < ctx.laspace.cell_count(); ++c)
        q_l[la_to_l(c)] += cases[c] * alpha + controls[c] * (1.0 - alpha);
      double out = 0.0;
      for (std::size_t c = 0; c < ctx.laspace.cell_count(); ++c) {
        double den = cases[c] * alpha + controls[c] * (1.0 - alpha);
        if (!(den > 0.0)) continue;
        double omega = cases[c] / den;
        double a = level_value(ctx.laspace.axis(a_ai), ctx.laspace.coord(c, a_ai));
        out += (a > 0.5 ? 1.0 : -1.0) * omega * q_l[la_to_l(c)];
      }
      return alpha * out;
    }
    default:
      throw InvalidSpec("not a transport framework");
  }
}

// ---------------------------------------------------------------------------
// generic (U,B) frameworks

namespace {

struct UbCtx {
  UbView view;
  AxisSet uspace, bspace;
  std::size_t u0_cell = 0;
  FinitePmf q_b, q_u;
  RealTable u_given_b;  // q(u|b) over [b...,u...]
  RealTable epsi_b;     // E_Q[psi|b]
};

UbCtx ub_ctx(const Framework& fw, const RealTable& psi1_q) {
  UbCtx ctx{ub_view(fw.kind, fw.params), {}, {}, 0, {}, {}, {}, {}};
  ctx.uspace = fw.q.space().subset(ctx.view.u_axes);
  ctx.bspace = fw.q.space().subset(ctx.view.b_axes);
  ctx.u0_cell = tuple_cell(ctx.uspace, ctx.view.u0);
  ctx.q_b = marginal(fw.q, ctx.view.b_axes);
  ctx.q_u = marginal(fw.q, ctx.view.u_axes);
  ctx.u_given_b = cond_table(fw.q, ctx.view.u_axes, ctx.view.b_axes);
  ctx.epsi_b = cond_mean(fw.q, psi1_q, ctx.view.b_axes, false);
  return ctx;
}

// q(u0|b) over the B space
RealTable anchor_cond(const UbCtx& ctx) {
  RealTable out = RealTable::zeros(ctx.bspace);
  Projection to_u(ctx.u_given_b.space, ctx.uspace);
  Projection to_b(ctx.u_given_b.space, ctx.bspace);
  for (std::size_t c = 0; c < ctx.u_given_b.size(); ++c)
    if (to_u(c) == ctx.u0_cell) out[to_b(c)] = ctx.u_given_b[c];
  return out;
}

}  // namespace

ObsFunction generic_ub_if(const Framework& fw, const RealTable& psi1_q) {
  UbCtx ctx = ub_ctx(fw, psi1_q);
  RealTable q_u0_given_b = anchor_cond(ctx);
  for (std::size_t b = 0; b < ctx.bspace.cell_count(); ++b)
    if (ctx.q_b.mass(b) > 0.0 && !(q_u0_given_b[b] > 0.0))
      throw NumericFailure("anchor positivity violated: q(u0|b)=0 at '" +
                           ctx.bspace.cell_label(b) + "'");

  const std::size_t j_ub = ctx.view.j_ub, j_bu = ctx.view.j_bu;
  FinitePmf p_ub_b = marginal(fw.law.source_laws[j_ub], ctx.view.b_axes);
  FinitePmf p_bu_u = marginal(fw.law.source_laws[j_bu], ctx.view.u_axes);
  double q_u0 = ctx.q_u.mass(ctx.u0_cell);
  double p_u0 = p_bu_u.mass(ctx.u0_cell);
  if (!(p_u0 > 0.0)) throw NumericFailure("anchor has zero mass in the B|u0 source");

  ObsFunction out;
  out.per_source.resize(fw.law.source_count());
  for (std::size_t j = 0; j < fw.law.source_count(); ++j)
    out.per_source[j] = RealTable::zeros(fw.law.source_laws[j].space());
  {
    const AxisSet& z = fw.law.source_laws[j_ub].space();
    Projection to_ideal(z, psi1_q.space);
    Projection to_b(z, ctx.bspace);
    Projection to_u(z, ctx.uspace);
    RealTable& f = out.per_source[j_ub];
    for (std::size_t c = 0; c < z.cell_count(); ++c) {
      std::size_t b = to_b(c);
      if (!(p_ub_b.mass(b) > 0.0)) continue;
      double shift = ctx.q_b.mass(b) / p_ub_b.mass(b);
      double point = (to_u(c) == ctx.u0_cell && q_u0_given_b[b] > 0.0)
                         ? ctx.epsi_b[b] / q_u0_given_b[b]
                         : 0.0;
      f[c] = shift * (psi1_q[to_ideal(c)] - point) / fw.law.lambda[static_cast<Eigen::Index>(j_ub)];
    }
  }
  {
    const AxisSet& z = fw.law.source_laws[j_bu].space();
    Projection to_b(z, ctx.bspace);
    Projection to_u(z, ctx.uspace);
    RealTable& f = out.per_source[j_bu];
    for (std::size_t c = 0; c < z.cell_count(); ++c) {
      if (to_u(c) != ctx.u0_cell) continue;
      std::size_t b = to_b(c);
      if (!(q_u0_given_b[b] > 0.0)) continue;
      f[c] = (q_u0 / p_u0) * ctx.epsi_b[b] / q_u0_given_b[b] /
             fw.law.lambda[static_cast<Eigen::Index>(j_bu)];
    }
  }
  return out;
}

GenericUbEif generic_ub_eif_discrete(const Framework& fw, const RealTable& psi1_q) {
  UbView view = ub_view(fw.kind, fw.params);
  AxisSet uspace = fw.q.space().subset(view.u_axes);
  AxisSet bspace = fw.q.space().subset(view.b_axes);
  const auto T = static_cast<Eigen::Index>(uspace.cell_count());
  const auto NB = bspace.cell_count();
  if (T < 2) throw ValidationFailure("U must take at least two values");

  std::vector<std::string> ub = concat(view.u_axes, view.b_axes);
  AxisSet ub_space = fw.q.space().subset(ub);
  FinitePmf q_ub = reorder(fw.q, ub);
  FinitePmf p_ub = reorder(fw.law.source_laws[view.j_ub], ub);   // U|B source law
  FinitePmf p_bu = reorder(fw.law.source_laws[view.j_bu], ub);   // B|U source law
  const double lam_ub = fw.law.lambda[static_cast<Eigen::Index>(view.j_ub)];
  const double lam_bu = fw.law.lambda[static_cast<Eigen::Index>(view.j_bu)];

  RealTable psi_ub(ub_space, expand(psi1_q, ub_space).values);
  Projection to_u(ub_space, uspace);
  Projection to_b(ub_space, bspace);
  // cell index (t, b) in the [u...,b...] layout
  std::vector<std::vector<std::size_t>> cell_at(static_cast<std::size_t>(T),
                                                std::vector<std::size_t>(NB));
  for (std::size_t c = 0; c < ub_space.cell_count(); ++c)
    cell_at[to_u(c)][to_b(c)] = c;

  FinitePmf p_ub_b = marginal(p_ub, view.b_axes);
  FinitePmf p_bu_u = marginal(p_bu, view.u_axes);

  // The scalar information equation is, per (u_t, b),
  //   r(u_t,b) = h(u_t,b) - p(S=ub|u_t,b) E_Q[h(U,b)|b] - p(S=bu|u_t,b) E_Q[h(u_t,B)|u_t]
  // with E_Q[h(U,b)|b] = beta(b)'h(b) and E_Q[h(u,B)|u] read off the B|U
  // source. In matrix form, with pi(b)_t = p(S=bu|u_t,b),
  //   (Id - diag(1-pi) 1 beta') h(b) = r(b) + diag(pi) c,  c = E_P[R(U) h(B)|S=bu].
  std::vector<Mat> kinv(NB);
  std::vector<Vec> rbar(NB), pi_b(NB);
  for (std::size_t b = 0; b < NB; ++b) {
    Vec pi(T), beta(T), r(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      std::size_t c = cell_at[static_cast<std::size_t>(t)][b];
      double joint = lam_ub * p_ub.mass(c) + lam_bu * p_bu.mass(c);
      pi[t] = joint > 0.0 ? lam_bu * p_bu.mass(c) / joint : 0.0;
      beta[t] = p_ub_b.mass(b) > 0.0 ? p_ub.mass(c) / p_ub_b.mass(b) : 0.0;
      r[t] = joint > 0.0 ? q_ub.mass(c) * psi_ub[c] / joint : 0.0;
    }
    Vec one_minus_pi = (1.0 - pi.array()).matrix();
    double pb = beta.dot(one_minus_pi);
    if (std::abs(1.0 - pb) < 1e-12)
      throw NumericFailure("matrix pencil rank-deficient at '" + bspace.cell_label(b) + "'");
    kinv[b] = Mat::Identity(T, T) + (one_minus_pi * beta.transpose()) / (1.0 - pb);
    rbar[b] = r;
    pi_b[b] = pi;
  }

  // fixed-point constant c = (Id - E[R K diag(pi)])^- E[R K rbar]
  Mat g2 = Mat::Zero(T, T);
  Vec v2 = Vec::Zero(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    double pu = p_bu_u.mass(static_cast<std::size_t>(t));
    if (!(pu > 0.0))
      throw NumericFailure("R(U) undefined: zero U-marginal in the B|U source");
    for (std::size_t b = 0; b < NB; ++b) {
      double w = p_bu.mass(cell_at[static_cast<std::size_t>(t)][b]) / pu;  // p(b|u_t, S=bu)
      g2.row(t) += w * (kinv[b].row(t).array() * pi_b[b].transpose().array()).matrix();
      v2[t] += w * kinv[b].row(t).dot(rbar[b]);
    }
  }
  Vec cvec = pinv(Mat::Identity(T, T) - g2) * v2;

  RealTable h(ub_space, Vec::Zero(static_cast<Eigen::Index>(ub_space.cell_count())));
  for (std::size_t b = 0; b < NB; ++b) {
    Vec hb = kinv[b] * (rbar[b] + (pi_b[b].array() * cvec.array()).matrix());
    for (Eigen::Index t = 0; t < T; ++t)
      h[cell_at[static_cast<std::size_t>(t)][b]] = hb[t];
  }

  // centerings under the aligned source conditionals
  RealTable h_mean_b = cond_mean(p_ub, h, view.b_axes, false);
  RealTable h_mean_u = cond_mean(p_bu, h, view.u_axes, false);

  GenericUbEif out;
  out.h = RealTable(psi1_q.space, expand(h, psi1_q.space).values);
  out.phi_eff.per_source.resize(fw.law.source_count());
  for (std::size_t j = 0; j < fw.law.source_count(); ++j)
    out.phi_eff.per_source[j] = RealTable::zeros(fw.law.source_laws[j].space());
  {
    const AxisSet& z = fw.law.source_laws[view.j_ub].space();
    Projection zu(z, uspace), zb(z, bspace);
    RealTable& f = out.phi_eff.per_source[view.j_ub];
    for (std::size_t c = 0; c < z.cell_count(); ++c)
      f[c] = h[cell_at[zu(c)][zb(c)]] - h_mean_b[zb(c)];
  }
  {
    const AxisSet& z = fw.law.source_laws[view.j_bu].space();
    Projection zu(z, uspace), zb(z, bspace);
    RealTable& f = out.phi_eff.per_source[view.j_bu];
    for (std::size_t c = 0; c < z.cell_count(); ++c)
      f[c] = h[cell_at[zu(c)][zb(c)]] - h_mean_u[zu(c)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// transport influence functions

ObsFunction transport_if(const Framework& fw) {
  const FrameworkParams& p = fw.params;
  RealTable psi1 = aipw_ideal_if(fw.q, p);
  switch (fw.kind) {
    case FrameworkKind::TransportI: {
      TransportCtx ctx = transport_ctx(fw);
      double phi = ate_transport_phi(fw);
      RealTable a_given_l =
          cond_table(marginal(fw.law.source_laws[0], concat(p.l_axes, p.a_axis)), {p.a_axis},
                     p.l_axes);
      FinitePmf p1_l = marginal(fw.law.source_laws[0], p.l_axes);
      FinitePmf p2_l = reorder(fw.law.source_laws[1], p.l_axes);
      ObsFunction out;
      out.per_source.resize(2);
      {
        const AxisSet& z = fw.law.source_laws[0].space();
        RealTable f = RealTable::zeros(z);
        Projection to_l(z, ctx.lspace);
        Projection to_la(z, ctx.laspace);
        Projection la_to_cond(ctx.laspace, a_given_l.space);
        RealTable a_vals = axis_values(z, p.a_axis);
        RealTable y_vals = axis_values(z, p.y_axis);
        for (std::size_t c = 0; c < z.cell_count(); ++c) {
          std::size_t l = to_l(c);
          std::size_t la = to_la(c);
          double prop = a_given_l[la_to_cond(la)];
          if (!(prop > 0.0) || !(prop < 1.0))
            throw NumericFailure("treatment positivity violated in source 1");
          double shift = p1_l.mass(l) > 0.0 ? p2_l.mass(l) / p1_l.mass(l) : 0.0;
          f[c] = shift * (2.0 * a_vals[c] - 1.0) / prop * (y_vals[c] - ctx.b[la]) /
                 fw.law.lambda[0];
        }
        out.per_source[0] = std::move(f);
      }
      {
        const AxisSet& z = fw.law.source_laws[1].space();
        RealTable f = RealTable::zeros(z);
        Projection to_l(z, ctx.lspace);
        std::size_t a_ai = ctx.laspace.axis_index(p.a_axis);
        Projection la_to_l(ctx.laspace, ctx.lspace);
        RealTable b0 = RealTable::zeros(ctx.lspace), b1 = RealTable::zeros(ctx.lspace);
        for (std::size_t c = 0; c < ctx.laspace.cell_count(); ++c) {
          double a = level_value(ctx.laspace.axis(a_ai), ctx.laspace.coord(c, a_ai));
          (a > 0.5 ? b1 : b0)[la_to_l(c)] = ctx.b[c];
        }
        for (std::size_t c = 0; c < z.cell_count(); ++c) {
          std::size_t l = to_l(c);
          f[c] = (b1[l] - b0[l] - phi) / fw.law.lambda[1];
        }
        out.per_source[1] = std::move(f);
      }
      return out;
    }
    case FrameworkKind::TransportII:
    case FrameworkKind::TransportIIIb:
      return generic_ub_if(fw, psi1);
    case FrameworkKind::TransportIIIa: {
      // anchor member: kappa-weighted split of the AIPW gradient
      UbCtx ctx = ub_ctx(fw, psi1);
      FinitePmf p_ub_b = marginal(fw.law.source_laws[ctx.view.j_ub], ctx.view.b_axes);
      FinitePmf p_bu_u = marginal(fw.law.source_laws[ctx.view.j_bu], ctx.view.u_axes);
      FinitePmf q_joint = marginal(fw.q, concat(ctx.view.b_axes, ctx.view.u_axes));
      Projection joint_to_b(q_joint.space(), ctx.bspace);
      Projection joint_to_u(q_joint.space(), ctx.uspace);
      // kappa(u,b) = q(b) q(u) / q(u,b) on the support
      RealTable kappa = RealTable::zeros(q_joint.space());
      for (std::size_t c = 0; c < q_joint.cell_count(); ++c)
        if (q_joint.mass(c) > 0.0)
          kappa[c] = ctx.q_b.mass(joint_to_b(c)) * ctx.q_u.mass(joint_to_u(c)) / q_joint.mass(c);

      ObsFunction out;
      out.per_source.resize(2);
      for (std::size_t j = 0; j < 2; ++j)
        out.per_source[j] = RealTable::zeros(fw.law.source_laws[j].space());
      {
        const AxisSet& z = fw.law.source_laws[ctx.view.j_ub].space();
        Projection to_ideal(z, psi1.space);
        Projection to_joint(z, q_joint.space());
        Projection to_b(z, ctx.bspace);
        RealTable& f = out.per_source[ctx.view.j_ub];
        for (std::size_t c = 0; c < z.cell_count(); ++c) {
          std::size_t b = to_b(c);
          if (!(p_ub_b.mass(b) > 0.0)) continue;
          double shift = ctx.q_b.mass(b) / p_ub_b.mass(b);
          f[c] = shift * (psi1[to_ideal(c)] - kappa[to_joint(c)] * ctx.epsi_b[b]) /
                 fw.law.lambda[static_cast<Eigen::Index>(ctx.view.j_ub)];
        }
      }
      {
        const AxisSet& z = fw.law.source_laws[ctx.view.j_bu].space();
        Projection to_joint(z, q_joint.space());
        Projection to_b(z, ctx.bspace);
        Projection to_u(z, ctx.uspace);
        RealTable& f = out.per_source[ctx.view.j_bu];
        for (std::size_t c = 0; c < z.cell_count(); ++c) {
          std::size_t u = to_u(c);
          if (!(p_bu_u.mass(u) > 0.0)) continue;
          double shift = ctx.q_u.mass(u) / p_bu_u.mass(u);
          f[c] = shift * kappa[to_joint(c)] * ctx.epsi_b[to_b(c)] /
                 fw.law.lambda[static_cast<Eigen::Index>(ctx.view.j_bu)];
        }
      }
      return out;
    }
    default:
      throw InvalidSpec("not a transport framework");
  }
}

// ---------------------------------------------------------------------------
// naive-vs-obedient demonstration

NaiveObedientReport naive_vs_obedient_demo(const Framework& fw) {
  const UbView view = ub_view(fw.kind, fw.params);
  if (fw.params.u_star.empty() || fw.params.b_star.empty())
    throw InvalidSpec("demo needs u_star and b_star");
  AxisSet uspace = fw.q.space().subset(view.u_axes);
  AxisSet bspace = fw.q.space().subset(view.b_axes);
  std::size_t us = tuple_cell(uspace, fw.params.u_star);
  std::size_t bs = tuple_cell(bspace, fw.params.b_star);

  std::vector<std::string> ub = concat(view.u_axes, view.b_axes);
  FinitePmf q_ub = reorder(fw.q, ub);
  Projection to_u(q_ub.space(), uspace);
  Projection to_b(q_ub.space(), bspace);

  NaiveObedientReport rep;

  // deterministic invertible relation <=> the support is a permutation pattern
  {
    const auto T = uspace.cell_count();
    const auto NB = bspace.cell_count();
    std::vector<int> row(T, 0), col(NB, 0);
    for (std::size_t c = 0; c < q_ub.cell_count(); ++c) {
      if (q_ub.mass(c) > 0.0) {
        ++row[to_u(c)];
        ++col[to_b(c)];
      }
    }
    rep.invertible_map = (T == NB);
    for (std::size_t t = 0; t < T && rep.invertible_map; ++t)
      rep.invertible_map = (row[t] == 1);
    for (std::size_t b = 0; b < NB && rep.invertible_map; ++b)
      rep.invertible_map = (col[b] == 1);
  }

  FinitePmf q_b = marginal(fw.q, view.b_axes);
  RealTable u_given_b = cond_table(fw.q, view.u_axes, view.b_axes);
  double q_ustar_bstar = 0.0;
  {
    Projection gb(u_given_b.space, bspace);
    Projection gu(u_given_b.space, uspace);
    for (std::size_t c = 0; c < u_given_b.size(); ++c)
      if (gb(c) == bs && gu(c) == us) q_ustar_bstar = u_given_b[c];
  }
  rep.phi_value = q_ustar_bstar;
  if (!(q_b.mass(bs) > 0.0)) throw NumericFailure("b_star has zero mass under Q");

  // ideal IF of psi(Q) = Q(U=u*|B=b*) in the nonparametric ideal model
  RealTable psi1 = RealTable::zeros(fw.q.space());
  {
    Projection wu(fw.q.space(), uspace), wb(fw.q.space(), bspace);
    for (std::size_t c = 0; c < fw.q.cell_count(); ++c)
      if (wb(c) == bs)
        psi1[c] = ((wu(c) == us ? 1.0 : 0.0) - q_ustar_bstar) / q_b.mass(bs);
  }

  // naive one-step IF: the gradient of the plug-in extension P(u*|b*, S=j_ub)
  const std::size_t j_ub = view.j_ub;
  FinitePmf p_ub_b = marginal(fw.law.source_laws[j_ub], view.b_axes);
  RealTable p_u_given_b = cond_table(fw.law.source_laws[j_ub], view.u_axes, view.b_axes);
  double p_ustar_bstar = 0.0;
  {
    Projection gb(p_u_given_b.space, bspace);
    Projection gu(p_u_given_b.space, uspace);
    for (std::size_t c = 0; c < p_u_given_b.size(); ++c)
      if (gb(c) == bs && gu(c) == us) p_ustar_bstar = p_u_given_b[c];
  }
  ObsFunction naive;
  naive.per_source.resize(fw.law.source_count());
  for (std::size_t j = 0; j < fw.law.source_count(); ++j)
    naive.per_source[j] = RealTable::zeros(fw.law.source_laws[j].space());
  {
    const AxisSet& z = fw.law.source_laws[j_ub].space();
    Projection zu(z, uspace), zb(z, bspace);
    double denom = fw.law.lambda[static_cast<Eigen::Index>(j_ub)] * p_ub_b.mass(bs);
    for (std::size_t c = 0; c < z.cell_count(); ++c)
      if (zb(c) == bs)
        naive.per_source[j_ub][c] = ((zu(c) == us ? 1.0 : 0.0) - p_ustar_bstar) / denom;
  }

  GenericUbEif eff = generic_ub_eif_discrete(fw, psi1);
  rep.var_naive = obs_variance(fw.law, naive);
  rep.var_eff = obs_variance(fw.law, eff.phi_eff);
  rep.gap = rep.var_naive - rep.var_eff;

  // (s1)/(s2) incompatibility: joint least squares over h(u,b), Q-weighted
  {
    const auto n = static_cast<Eigen::Index>(q_ub.cell_count());
    Mat lhs = Mat::Zero(2 * n, n);
    Vec rhs = Vec::Zero(2 * n);
    RealTable b_given_u = cond_table(reorder(fw.q, concat(view.b_axes, view.u_axes)),
                                     view.b_axes, view.u_axes);
    Projection ub_to_cond_b(q_ub.space(), u_given_b.space);
    Projection ub_to_cond_u(q_ub.space(), b_given_u.space);
    for (std::size_t c = 0; c < q_ub.cell_count(); ++c) {
      double w = std::sqrt(q_ub.mass(c));
      auto ci = static_cast<Eigen::Index>(c);
      lhs(ci, ci) += w;
      lhs(n + ci, ci) += w;
      for (std::size_t c2 = 0; c2 < q_ub.cell_count(); ++c2) {
        auto c2i = static_cast<Eigen::Index>(c2);
        if (to_b(c2) == to_b(c)) lhs(ci, c2i) -= w * u_given_b[ub_to_cond_b(c2)];
        if (to_u(c2) == to_u(c)) lhs(n + ci, c2i) -= w * b_given_u[ub_to_cond_u(c2)];
      }
      // rhs of (s1): the naive IF's U|B-source part at (u,b)
      double r1 = 0.0;
      if (to_b(c) == bs) {
        double denom = fw.law.lambda[static_cast<Eigen::Index>(j_ub)] * p_ub_b.mass(bs);
        r1 = ((to_u(c) == us ? 1.0 : 0.0) - p_ustar_bstar) / denom;
      }
      rhs[ci] = w * r1;
    }
    LstsqResult ls = lstsq_min_norm(lhs, rhs);
    rep.incompatibility_residual = ls.residual;
  }

  // gradient equations, when the model binds strictly
  if (!rep.invertible_map) {
    try {
      FusedModel model = framework_model(fw);
      rep.grad_residual_naive = gradient_equation_residual(model, naive, psi1);
      rep.grad_residual_eff = gradient_equation_residual(model, eff.phi_eff, psi1);
    } catch (const FusionError&) {
      rep.grad_residual_naive = rep.grad_residual_eff = -1.0;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// dispatchers

double framework_phi(const Framework& fw) {
  switch (fw.kind) {
    case FrameworkKind::Prevalence:
      return phi_prevalence(fw);
    case FrameworkKind::TSIV:
      return tsiv_solve(fw).phi;
    case FrameworkKind::TransportI:
    case FrameworkKind::TransportII:
    case FrameworkKind::TransportIIIa:
    case FrameworkKind::TransportIIIb:
      return ate_transport_phi(fw);
    case FrameworkKind::GenericUBPoint:
    case FrameworkKind::GenericUBFull: {
      // psi(Q) = Q(U=u*|B=b*) by convention
      UbView view = ub_view(fw.kind, fw.params);
      AxisSet uspace = fw.q.space().subset(view.u_axes);
      AxisSet bspace = fw.q.space().subset(view.b_axes);
      std::size_t us = tuple_cell(uspace, fw.params.u_star);
      std::size_t bs = tuple_cell(bspace, fw.params.b_star);
      RealTable u_given_b = cond_table(fw.q, view.u_axes, view.b_axes);
      Projection gb(u_given_b.space, bspace);
      Projection gu(u_given_b.space, uspace);
      for (std::size_t c = 0; c < u_given_b.size(); ++c)
        if (gb(c) == bs && gu(c) == us) return u_given_b[c];
      throw InvalidSpec("u_star/b_star outside the (U,B) range");
    }
  }
  throw InvalidSpec("unreachable framework kind");
}

RealTable framework_ideal_if(const Framework& fw) {
  switch (fw.kind) {
    case FrameworkKind::Prevalence: {
      RealTable y_vals = axis_values(fw.q.space(), fw.params.y_axis);
      double psi = mean(fw.q, y_vals);
      RealTable out = y_vals;
      out.values.array() -= psi;
      return out;
    }
    case FrameworkKind::TSIV: {
      // phi-component of the canonical g(l) = (1, E_Q[X|l])' gradient
      TsivFit fit = tsiv_solve_ideal(fw.q, fw.params);
      RealTable x_vals = axis_values(fw.q.space(), fw.params.tsiv_x);
      RealTable y_vals = axis_values(fw.q.space(), fw.params.tsiv_y);
      RealTable b_l = cond_mean(fw.q, x_vals, {fw.params.tsiv_l}, false);
      AxisSet lspace = fw.q.space().subset({fw.params.tsiv_l});
      FinitePmf q_l = marginal(fw.q, {fw.params.tsiv_l});
      Mat bq = Mat::Zero(2, 2);
      for (std::size_t l = 0; l < lspace.cell_count(); ++l) {
        double w = q_l.mass(l);
        bq(0, 0) += w;
        bq(0, 1) += w * b_l[l];
        bq(1, 0) += w * b_l[l];
        bq(1, 1) += w * b_l[l] * b_l[l];
      }
      Mat binv = bq.inverse();
      Projection to_l(fw.q.space(), lspace);
      RealTable out = RealTable::zeros(fw.q.space());
      for (std::size_t c = 0; c < fw.q.cell_count(); ++c) {
        std::size_t l = to_l(c);
        double eps = y_vals[c] - fit.tau - fit.phi * x_vals[c];
        out[c] = (binv(1, 0) + binv(1, 1) * b_l[l]) * eps;
      }
      return out;
    }
    case FrameworkKind::TransportI:
    case FrameworkKind::TransportII:
    case FrameworkKind::TransportIIIa:
    case FrameworkKind::TransportIIIb:
      return aipw_ideal_if(fw.q, fw.params);
    case FrameworkKind::GenericUBPoint:
    case FrameworkKind::GenericUBFull: {
      UbView view = ub_view(fw.kind, fw.params);
      AxisSet uspace = fw.q.space().subset(view.u_axes);
      AxisSet bspace = fw.q.space().subset(view.b_axes);
      std::size_t us = tuple_cell(uspace, fw.params.u_star);
      std::size_t bs = tuple_cell(bspace, fw.params.b_star);
      FinitePmf q_b = marginal(fw.q, view.b_axes);
      double target = framework_phi(fw);
      RealTable out = RealTable::zeros(fw.q.space());
      Projection wu(fw.q.space(), uspace), wb(fw.q.space(), bspace);
      for (std::size_t c = 0; c < fw.q.cell_count(); ++c)
        if (wb(c) == bs) out[c] = ((wu(c) == us ? 1.0 : 0.0) - target) / q_b.mass(bs);
      return out;
    }
  }
  throw InvalidSpec("unreachable framework kind");
}

ObsFunction framework_if(const Framework& fw) {
  switch (fw.kind) {
    case FrameworkKind::Prevalence:
      return if_prevalence(fw);
    case FrameworkKind::TSIV:
      return tsiv_if(fw, tsiv_t_for_canonical_gradient(fw)).phi_comp;
    case FrameworkKind::TransportI:
    case FrameworkKind::TransportII:
    case FrameworkKind::TransportIIIa:
    case FrameworkKind::TransportIIIb:
      return transport_if(fw);
    case FrameworkKind::GenericUBPoint:
    case FrameworkKind::GenericUBFull:
      return generic_ub_if(fw, framework_ideal_if(fw));
  }
  throw InvalidSpec("unreachable framework kind");
}

ObsFunction framework_eif(const Framework& fw) {
  switch (fw.kind) {
    case FrameworkKind::TSIV:
      return tsiv_eif(fw).phi_comp;
    case FrameworkKind::TransportIIIa:
    case FrameworkKind::GenericUBFull:
      return generic_ub_eif_discrete(fw, framework_ideal_if(fw)).phi_eff;
    default:
      return framework_if(fw);  // nonparametric observed models: the IF is unique
  }
}

// ---------------------------------------------------------------------------
// Appendix-C data generating process

ModelFile appendix_c_model(double p_s1, FrameworkKind scenario) {
  if (!(p_s1 > 0.0) || !(p_s1 < 1.0)) throw InvalidSpec("P(S=1) must lie in (0,1)");
  AxisSet ideal(std::vector<Axis>{Axis{"L1", {"1", "2"}},
                                  Axis{"L2", {"1", "2", "3"}},
                                  Axis{"A", {"0", "1"}},
                                  Axis{"Y", {"0", "1"}}});
  auto l1v = [](std::size_t i) { return static_cast<double>(i + 1); };
  auto l2v = [](std::size_t i) { return static_cast<double>(i + 1); };

  Vec qmass(static_cast<Eigen::Index>(ideal.cell_count()));
  for (std::size_t c = 0; c < ideal.cell_count(); ++c) {
    auto m = ideal.unflatten(c);
    double L1 = l1v(m[0]), L2 = l2v(m[1]);
    double A = static_cast<double>(m[2]), Y = static_cast<double>(m[3]);
    double pa = expit(-0.2 - 0.15 * L1 + 0.25 * L2);
    double py = expit(0.5 + 0.5 * A + 0.25 * L1 - 0.25 * L2);
    qmass[static_cast<Eigen::Index>(c)] = (1.0 / 2.0) * (1.0 / 3.0) *
                                          (A > 0.5 ? pa : 1.0 - pa) *
                                          (Y > 0.5 ? py : 1.0 - py);
  }
  FinitePmf q(ideal, std::move(qmass));

  // source 1: (L1,L2,A,Y), aligned on Y | (L1,L2,A)
  AxisSet z1 = ideal;
  Vec p1(static_cast<Eigen::Index>(z1.cell_count()));
  RealTable y_given_la = cond_table(q, {"Y"}, {"L1", "L2", "A"});
  Projection z1_to_cond(z1, y_given_la.space);
  const double pl1[2] = {0.4, 0.6};
  const double pl2[3] = {0.3, 0.33, 0.37};
  for (std::size_t c = 0; c < z1.cell_count(); ++c) {
    auto m = z1.unflatten(c);
    double L1 = l1v(m[0]), L2 = l2v(m[1]);
    double A = static_cast<double>(m[2]);
    // the printed linear form 0.1 - 0.2 L1 + 0.2 L2 exits [0,1]; expit keeps a law
    double pa = expit(0.1 - 0.2 * L1 + 0.2 * L2);
    p1[static_cast<Eigen::Index>(c)] =
        pl1[m[0]] * pl2[m[1]] * (A > 0.5 ? pa : 1.0 - pa) * y_given_la[z1_to_cond(c)];
  }

  // source 2: (Y,L1,L2,A), aligned on (L1,L2,A) | Y with P(Y=1|S=2) = 0.4
  AxisSet z2 = ideal.subset({"Y", "L1", "L2", "A"});
  Vec p2(static_cast<Eigen::Index>(z2.cell_count()));
  RealTable la_given_y = cond_table(reorder(q, {"Y", "L1", "L2", "A"}), {"L1", "L2", "A"}, {"Y"});
  std::size_t y_ai = z2.axis_index("Y");
  for (std::size_t c = 0; c < z2.cell_count(); ++c) {
    double Y = static_cast<double>(z2.coord(c, y_ai));
    p2[static_cast<Eigen::Index>(c)] = (Y > 0.5 ? 0.4 : 0.6) * la_given_y[c];
  }

  ModelFile m{q, {}, {}, {}, false, std::nullopt, ""};
  FrameworkParams params;
  params.l_axes = {"L1", "L2"};
  params.a_axis = "A";
  params.y_axis = "Y";
  params.l0 = {"1", "1"};
  switch (scenario) {
    case FrameworkKind::TransportII:
    case FrameworkKind::TransportIIIa:
    case FrameworkKind::TransportIIIb:
      break;
    default:
      throw InvalidSpec("the appendix DGP binds transport scenarios (ii)/(iii.a)/(iii.b)");
  }
  m.spec = canonical_framework_spec(scenario, params, ideal);
  m.lambda = Vec(2);
  m.lambda << p_s1, 1.0 - p_s1;
  m.source_laws = {FinitePmf::normalized(z1, std::move(p1)),
                   FinitePmf::normalized(z2, std::move(p2))};
  m.framework_json = framework_params_to_json(scenario, params);
  return m;
}

}  // namespace fusion
