#include "core/tables.hpp"

#include <cmath>

namespace fusion {

namespace diag {
Counters& counters() {
  thread_local Counters c;
  return c;
}
void reset_counters() { counters() = Counters{}; }
}  // namespace diag

RealTable::RealTable(AxisSet s, Vec v) : space(std::move(s)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != space.cell_count())
    throw InvalidSpec("table size does not match its space");
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i])) throw InvalidSpec("non-finite table value");
}

RealTable RealTable::zeros(const AxisSet& s) {
  return RealTable(s, Vec::Zero(static_cast<Eigen::Index>(s.cell_count())));
}

RealTable RealTable::constant(const AxisSet& s, double c) {
  return RealTable(s, Vec::Constant(static_cast<Eigen::Index>(s.cell_count()), c));
}

FinitePmf::FinitePmf(AxisSet space, Vec mass) : space_(std::move(space)), mass_(std::move(mass)) {
  if (static_cast<std::size_t>(mass_.size()) != space_.cell_count())
    throw InvalidSpec("pmf size does not match its space");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < mass_.size(); ++i) {
    if (!(mass_[i] >= 0.0)) throw InvalidSpec("negative or NaN mass");
    sum += mass_[i];
  }
  if (std::abs(sum - 1.0) > tol::mass)
    throw InvalidSpec("pmf masses sum to " + std::to_string(sum) + ", not 1");
}

FinitePmf FinitePmf::normalized(AxisSet space, Vec w) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0)) throw InvalidSpec("negative or NaN weight");
    sum += w[i];
  }
  if (sum <= 0.0) throw InvalidSpec("cannot normalize all-zero weights");
  w /= sum;
  return FinitePmf(std::move(space), std::move(w));
}

FinitePmf FinitePmf::uniform(const AxisSet& space) {
  const auto n = static_cast<Eigen::Index>(space.cell_count());
  return FinitePmf(space, Vec::Constant(n, 1.0 / static_cast<double>(n)));
}

bool FinitePmf::strictly_positive() const {
  return (mass_.array() > 0.0).all();
}

FinitePmf FinitePmf::floored() const {
  Vec m = mass_;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m[i] == 0.0) {
      m[i] = tol::eps_floor;
      ++diag::counters().floored_cells;
    }
  }
  return FinitePmf::normalized(space_, std::move(m));
}

FinitePmf marginal(const FinitePmf& p, const std::vector<std::string>& keep) {
  AxisSet sub = p.space().subset(keep);
  Projection proj(p.space(), sub);
  Vec out = Vec::Zero(static_cast<Eigen::Index>(sub.cell_count()));
  for (std::size_t c = 0; c < p.cell_count(); ++c)
    out[static_cast<Eigen::Index>(proj(c))] += p.mass(c);
  return FinitePmf(std::move(sub), std::move(out));
}

ConditionalTable conditional(const FinitePmf& p, const std::vector<std::string>& target,
                             const std::vector<std::string>& given, bool strict) {
  std::vector<std::string> joint_names = given;
  joint_names.insert(joint_names.end(), target.begin(), target.end());
  AxisSet joint = p.space().subset(joint_names);
  AxisSet given_space = given.empty() ? AxisSet{} : p.space().subset(given);

  Projection to_joint(p.space(), joint);
  Vec joint_mass = Vec::Zero(static_cast<Eigen::Index>(joint.cell_count()));
  for (std::size_t c = 0; c < p.cell_count(); ++c)
    joint_mass[static_cast<Eigen::Index>(to_joint(c))] += p.mass(c);

  ConditionalTable out;
  out.table = RealTable::zeros(joint);
  if (given.empty()) {
    out.table.values = joint_mass;  // marginal, trivially normalized
    return out;
  }

  Projection joint_to_given(joint, given_space);
  Vec given_mass = Vec::Zero(static_cast<Eigen::Index>(given_space.cell_count()));
  for (std::size_t c = 0; c < joint.cell_count(); ++c)
    given_mass[static_cast<Eigen::Index>(joint_to_given(c))] += joint_mass[static_cast<Eigen::Index>(c)];

  for (std::size_t g = 0; g < given_space.cell_count(); ++g) {
    if (given_mass[static_cast<Eigen::Index>(g)] <= 0.0) {
      if (strict)
        throw NumericFailure("conditioning on zero-mass cell " + given_space.cell_label(g));
      out.undefined.push_back(g);
    }
  }
  for (std::size_t c = 0; c < joint.cell_count(); ++c) {
    double den = given_mass[static_cast<Eigen::Index>(joint_to_given(c))];
    if (den > 0.0) out.table.values[static_cast<Eigen::Index>(c)] = joint_mass[static_cast<Eigen::Index>(c)] / den;
  }
  return out;
}

RealTable rn_ratio(const FinitePmf& num, const FinitePmf& den,
                   const std::vector<std::string>& axes) {
  if (axes.empty()) {
    AxisSet trivial;
    return RealTable(trivial, Vec::Constant(1, 1.0));
  }
  FinitePmf mn = marginal(num, axes);
  FinitePmf md = marginal(den, axes);
  RealTable out = RealTable::zeros(mn.space());
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (md.mass(c) > 0.0) out[c] = mn.mass(c) / md.mass(c);
    // off den-support the value is fixed arbitrarily at 0
  }
  return out;
}

RealTable cond_mean(const FinitePmf& p, const RealTable& f, const AxisSet& sub, bool strict) {
  if (!f.space.same_as(p.space())) throw InvalidSpec("function space does not match pmf space");
  if (sub.axis_count() == 0) {
    AxisSet trivial;
    return RealTable(trivial, Vec::Constant(1, mean(p, f)));
  }
  Projection proj(p.space(), sub);
  Vec num = Vec::Zero(static_cast<Eigen::Index>(sub.cell_count()));
  Vec den = Vec::Zero(static_cast<Eigen::Index>(sub.cell_count()));
  for (std::size_t c = 0; c < p.cell_count(); ++c) {
    const auto s = static_cast<Eigen::Index>(proj(c));
    num[s] += p.mass(c) * f[c];
    den[s] += p.mass(c);
  }
  Vec out = Vec::Zero(num.size());
  for (Eigen::Index i = 0; i < num.size(); ++i) {
    if (den[i] > 0.0) {
      out[i] = num[i] / den[i];
    } else if (strict) {
      throw NumericFailure("conditional mean on zero-mass cell " +
                           sub.cell_label(static_cast<std::size_t>(i)));
    }
  }
  return RealTable(sub, std::move(out));
}

RealTable cond_mean(const FinitePmf& p, const RealTable& f,
                    const std::vector<std::string>& sub_names, bool strict) {
  return cond_mean(p, f, p.space().subset(sub_names), strict);
}

double mean(const FinitePmf& p, const RealTable& f) {
  if (!f.space.same_as(p.space())) throw InvalidSpec("function space does not match pmf space");
  return f.values.dot(p.mass());
}

double l2_inner(const FinitePmf& p, const RealTable& f, const RealTable& g) {
  if (!f.space.same_as(p.space()) || !g.space.same_as(p.space()))
    throw InvalidSpec("l2_inner: space mismatch");
  return (f.values.array() * g.values.array() * p.mass().array()).sum();
}

double l2_norm(const FinitePmf& p, const RealTable& f) {
  return std::sqrt(std::max(0.0, l2_inner(p, f, f)));
}

double variance(const FinitePmf& p, const RealTable& f) {
  double m = mean(p, f);
  double s = 0.0;
  for (std::size_t c = 0; c < p.cell_count(); ++c) {
    double d = f[c] - m;
    s += d * d * p.mass(c);
  }
  return s;
}

bool mutually_abs_continuous(const FinitePmf& p, const FinitePmf& q) {
  if (!p.space().same_as(q.space())) throw InvalidSpec("space mismatch");
  for (std::size_t c = 0; c < p.cell_count(); ++c)
    if ((p.mass(c) > 0.0) != (q.mass(c) > 0.0)) return false;
  return true;
}

RealTable expand(const RealTable& sub, const AxisSet& full) {
  Projection proj(full, sub.space);
  Vec out(static_cast<Eigen::Index>(full.cell_count()));
  for (std::size_t c = 0; c < full.cell_count(); ++c)
    out[static_cast<Eigen::Index>(c)] = sub[proj(c)];
  return RealTable(full, std::move(out));
}

LinearOpMatrix cond_exp_operator(const FinitePmf& p, const std::vector<std::string>& from_axes,
                                 const std::vector<std::string>& to_axes, bool strict) {
  for (const auto& t : to_axes) {
    bool found = false;
    for (const auto& f : from_axes) found |= (f == t);
    if (!found) throw InvalidSpec("to-axes must be a subset of from-axes");
  }
  AxisSet from = p.space().subset(from_axes);
  AxisSet to = p.space().subset(to_axes);
  FinitePmf pf = marginal(p, from_axes);
  Projection proj(from, to);

  Vec to_mass = Vec::Zero(static_cast<Eigen::Index>(to.cell_count()));
  for (std::size_t c = 0; c < from.cell_count(); ++c)
    to_mass[static_cast<Eigen::Index>(proj(c))] += pf.mass(c);

  Mat m = Mat::Zero(static_cast<Eigen::Index>(to.cell_count()),
                    static_cast<Eigen::Index>(from.cell_count()));
  for (std::size_t c = 0; c < from.cell_count(); ++c) {
    const auto r = static_cast<Eigen::Index>(proj(c));
    if (to_mass[r] > 0.0) {
      m(r, static_cast<Eigen::Index>(c)) = pf.mass(c) / to_mass[r];
    } else if (strict) {
      throw NumericFailure("zero-mass conditioning cell " +
                           to.cell_label(static_cast<std::size_t>(r)));
    }
  }
  return LinearOpMatrix{std::move(from), std::move(to), std::move(m)};
}

LinearOpMatrix cond_exp_projector(const FinitePmf& p, const std::vector<std::string>& sub_axes,
                                  bool strict) {
  LinearOpMatrix ce = cond_exp_operator(p, p.space().axis_names(), sub_axes, strict);
  Projection proj(p.space(), ce.codomain);
  Mat lift = Mat::Zero(static_cast<Eigen::Index>(p.cell_count()),
                       static_cast<Eigen::Index>(ce.codomain.cell_count()));
  for (std::size_t c = 0; c < p.cell_count(); ++c)
    lift(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(proj(c))) = 1.0;
  return LinearOpMatrix{p.space(), p.space(), lift * ce.entries};
}

FinitePmf tilt(const FinitePmf& p, const RealTable& h, double t) {
  if (!h.space.same_as(p.space())) throw InvalidSpec("tilt: space mismatch");
  Vec m(p.mass().size());
  for (std::size_t c = 0; c < p.cell_count(); ++c) {
    double factor = 1.0 + t * h[c];
    if (factor < 0.0)
      throw NumericFailure("tilt leaves the simplex at cell " + p.space().cell_label(c));
    m[static_cast<Eigen::Index>(c)] = p.mass(c) * factor;
  }
  // mean-zero h keeps the total at 1; construct strictly to catch drift
  return FinitePmf(p.space(), std::move(m));
}

}  // namespace fusion
