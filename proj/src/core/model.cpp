#include "core/model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "core/io.hpp"
#include "core/linalg.hpp"

namespace fusion {

using nlohmann::json;

void FusedLaw::validate() const {
  if (static_cast<std::size_t>(lambda.size()) != source_laws.size())
    throw InvalidSpec("lambda length does not match source count");
  if (source_laws.empty()) throw InvalidSpec("a fused law needs at least one source");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    if (!(lambda[j] > 0.0)) throw InvalidSpec("lambda(S=j) must be positive for every source");
    sum += lambda[j];
  }
  if (std::abs(sum - 1.0) > tol::mass) throw InvalidSpec("source weights do not sum to 1");
}

bool SourceStructure::region_empty(std::size_t k) const {
  const auto& m = region_mask[k];
  return std::none_of(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; });
}

SourceStructure build_structure(const AxisSet& ideal, const SourceSpec& spec) {
  if (spec.observed_axes.empty()) throw InvalidSpec("source observes no axes");
  for (const auto& n : spec.observed_axes)
    if (!ideal.has_axis(n)) throw InvalidSpec("observed axis '" + n + "' not in the ideal space");

  // The permutation, when given, must reproduce the block concatenation.
  std::vector<std::string> permuted;
  if (!spec.permutation.empty()) {
    if (spec.permutation.size() != spec.observed_axes.size())
      throw InvalidSpec("permutation length mismatch");
    std::vector<bool> used(spec.permutation.size(), false);
    for (std::size_t i : spec.permutation) {
      if (i >= spec.observed_axes.size() || used[i]) throw InvalidSpec("invalid permutation");
      used[i] = true;
      permuted.push_back(spec.observed_axes[i]);
    }
  }

  std::vector<std::string> concat;
  for (const auto& b : spec.blocks) {
    if (b.empty()) throw InvalidSpec("empty block");
    concat.insert(concat.end(), b.begin(), b.end());
  }
  {
    std::set<std::string> lhs(concat.begin(), concat.end());
    std::set<std::string> rhs(spec.observed_axes.begin(), spec.observed_axes.end());
    if (lhs != rhs || concat.size() != spec.observed_axes.size())
      throw InvalidSpec("blocks must partition the observed axes");
  }
  if (!permuted.empty() && permuted != concat)
    throw InvalidSpec("permutation disagrees with the block order");

  SourceStructure st;
  st.z_space = ideal.subset(concat);
  st.block_names = spec.blocks;
  st.prefix_names.resize(spec.blocks.size() + 1);
  st.prefix_space.resize(spec.blocks.size() + 1);
  std::vector<std::string> prefix;
  st.prefix_names[0] = prefix;
  st.prefix_space[0] = AxisSet{};
  for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
    prefix.insert(prefix.end(), spec.blocks[k].begin(), spec.blocks[k].end());
    st.prefix_names[k + 1] = prefix;
    st.prefix_space[k + 1] = ideal.subset(prefix);
  }

  if (spec.regions.size() != spec.blocks.size())
    throw InvalidSpec("one alignment region required per block");
  st.region_mask.resize(spec.blocks.size());
  for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
    const BlockRegion& r = spec.regions[k];
    const AxisSet& pre = st.prefix_space[k];
    std::vector<std::uint8_t> mask(pre.cell_count(), 0);
    if (k == 0) {
      if (r.kind == BlockRegion::Kind::Star) {
        mask[0] = 1;
      } else if (r.kind != BlockRegion::Kind::Empty) {
        throw InvalidSpec("the first block takes the marginal convention: star or empty");
      }
    } else {
      switch (r.kind) {
        case BlockRegion::Kind::Star:
          throw InvalidSpec("star is only meaningful for the first block");
        case BlockRegion::Kind::Empty:
          break;
        case BlockRegion::Kind::All:
          std::fill(mask.begin(), mask.end(), 1);
          break;
        case BlockRegion::Kind::Tuples:
          for (const auto& t : r.tuples) {
            if (t.size() != pre.axis_count()) throw InvalidSpec("region tuple arity mismatch");
            std::vector<std::size_t> multi(t.size());
            for (std::size_t i = 0; i < t.size(); ++i)
              multi[i] = pre.level_index(pre.axis(i).name, t[i]);
            mask[pre.flatten(multi)] = 1;
          }
          break;
      }
    }
    st.region_mask[k] = std::move(mask);
  }
  return st;
}

namespace {

struct BlockTables {
  FinitePmf post;  // marginal over prefix k+1
  FinitePmf pre;   // marginal over prefix k
};

BlockTables block_marginals(const FinitePmf& law, const SourceStructure& st, std::size_t k) {
  return BlockTables{marginal(law, st.prefix_names[k + 1]), marginal(law, st.prefix_names[k])};
}

}  // namespace

AlignmentReport check_alignment(const FusedLaw& p, const FinitePmf& q, const AlignmentSpec& c,
                                double tolerance) {
  p.validate();
  if (p.source_count() != c.source_count())
    throw InvalidSpec("law and alignment spec disagree on the source count");

  AlignmentReport rep;
  rep.aligned = true;
  for (std::size_t j = 0; j < c.source_count(); ++j) {
    SourceStructure st = build_structure(q.space(), c.sources[j]);
    if (!p.source_laws[j].space().same_as(st.z_space))
      throw InvalidSpec("source " + std::to_string(j + 1) +
                        " law is not on the permuted observed axes");
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      AlignmentReport::BlockEntry entry;
      entry.source = c.sources[j].id;
      entry.block = static_cast<int>(k + 1);
      if (!st.region_empty(k)) {
        BlockTables pt = block_marginals(p.source_laws[j], st, k);
        BlockTables qt = block_marginals(marginal(q, st.prefix_names[st.block_count()]), st, k);
        const AxisSet& post = st.prefix_space[k + 1];
        Projection post_to_pre(post, st.prefix_space[k]);
        // support conditions: every region cell needs positive mass under both laws
        for (std::size_t g = 0; g < st.prefix_space[k].cell_count(); ++g) {
          if (!st.region_mask[k][g]) continue;
          if (!(pt.pre.mass(g) > 0.0) || !(qt.pre.mass(g) > 0.0)) {
            rep.support_violations.push_back("source " + std::to_string(c.sources[j].id) +
                                             " block " + std::to_string(k + 1) + " cell '" +
                                             st.prefix_space[k].cell_label(g) +
                                             "' has zero mass");
            entry.ok = false;
          }
        }
        if (entry.ok) {
          for (std::size_t cpost = 0; cpost < post.cell_count(); ++cpost) {
            std::size_t g = post_to_pre(cpost);
            if (!st.region_mask[k][g]) continue;
            double pc = pt.post.mass(cpost) / pt.pre.mass(g);
            double qc = qt.post.mass(cpost) / qt.pre.mass(g);
            entry.max_discrepancy = std::max(entry.max_discrepancy, std::abs(pc - qc));
          }
          entry.ok = entry.max_discrepancy <= tolerance;
        }
      }
      rep.aligned = rep.aligned && entry.ok;
      rep.blocks.push_back(entry);
    }
  }
  return rep;
}

AlignmentReport check_strong_alignment(const FusedLaw& p, const FinitePmf& q,
                                       const std::vector<FinitePmf>& u, const AlignmentSpec& c,
                                       double tolerance) {
  AlignmentReport rep = check_alignment(p, q, c, tolerance);
  if (!rep.aligned) return rep;
  if (u.size() != p.source_count()) throw InvalidSpec("one U law required per source");

  double delta = 1.0, epsilon = 1.0;
  for (std::size_t j = 0; j < c.source_count(); ++j) {
    SourceStructure st = build_structure(q.space(), c.sources[j]);
    if (!u[j].space().same_as(st.z_space))
      throw InvalidSpec("U law for source " + std::to_string(j + 1) + " is on the wrong space");
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      FinitePmf p_pre = marginal(p.source_laws[j], st.prefix_names[k]);
      FinitePmf q_pre = marginal(marginal(q, st.prefix_names[st.block_count()]), st.prefix_names[k]);
      FinitePmf u_pre = marginal(u[j], st.prefix_names[k]);
      for (std::size_t g = 0; g < st.prefix_space[k].cell_count(); ++g) {
        if (st.region_mask[k][g]) {
          double r = p_pre.mass(g) / q_pre.mass(g);  // both positive per support checks
          delta = std::max({delta, r, 1.0 / r});
        } else if (p_pre.mass(g) > 0.0) {
          if (!(u_pre.mass(g) > 0.0))
            throw NumericFailure("dP(.|S=j)/dU undefined on '" +
                                 st.prefix_space[k].cell_label(g) + "'");
          double r = p_pre.mass(g) / u_pre.mass(g);
          epsilon = std::max({epsilon, r, 1.0 / r});
        }
      }
    }
  }
  rep.delta = delta;
  rep.epsilon = epsilon;
  return rep;
}

FusedLaw assemble_observed_law(const FinitePmf& q, const std::vector<FinitePmf>& u,
                               const Vec& lambda, const AlignmentSpec& c) {
  if (u.size() != c.source_count()) throw InvalidSpec("one U law required per source");
  FusedLaw out;
  out.lambda = lambda;
  for (std::size_t j = 0; j < c.source_count(); ++j) {
    SourceStructure st = build_structure(q.space(), c.sources[j]);
    if (!u[j].space().same_as(st.z_space))
      throw InvalidSpec("U law for source " + std::to_string(j + 1) + " is on the wrong space");
    FinitePmf q_on_z = marginal(q, st.prefix_names[st.block_count()]);

    std::vector<BlockTables> qt, ut;
    std::vector<Projection> to_post, to_pre;
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      qt.push_back(block_marginals(q_on_z, st, k));
      ut.push_back(block_marginals(u[j], st, k));
      to_post.emplace_back(st.z_space, st.prefix_space[k + 1]);
      to_pre.emplace_back(st.z_space, st.prefix_space[k]);
    }

    Vec massv(static_cast<Eigen::Index>(st.z_space.cell_count()));
    for (std::size_t cell = 0; cell < st.z_space.cell_count(); ++cell) {
      double m = 1.0;
      for (std::size_t k = 0; k < st.block_count() && m > 0.0; ++k) {
        std::size_t pre = to_pre[k](cell);
        std::size_t post = to_post[k](cell);
        const BlockTables& t = st.region_mask[k][pre] ? qt[k] : ut[k];
        double den = t.pre.mass(pre);
        if (den <= 0.0)
          throw NumericFailure("undefined conditional on positive-mass region cell '" +
                               st.prefix_space[k].cell_label(pre) + "'");
        m *= t.post.mass(post) / den;
      }
      massv[static_cast<Eigen::Index>(cell)] = m;
    }
    out.source_laws.push_back(FinitePmf::normalized(st.z_space, std::move(massv)));
  }
  out.validate();
  return out;
}

std::vector<FinitePmf> canonical_u(const FusedLaw& p) { return p.source_laws; }

bool c_equivalent(const FinitePmf& q1, const FinitePmf& q2, const AlignmentSpec& c,
                  double tolerance) {
  if (!q1.space().same_as(q2.space())) throw InvalidSpec("space mismatch");
  for (const auto& src : c.sources) {
    SourceStructure st = build_structure(q1.space(), src);
    FinitePmf a = marginal(q1, st.prefix_names[st.block_count()]);
    FinitePmf b = marginal(q2, st.prefix_names[st.block_count()]);
    for (std::size_t k = 0; k < st.block_count(); ++k) {
      if (st.region_empty(k)) continue;
      BlockTables at = block_marginals(a, st, k);
      BlockTables bt = block_marginals(b, st, k);
      Projection post_to_pre(st.prefix_space[k + 1], st.prefix_space[k]);
      for (std::size_t cpost = 0; cpost < st.prefix_space[k + 1].cell_count(); ++cpost) {
        std::size_t g = post_to_pre(cpost);
        if (!st.region_mask[k][g]) continue;
        if (!(at.pre.mass(g) > 0.0) || !(bt.pre.mass(g) > 0.0)) return false;
        double d = at.post.mass(cpost) / at.pre.mass(g) - bt.post.mass(cpost) / bt.pre.mass(g);
        if (std::abs(d) > tolerance) return false;
      }
    }
  }
  return true;
}

FusedModel::FusedModel(FinitePmf q, AlignmentSpec c, FusedLaw p, std::vector<FinitePmf> u,
                       std::optional<Mat> tangent_q)
    : q_(std::move(q)), c_(std::move(c)), p_(std::move(p)), u_(std::move(u)) {
  AlignmentReport rep = check_strong_alignment(p_, q_, u_, c_);
  if (!rep.aligned) throw ValidationFailure("model is not aligned; run validate for details");
  delta_ = *rep.delta;
  epsilon_ = *rep.epsilon;

  for (std::size_t j = 0; j < c_.source_count(); ++j)
    structures_.push_back(build_structure(q_.space(), c_.sources[j]));

  q_prefix_.resize(source_count());
  p_prefix_.resize(source_count());
  u_prefix_.resize(source_count());
  r_pq_.resize(source_count());
  r_qp_.resize(source_count());
  r_pu_.resize(source_count());
  for (std::size_t j = 0; j < source_count(); ++j) {
    const SourceStructure& st = structures_[j];
    q_source_.push_back(marginal(q_, st.prefix_names[st.block_count()]));
    for (std::size_t k = 0; k <= st.block_count(); ++k) {
      q_prefix_[j].push_back(marginal(q_source_[j], st.prefix_names[k]));
      p_prefix_[j].push_back(marginal(p_.source_laws[j], st.prefix_names[k]));
      u_prefix_[j].push_back(marginal(u_[j], st.prefix_names[k]));
      RealTable pq = RealTable::zeros(st.prefix_space[k]);
      RealTable qp = RealTable::zeros(st.prefix_space[k]);
      RealTable pu = RealTable::zeros(st.prefix_space[k]);
      for (std::size_t g = 0; g < st.prefix_space[k].cell_count(); ++g) {
        double pm = p_prefix_[j][k].mass(g), qm = q_prefix_[j][k].mass(g),
               um = u_prefix_[j][k].mass(g);
        if (qm > 0.0) pq[g] = pm / qm;
        if (pm > 0.0) qp[g] = qm / pm;
        if (um > 0.0) pu[g] = pm / um;
      }
      r_pq_[j].push_back(std::move(pq));
      r_qp_[j].push_back(std::move(qp));
      r_pu_[j].push_back(std::move(pu));
    }
  }

  if (tangent_q.has_value()) {
    // center and orthonormalize the supplied T(Q,Q) spanning set in L2(Q)
    Mat raw = std::move(*tangent_q);
    if (static_cast<std::size_t>(raw.rows()) != q_.cell_count())
      throw InvalidSpec("tangent_Q vectors must live on the ideal space");
    for (Eigen::Index col = 0; col < raw.cols(); ++col) {
      double m = raw.col(col).dot(q_.mass());
      raw.col(col).array() -= m;
    }
    tangent_q_ = gram_schmidt(raw, q_.mass());
  }
}

FusedModel FusedModel::bind(FinitePmf q, AlignmentSpec c, FusedLaw p,
                            std::optional<Mat> tangent_q) {
  std::vector<FinitePmf> u = canonical_u(p);
  return FusedModel(std::move(q), std::move(c), std::move(p), std::move(u),
                    std::move(tangent_q));
}

const Mat& FusedModel::tangent_q_basis() const {
  if (!tangent_q_.has_value())
    throw InvalidSpec("model is nonparametric in Q; no explicit tangent basis");
  return *tangent_q_;
}

const FinitePmf& FusedModel::q_prefix(std::size_t j, std::size_t k) const { return q_prefix_[j][k]; }
const FinitePmf& FusedModel::p_prefix(std::size_t j, std::size_t k) const { return p_prefix_[j][k]; }
const FinitePmf& FusedModel::u_prefix(std::size_t j, std::size_t k) const { return u_prefix_[j][k]; }
const RealTable& FusedModel::ratio_p_over_q(std::size_t j, std::size_t k) const { return r_pq_[j][k]; }
const RealTable& FusedModel::ratio_q_over_p(std::size_t j, std::size_t k) const { return r_qp_[j][k]; }
const RealTable& FusedModel::ratio_p_over_u(std::size_t j, std::size_t k) const { return r_pu_[j][k]; }
const FinitePmf& FusedModel::q_on_source(std::size_t j) const { return q_source_[j]; }

// --- JSON ---

namespace {

AxisSet axes_from_json(const json& jaxes) {
  std::vector<Axis> axes;
  for (const auto& ja : jaxes) {
    Axis a;
    a.name = ja.at("name").get<std::string>();
    for (const auto& l : ja.at("levels")) a.levels.push_back(l.get<std::string>());
    axes.push_back(std::move(a));
  }
  return AxisSet(std::move(axes));
}

FinitePmf pmf_from(const json& j) {
  AxisSet space = axes_from_json(j.at("axes"));
  const auto& jm = j.at("mass");
  Vec mass(static_cast<Eigen::Index>(jm.size()));
  for (std::size_t i = 0; i < jm.size(); ++i)
    mass[static_cast<Eigen::Index>(i)] = jm[i].get<double>();
  return FinitePmf(std::move(space), std::move(mass));
}

BlockRegion region_from(const json& j) {
  BlockRegion r;
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "star")
      r.kind = BlockRegion::Kind::Star;
    else if (s == "empty")
      r.kind = BlockRegion::Kind::Empty;
    else if (s == "all")
      r.kind = BlockRegion::Kind::All;
    else
      throw ParseError("unknown region keyword '" + s + "'");
  } else {
    r.kind = BlockRegion::Kind::Tuples;
    for (const auto& t : j.at("tuples")) {
      std::vector<std::string> tuple;
      for (const auto& lv : t) tuple.push_back(lv.get<std::string>());
      r.tuples.push_back(std::move(tuple));
    }
  }
  return r;
}

}  // namespace

ModelFile parse_model(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  try {
    ModelFile m{pmf_from(j.at("ideal")), {}, {}, {}, false, std::nullopt, ""};
    for (const auto& js : j.at("sources")) {
      SourceSpec s;
      s.id = js.at("id").get<int>();
      for (const auto& a : js.at("observed_axes")) s.observed_axes.push_back(a.get<std::string>());
      if (js.contains("permutation"))
        for (const auto& p : js.at("permutation")) s.permutation.push_back(p.get<std::size_t>());
      for (const auto& b : js.at("blocks")) {
        std::vector<std::string> block;
        for (const auto& a : b) block.push_back(a.get<std::string>());
        s.blocks.push_back(std::move(block));
      }
      for (const auto& r : js.at("regions")) s.regions.push_back(region_from(r));
      m.spec.sources.push_back(std::move(s));
    }
    const auto& jl = j.at("lambda");
    m.lambda.resize(static_cast<Eigen::Index>(jl.size()));
    for (std::size_t i = 0; i < jl.size(); ++i)
      m.lambda[static_cast<Eigen::Index>(i)] = jl[i].get<double>();
    if (j.contains("derive_from_ideal") && j.at("derive_from_ideal").get<bool>()) {
      m.derive_from_ideal = true;
    } else {
      for (const auto& jp : j.at("source_laws")) m.source_laws.push_back(pmf_from(jp));
    }
    if (j.contains("tangent_Q")) {
      const auto& jt = j.at("tangent_Q");
      Mat t(static_cast<Eigen::Index>(m.ideal.cell_count()), static_cast<Eigen::Index>(jt.size()));
      for (std::size_t c = 0; c < jt.size(); ++c) {
        if (jt[c].size() != m.ideal.cell_count())
          throw ParseError("tangent_Q vector has the wrong length");
        for (std::size_t r = 0; r < jt[c].size(); ++r)
          t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = jt[c][r].get<double>();
      }
      m.tangent_q = std::move(t);
    }
    if (j.contains("framework")) m.framework_json = j.at("framework").dump();
    // ids must be 1..J in order
    for (std::size_t i = 0; i < m.spec.sources.size(); ++i)
      if (m.spec.sources[i].id != static_cast<int>(i + 1))
        throw ParseError("source ids must be 1..J in order");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

FusedLaw ModelFile::law(bool strict) const {
  if (!derive_from_ideal) {
    FusedLaw p{lambda, source_laws};
    p.validate();
    return p;
  }
  std::vector<FinitePmf> u;
  for (const auto& s : spec.sources) {
    SourceStructure st = build_structure(ideal.space(), s);
    u.push_back(marginal(ideal, st.prefix_names[st.block_count()]));
  }
  (void)strict;
  return assemble_observed_law(ideal, u, lambda, spec);
}

FusedModel ModelFile::bind() const { return FusedModel::bind(ideal, spec, law(), tangent_q); }

std::string pmf_to_json(const FinitePmf& p) {
  JsonWriter w;
  w.begin_object();
  w.key("axes");
  w.begin_array();
  for (const auto& a : p.space().axes()) {
    w.begin_object();
    w.key("name");
    w.string(a.name);
    w.key("levels");
    w.begin_array();
    for (const auto& l : a.levels) w.string(l);
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.key("mass");
  w.begin_array();
  for (std::size_t c = 0; c < p.cell_count(); ++c) w.number(p.mass(c));
  w.end_array();
  w.end_object();
  return w.str();
}

FinitePmf pmf_from_json(const std::string& json_text) {
  try {
    return pmf_from(json::parse(json_text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("pmf: ") + e.what());
  }
}

std::string model_to_json(const ModelFile& m) {
  JsonWriter w;
  w.begin_object();
  w.key("ideal");
  w.raw(pmf_to_json(m.ideal));
  w.key("sources");
  w.begin_array();
  for (const auto& s : m.spec.sources) {
    SourceStructure st = build_structure(m.ideal.space(), s);
    w.begin_object();
    w.key("id");
    w.number_int(s.id);
    w.key("observed_axes");
    w.begin_array();
    for (const auto& a : s.observed_axes) w.string(a);
    w.end_array();
    w.key("blocks");
    w.begin_array();
    for (const auto& b : s.blocks) {
      w.begin_array();
      for (const auto& a : b) w.string(a);
      w.end_array();
    }
    w.end_array();
    w.key("regions");
    w.begin_array();
    for (std::size_t k = 0; k < s.regions.size(); ++k) {
      const auto& r = s.regions[k];
      if (r.kind == BlockRegion::Kind::Star) {
        w.string("star");
      } else if (r.kind == BlockRegion::Kind::Empty) {
        w.string("empty");
      } else {
        // serialize extensionally, expanding any "all" sugar
        w.begin_object();
        w.key("tuples");
        w.begin_array();
        const AxisSet& pre = st.prefix_space[k];
        for (std::size_t g = 0; g < pre.cell_count(); ++g) {
          if (!st.region_mask[k][g]) continue;
          auto multi = pre.unflatten(g);
          w.begin_array();
          for (std::size_t i = 0; i < pre.axis_count(); ++i)
            w.string(pre.axis(i).levels[multi[i]]);
          w.end_array();
        }
        w.end_array();
        w.end_object();
      }
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.key("lambda");
  w.begin_array();
  for (Eigen::Index i = 0; i < m.lambda.size(); ++i) w.number(m.lambda[i]);
  w.end_array();
  if (m.derive_from_ideal) {
    w.key("derive_from_ideal");
    w.boolean(true);
  } else {
    w.key("source_laws");
    w.begin_array();
    for (const auto& p : m.source_laws) w.raw(pmf_to_json(p));
    w.end_array();
  }
  if (m.tangent_q.has_value()) {
    w.key("tangent_Q");
    w.begin_array();
    for (Eigen::Index c = 0; c < m.tangent_q->cols(); ++c) {
      w.begin_array();
      for (Eigen::Index r = 0; r < m.tangent_q->rows(); ++r) w.number((*m.tangent_q)(r, c));
      w.end_array();
    }
    w.end_array();
  }
  if (!m.framework_json.empty()) {
    w.key("framework");
    w.raw(m.framework_json);
  }
  w.end_object();
  return w.str();
}

}  // namespace fusion
