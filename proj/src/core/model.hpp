#pragma once

#include <memory>
#include <optional>

#include "core/tables.hpp"

namespace fusion {

// Alignment region attached to one block. The first block of a source uses
// the marginal convention: Star (marginal aligned) or Empty (not aligned).
// Later blocks carry an explicit set of level tuples over the preceding
// blocks' axes; All is accepted as input sugar and expanded at bind time.
struct BlockRegion {
  enum class Kind { Star, Empty, Tuples, All };
  Kind kind = Kind::Empty;
  std::vector<std::vector<std::string>> tuples;  // level labels over prefix axes
};

struct SourceSpec {
  int id = 0;                                  // 1..J
  std::vector<std::string> observed_axes;      // subset of ideal axes, W^(j) order
  std::vector<std::size_t> permutation;        // z axis i = observed_axes[permutation[i]]
  std::vector<std::vector<std::string>> blocks;  // ordered partition of the permuted axes
  std::vector<BlockRegion> regions;              // one per block
};

struct AlignmentSpec {
  std::vector<SourceSpec> sources;
  std::size_t source_count() const { return sources.size(); }
};

// Observed-data law: source weights plus one pmf per source over Z^(j).
struct FusedLaw {
  Vec lambda;                          // J entries, all > 0
  std::vector<FinitePmf> source_laws;  // source_laws[j] over the permuted axes of source j

  std::size_t source_count() const { return source_laws.size(); }
  void validate() const;
};

struct AlignmentReport {
  bool aligned = false;
  struct BlockEntry {
    int source = 0;  // 1-based id
    int block = 0;   // 1-based k
    double max_discrepancy = 0.0;
    bool ok = true;
  };
  std::vector<BlockEntry> blocks;
  std::vector<std::string> support_violations;
  std::optional<double> delta;    // strong-alignment bound for dP(.|S=j)/dQ
  std::optional<double> epsilon;  // strong-alignment bound for dP(.|S=j)/dU^(j)
};

// Precomputed block/prefix structure for one source. Block indices are
// 0-based here; prefix_space[k] holds the axes of blocks 0..k-1, so
// prefix_space[0] is the trivial space (the paper's z̄_0) and
// prefix_space[K] is the full Z^(j).
struct SourceStructure {
  AxisSet z_space;
  std::vector<std::vector<std::string>> block_names;
  std::vector<std::vector<std::string>> prefix_names;  // size K+1
  std::vector<AxisSet> prefix_space;                   // size K+1
  std::vector<std::vector<std::uint8_t>> region_mask;  // [k][cell of prefix_space[k]]
  std::size_t block_count() const { return block_names.size(); }
  bool region_empty(std::size_t k) const;
};

SourceStructure build_structure(const AxisSet& ideal, const SourceSpec& spec);

// Conditional-table agreement of P(.|S=j) with Q on every aligned region,
// plus the support conditions of the alignment definition.
AlignmentReport check_alignment(const FusedLaw& p, const FinitePmf& q, const AlignmentSpec& c,
                                double tolerance = tol::cell);

// Tightest (delta, epsilon) bounding the prefix density ratios on aligned
// regions and their complements. Fills the strong fields of the report;
// throws NumericFailure when a required ratio is undefined.
AlignmentReport check_strong_alignment(const FusedLaw& p, const FinitePmf& q,
                                       const std::vector<FinitePmf>& u, const AlignmentSpec& c,
                                       double tolerance = tol::cell);

// P_{Q,U,lambda}: chain the Q-conditionals on aligned regions and the
// U-conditionals elsewhere.
FusedLaw assemble_observed_law(const FinitePmf& q, const std::vector<FinitePmf>& u,
                               const Vec& lambda, const AlignmentSpec& c);

std::vector<FinitePmf> canonical_u(const FusedLaw& p);

bool c_equivalent(const FinitePmf& q1, const FinitePmf& q2, const AlignmentSpec& c,
                  double tolerance = tol::cell);

// A fused-data model bound for operator work: (Q, U, P) strongly aligned,
// with per-source prefix marginals and density ratios cached.
class FusedModel {
 public:
  FusedModel(FinitePmf q, AlignmentSpec c, FusedLaw p, std::vector<FinitePmf> u,
             std::optional<Mat> tangent_q = std::nullopt);

  // U^(j) := P(.|S=j), the canonical choice.
  static FusedModel bind(FinitePmf q, AlignmentSpec c, FusedLaw p,
                         std::optional<Mat> tangent_q = std::nullopt);

  const FinitePmf& q() const { return q_; }
  const AlignmentSpec& spec() const { return c_; }
  const FusedLaw& p() const { return p_; }
  const std::vector<FinitePmf>& u() const { return u_; }
  std::size_t source_count() const { return structures_.size(); }
  const SourceStructure& structure(std::size_t j) const { return structures_[j]; }
  double lambda(std::size_t j) const { return p_.lambda[static_cast<Eigen::Index>(j)]; }
  double delta() const { return delta_; }
  double epsilon() const { return epsilon_; }

  // T(Q,Q) columns, orthonormal in L2(Q); empty matrix means nonparametric.
  bool q_nonparametric() const { return !tangent_q_.has_value(); }
  const Mat& tangent_q_basis() const;

  // Q and P(.|S=j) marginals over prefix k, in source axis order.
  const FinitePmf& q_prefix(std::size_t j, std::size_t k) const;
  const FinitePmf& p_prefix(std::size_t j, std::size_t k) const;
  const FinitePmf& u_prefix(std::size_t j, std::size_t k) const;

  // Density ratios evaluated on prefix-k cells (k = 0 gives the scalar 1).
  const RealTable& ratio_p_over_q(std::size_t j, std::size_t k) const;
  const RealTable& ratio_q_over_p(std::size_t j, std::size_t k) const;
  const RealTable& ratio_p_over_u(std::size_t j, std::size_t k) const;

  // Full-space marginals of Q over the source's z axes.
  const FinitePmf& q_on_source(std::size_t j) const;

 private:
  FinitePmf q_;
  AlignmentSpec c_;
  FusedLaw p_;
  std::vector<FinitePmf> u_;
  std::vector<SourceStructure> structures_;
  std::optional<Mat> tangent_q_;
  double delta_ = 1.0, epsilon_ = 1.0;

  std::vector<std::vector<FinitePmf>> q_prefix_, p_prefix_, u_prefix_;
  std::vector<std::vector<RealTable>> r_pq_, r_qp_, r_pu_;
  std::vector<FinitePmf> q_source_;
};

// --- model file (JSON) ---

struct ModelFile {
  FinitePmf ideal;
  AlignmentSpec spec;
  Vec lambda;
  std::vector<FinitePmf> source_laws;  // empty when derive_from_ideal
  bool derive_from_ideal = false;
  std::optional<Mat> tangent_q;
  std::string framework_json;  // raw "framework" object, "" if absent

  FusedLaw law(bool strict = true) const;  // the explicit laws, or derived from ideal
  FusedModel bind() const;
};

ModelFile parse_model(const std::string& json_text);
std::string model_to_json(const ModelFile& m);

std::string pmf_to_json(const FinitePmf& p);
FinitePmf pmf_from_json(const std::string& json_text);

}  // namespace fusion
