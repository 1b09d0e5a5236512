#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "core/axes.hpp"

namespace fusion {

namespace tol {
// Absolute tolerances, pinned once for the whole library.
inline constexpr double mass = 1e-12;        // pmf normalization
inline constexpr double cell = 1e-9;         // default cell-wise comparisons
inline constexpr double mean_zero = 1e-10;   // mean-zero postconditions
inline constexpr double adjoint = 1e-11;     // adjoint identity
inline constexpr double residual = 1e-8;     // least-squares FAIL threshold (relative)
inline constexpr double rank_rel = 1e-9;     // singular-value rank cut, relative to largest
inline constexpr double eps_floor = 1e-12;   // mass floor for empirical laws
}  // namespace tol

namespace diag {
// Degradation events are never silent: callers surface these in reports.
struct Counters {
  std::uint64_t floored_cells = 0;
  std::uint64_t pinv_truncations = 0;
};
Counters& counters();  // thread-local
void reset_counters();
}  // namespace diag

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Real-valued table over a product of axes.
struct RealTable {
  AxisSet space;
  Vec values;

  RealTable() = default;
  RealTable(AxisSet s, Vec v);
  static RealTable zeros(const AxisSet& s);
  static RealTable constant(const AxisSet& s, double c);

  double& operator[](std::size_t i) { return values[static_cast<Eigen::Index>(i)]; }
  double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
  std::size_t size() const { return space.cell_count(); }
};

// Probability table over a product of axes; masses sum to 1 within 1e-12.
class FinitePmf {
 public:
  FinitePmf() = default;
  FinitePmf(AxisSet space, Vec mass);                // validates normalization
  static FinitePmf normalized(AxisSet space, Vec w); // rescales nonnegative weights
  static FinitePmf uniform(const AxisSet& space);

  const AxisSet& space() const { return space_; }
  const Vec& mass() const { return mass_; }
  double mass(std::size_t cell) const { return mass_[static_cast<Eigen::Index>(cell)]; }
  std::size_t cell_count() const { return space_.cell_count(); }
  bool in_support(std::size_t cell) const { return mass_[static_cast<Eigen::Index>(cell)] > 0.0; }
  bool strictly_positive() const;

  // Zero cells raised to 1e-12, then renormalized. Only zero cells move.
  FinitePmf floored() const;

 private:
  AxisSet space_;
  Vec mass_;
};

// marginal over `keep` (result axes take the order of `keep`, which may permute)
FinitePmf marginal(const FinitePmf& p, const std::vector<std::string>& keep);

// q(target | given) as a table over [given..., target...]. Cells whose
// conditioning slice has zero mass are left at 0 and reported; in strict mode
// they raise NumericFailure.
struct ConditionalTable {
  RealTable table;                      // axes: given..., target...
  std::vector<std::size_t> undefined;   // cells of the `given` sub-space with zero mass
};
ConditionalTable conditional(const FinitePmf& p, const std::vector<std::string>& target,
                             const std::vector<std::string>& given, bool strict = true);

// dNum/dDen of the marginals over `axes`; 0 off the den-support.
RealTable rn_ratio(const FinitePmf& num, const FinitePmf& den,
                   const std::vector<std::string>& axes);

// E_p[f | sub-axes] as a table over `sub`. `f` lives on p's space.
RealTable cond_mean(const FinitePmf& p, const RealTable& f, const AxisSet& sub,
                    bool strict = true);
RealTable cond_mean(const FinitePmf& p, const RealTable& f,
                    const std::vector<std::string>& sub_names, bool strict = true);

double mean(const FinitePmf& p, const RealTable& f);
double l2_inner(const FinitePmf& p, const RealTable& f, const RealTable& g);
double l2_norm(const FinitePmf& p, const RealTable& f);
double variance(const FinitePmf& p, const RealTable& f);

bool mutually_abs_continuous(const FinitePmf& p, const FinitePmf& q);

// Lift a table on a sub-product to the full space (constant over dropped axes).
RealTable expand(const RealTable& sub, const AxisSet& full);

// Dense matrix with named domain/codomain spaces.
struct LinearOpMatrix {
  AxisSet domain;
  AxisSet codomain;
  Mat entries;  // codomain.cell_count() x domain.cell_count()
};

// (M f)(to-cell) = E_p[f | to-cell]; rectangular from-cells -> to-cells.
LinearOpMatrix cond_exp_operator(const FinitePmf& p, const std::vector<std::string>& from_axes,
                                 const std::vector<std::string>& to_axes, bool strict = true);

// Square idempotent projector onto sub-axes-measurable functions of p's space.
LinearOpMatrix cond_exp_projector(const FinitePmf& p, const std::vector<std::string>& sub_axes,
                                  bool strict = true);

// Multiplicative tilt mass*(1 + t*h); h must be mean-zero so no renormalization
// is needed. Throws NumericFailure if any cell would leave [0, inf).
FinitePmf tilt(const FinitePmf& p, const RealTable& h, double t);

}  // namespace fusion
