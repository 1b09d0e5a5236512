#pragma once

#include <functional>

#include "core/frameworks.hpp"

namespace fusion {

struct Dataset {
  struct Record {
    std::size_t source;  // 0-based
    std::size_t cell;    // flat cell in that source's Z space
  };
  std::vector<Record> records;
  std::uint64_t seed = 0;
};

// i.i.d. draws: S from lambda, then Z^(s) from the source pmf; inverse-CDF
// sampling so a fixed seed gives a byte-identical dataset everywhere.
Dataset sample(const FusedLaw& p, std::size_t n, std::uint64_t seed);

// Frequency tables with the 1e-12 floor on empty cells; throws if a source
// was never observed. The result is generally model-disobedient.
FusedLaw empirical_law(const Dataset& d, const FusedLaw& shape);

using QMap = std::function<FinitePmf(const FusedLaw&)>;
using QProjector = std::function<FinitePmf(const FinitePmf&)>;

// Average the reconstructions Q^(m)(P~), optionally project into a restricted
// ideal family, and rebuild: aligned blocks from Q-hat, everything else from P~.
FusedLaw obedient_projection(const FusedLaw& p_tilde, const AlignmentSpec& c,
                             const std::vector<QMap>& q_maps,
                             const QProjector* restrict_q = nullptr);

// One reconstruction map per anchor u0' for a (U,B) framework.
std::vector<QMap> ub_anchor_maps(const Framework& fw,
                                 const std::vector<std::vector<std::string>>& anchors);

struct OneStep {
  double estimate = 0.0;
  double se = 0.0;
  double plug_in = 0.0;
  double correction = 0.0;
};
// phi(P-hat) + mean of the estimated EIF over the sample.
OneStep one_step(const Dataset& d, const Framework& fw, bool obedient,
                 const std::vector<QMap>& q_maps = {});
// Same correction applied at an arbitrary initial estimate of the law (a
// regularized or otherwise biased P-hat).
OneStep one_step_at(const Dataset& d, const Framework& fw, const FusedLaw& p_hat);

struct MonteCarloRow {
  std::size_t n = 0;
  std::size_t reps = 0;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double empirical_sd = 0.0;
  double mean_se = 0.0;
  double sqrt_n_bias = 0.0;
  double coverage95 = 0.0;
};
struct MonteCarloReport {
  std::uint64_t seed = 0;
  std::string kind;
  std::vector<MonteCarloRow> rows;
};

// Per-replication seeds derived by a splitmix counter from (seed, rep index);
// accumulation follows replication order, so reports are reproducible even
// with a worker pool.
MonteCarloReport monte_carlo(const Framework& fw, const std::vector<std::size_t>& n_grid,
                             std::size_t reps, std::uint64_t seed, int threads = 1,
                             bool obedient = false, const std::vector<QMap>& q_maps = {});

std::string monte_carlo_csv(const MonteCarloReport& r);

}  // namespace fusion
