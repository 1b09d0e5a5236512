#include "core/estimation.hpp"

#include <cmath>
#include <random>
#include <thread>

#include "core/io.hpp"
#include "core/linalg.hpp"

namespace fusion {

namespace {

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t draw_categorical(std::mt19937_64& rng, const Vec& mass) {
  double u = unit_double(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mass.size(); ++i) {
    acc += mass[i];
    if (u < acc) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(mass.size() - 1);
}

}  // namespace

Dataset sample(const FusedLaw& p, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidSpec("sample size must be at least 1");
  p.validate();
  Dataset d;
  d.seed = seed;
  d.records.reserve(n);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t s = draw_categorical(rng, p.lambda);
    std::size_t cell = draw_categorical(rng, p.source_laws[s].mass());
    d.records.push_back({s, cell});
  }
  return d;
}

FusedLaw empirical_law(const Dataset& d, const FusedLaw& shape) {
  const std::size_t nsrc = shape.source_count();
  std::vector<Vec> counts;
  Vec src_counts = Vec::Zero(static_cast<Eigen::Index>(nsrc));
  for (std::size_t j = 0; j < nsrc; ++j)
    counts.push_back(Vec::Zero(static_cast<Eigen::Index>(shape.source_laws[j].cell_count())));
  for (const auto& r : d.records) {
    if (r.source >= nsrc || r.cell >= static_cast<std::size_t>(counts[r.source].size()))
      throw InvalidSpec("dataset record outside the declared source spaces");
    counts[r.source][static_cast<Eigen::Index>(r.cell)] += 1.0;
    src_counts[static_cast<Eigen::Index>(r.source)] += 1.0;
  }
  FusedLaw out;
  out.lambda = src_counts / static_cast<double>(d.records.size());
  for (std::size_t j = 0; j < nsrc; ++j) {
    if (!(src_counts[static_cast<Eigen::Index>(j)] > 0.0))
      throw NumericFailure("source " + std::to_string(j + 1) + " was never observed");
    out.source_laws.push_back(
        FinitePmf::normalized(shape.source_laws[j].space(), counts[j]).floored());
  }
  return out;
}

FusedLaw obedient_projection(const FusedLaw& p_tilde, const AlignmentSpec& c,
                             const std::vector<QMap>& q_maps, const QProjector* restrict_q) {
  if (q_maps.empty()) throw InvalidSpec("obedient projection needs at least one Q map");
  FinitePmf q_hat = q_maps[0](p_tilde);
  if (q_maps.size() > 1) {
    Vec acc = q_hat.mass();
    for (std::size_t m = 1; m < q_maps.size(); ++m) {
      FinitePmf qm = q_maps[m](p_tilde);
      if (!qm.space().same_as(q_hat.space()))
        throw InvalidSpec("Q maps disagree on the ideal space");
      acc += qm.mass();
    }
    q_hat = FinitePmf::normalized(q_hat.space(), acc);
  }
  if (restrict_q) q_hat = (*restrict_q)(q_hat);
  return assemble_observed_law(q_hat, canonical_u(p_tilde), p_tilde.lambda, c);
}

std::vector<QMap> ub_anchor_maps(const Framework& fw,
                                 const std::vector<std::vector<std::string>>& anchors) {
  std::vector<QMap> maps;
  for (const auto& anchor : anchors) {
    FrameworkParams params = fw.params;
    params.u0 = anchor;
    if (fw.kind == FrameworkKind::TransportIIIb) {
      // anchor is (l..., a); split back into l0 and a fixed at 0
      params.l0.assign(anchor.begin(), anchor.end() - 1);
    }
    FrameworkKind kind = fw.kind;
    AlignmentSpec spec = fw.spec;
    maps.push_back([kind, params, spec](const FusedLaw& law) {
      return bind_framework(kind, params, spec, law, /*validate=*/false).q;
    });
  }
  return maps;
}

OneStep one_step_at(const Dataset& d, const Framework& fw, const FusedLaw& p_hat) {
  Framework fw_hat = rebind(fw, p_hat);
  OneStep out;
  out.plug_in = framework_phi(fw_hat);
  ObsFunction eif = framework_eif(fw_hat);
  double sum = 0.0, sumsq = 0.0;
  for (const auto& r : d.records) {
    double v = eif.per_source[r.source][r.cell];
    sum += v;
    sumsq += v * v;
  }
  const auto n = static_cast<double>(d.records.size());
  out.correction = sum / n;
  out.estimate = out.plug_in + out.correction;
  double var = sumsq / n - (sum / n) * (sum / n);
  out.se = std::sqrt(std::max(0.0, var) / n);
  return out;
}

OneStep one_step(const Dataset& d, const Framework& fw, bool obedient,
                 const std::vector<QMap>& q_maps) {
  FusedLaw hat = empirical_law(d, fw.law);
  if (obedient) hat = obedient_projection(hat, fw.spec, q_maps);
  return one_step_at(d, fw, hat);
}

MonteCarloReport monte_carlo(const Framework& fw, const std::vector<std::size_t>& n_grid,
                             std::size_t reps, std::uint64_t seed, int threads, bool obedient,
                             const std::vector<QMap>& q_maps) {
  if (reps < 100) throw InvalidSpec("at least 100 replications required");
  MonteCarloReport rep;
  rep.seed = seed;
  rep.kind = to_string(fw.kind);
  const double truth = framework_phi(fw);

  std::uint64_t stream = 0;
  for (std::size_t n : n_grid) {
    std::vector<double> est(reps), se(reps);
    std::vector<std::uint64_t> seeds(reps);
    for (std::size_t r = 0; r < reps; ++r) seeds[r] = derive_seed(seed, stream++);

    auto run_range = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) {
        Dataset data = sample(fw.law, n, seeds[r]);
        OneStep os = one_step(data, fw, obedient, q_maps);
        est[r] = os.estimate;
        se[r] = os.se;
      }
    };
    int nthreads = std::max(1, threads);
    if (nthreads == 1) {
      run_range(0, reps);
    } else {
      std::vector<std::thread> pool;
      std::size_t chunk = (reps + nthreads - 1) / nthreads;
      for (int t = 0; t < nthreads; ++t) {
        std::size_t lo = std::min(reps, static_cast<std::size_t>(t) * chunk);
        std::size_t hi = std::min(reps, lo + chunk);
        if (lo < hi) pool.emplace_back(run_range, lo, hi);
      }
      for (auto& th : pool) th.join();
    }

    MonteCarloRow row;
    row.n = n;
    row.reps = reps;
    row.truth = truth;
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) sum += est[r];
    row.mean_estimate = sum / static_cast<double>(reps);
    double ss = 0.0, sum_se = 0.0, cover = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      double dlt = est[r] - row.mean_estimate;
      ss += dlt * dlt;
      sum_se += se[r];
      if (std::abs(est[r] - truth) <= 1.959963984540054 * se[r]) cover += 1.0;
    }
    row.empirical_sd = std::sqrt(ss / std::max<std::size_t>(1, reps - 1));
    row.mean_se = sum_se / static_cast<double>(reps);
    row.sqrt_n_bias = std::sqrt(static_cast<double>(n)) * std::abs(row.mean_estimate - truth);
    row.coverage95 = cover / static_cast<double>(reps);
    rep.rows.push_back(row);
  }
  return rep;
}

std::string monte_carlo_csv(const MonteCarloReport& r) {
  std::string out = "n,reps,kind,truth,mean_estimate,empirical_sd,mean_se,sqrt_n_bias,coverage95\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.n) + "," + std::to_string(row.reps) + "," + r.kind + "," +
           format_double(row.truth) + "," + format_double(row.mean_estimate) + "," +
           format_double(row.empirical_sd) + "," + format_double(row.mean_se) + "," +
           format_double(row.sqrt_n_bias) + "," + format_double(row.coverage95) + "\n";
  }
  return out;
}

}  // namespace fusion
