#include "helpers.hpp"

namespace fusion::testing {

FusedModel random_small_model(std::uint64_t seed) {
  auto rng = rng_for(seed);
  const int shape = static_cast<int>(seed % 4);
  AlignmentSpec spec;
  AxisSet ideal;
  auto region = [](BlockRegion::Kind k) { return BlockRegion{k, {}}; };
  auto tuples = [](std::vector<std::vector<std::string>> t) {
    return BlockRegion{BlockRegion::Kind::Tuples, std::move(t)};
  };
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

  switch (shape) {
    case 0:
      ideal = toy_ideal_space();
      spec = toy_spec();
      break;
    case 1:
      ideal = AxisSet({Axis{"X", {"0", "1"}}, Axis{"Y", {"0", "1"}}, Axis{"Z", {"0", "1", "2"}}});
      spec.sources = {source(1, {{"X"}, {"Y", "Z"}},
                             {region(BlockRegion::Kind::Star), region(BlockRegion::Kind::All)}),
                      source(2, {{"Z"}, {"X"}},
                             {region(BlockRegion::Kind::Empty), tuples({{"0"}, {"2"}})})};
      break;
    case 2:
      ideal = AxisSet({Axis{"A", {"0", "1"}}, Axis{"B", {"0", "1", "2"}}, Axis{"C", {"0", "1"}}});
      spec.sources = {source(1, {{"A"}, {"B"}},
                             {region(BlockRegion::Kind::Empty), region(BlockRegion::Kind::All)}),
                      source(2, {{"B"}, {"C"}},
                             {region(BlockRegion::Kind::Star), tuples({{"1"}})}),
                      source(3, {{"C"}, {"A"}},
                             {region(BlockRegion::Kind::Empty), region(BlockRegion::Kind::All)})};
      break;
    default:
      ideal = AxisSet({Axis{"U", {"0", "1", "2"}}, Axis{"B", {"0", "1", "2"}}});
      spec.sources = {source(1, {{"B"}, {"U"}},
                             {region(BlockRegion::Kind::Empty), region(BlockRegion::Kind::All)}),
                      source(2, {{"U"}, {"B"}},
                             {region(BlockRegion::Kind::Empty), region(BlockRegion::Kind::All)})};
      break;
  }
  FinitePmf q = random_pmf(rng, ideal, 0.6);
  FusedLaw law = random_aligned_law(rng, q, spec, 0.6);
  return FusedModel::bind(q, spec, law);
}

Framework random_tsiv_framework(std::uint64_t seed, std::size_t nl) {
  auto rng = rng_for(seed);
  std::vector<std::string> llv;
  for (std::size_t i = 1; i <= nl; ++i) llv.push_back(std::to_string(i));
  AxisSet ideal({Axis{"L", llv}, Axis{"X", {"0", "1", "2"}}, Axis{"Y", {"0", "1"}}});
  const double alpha = 0.3, psi = 0.15;
  std::uniform_real_distribution<double> mid(0.2, 0.8), wig(-0.05, 0.05);

  std::vector<double> ql(nl), dl(nl);
  std::vector<std::array<double, 3>> qx(nl);
  double qs = 0.0;
  for (std::size_t l = 0; l < nl; ++l) {
    ql[l] = mid(rng);
    qs += ql[l];
    double w0 = mid(rng), w1 = mid(rng);
    double w2 = mid(rng) + 0.4 * static_cast<double>(l);  // keep E[X|l] moving with l
    double tot = w0 + w1 + w2;
    qx[l] = {w0 / tot, w1 / tot, w2 / tot};
    dl[l] = wig(rng);
  }
  Vec mass(static_cast<Eigen::Index>(ideal.cell_count()));
  for (std::size_t c = 0; c < ideal.cell_count(); ++c) {
    auto m = ideal.unflatten(c);
    double x = static_cast<double>(m[1]);
    double ex = qx[m[0]][0] * 0 + qx[m[0]][1] * 1 + qx[m[0]][2] * 2;
    double py1 = alpha + psi * x + dl[m[0]] * (x - ex);
    mass[static_cast<Eigen::Index>(c)] =
        ql[m[0]] / qs * qx[m[0]][m[1]] * (m[2] == 1 ? py1 : 1 - py1);
  }
  FinitePmf q(ideal, std::move(mass));
  FrameworkParams params;
  params.tsiv_l = "L";
  params.tsiv_x = "X";
  params.y_axis = params.tsiv_y = "Y";
  AlignmentSpec spec = canonical_framework_spec(FrameworkKind::TSIV, params, ideal);
  FusedLaw law = random_aligned_law(rng, q, spec);
  return bind_framework(FrameworkKind::TSIV, params, spec, law);
}

Framework random_ub_framework(FrameworkKind kind, std::uint64_t seed, std::size_t t_levels,
                              std::size_t b_levels) {
  auto rng = rng_for(seed);
  std::vector<std::string> ulv, blv;
  for (std::size_t i = 1; i <= t_levels; ++i) ulv.push_back(std::to_string(i));
  for (std::size_t i = 1; i <= b_levels; ++i) blv.push_back(std::to_string(i));
  AxisSet ideal({Axis{"U", ulv}, Axis{"B", blv}});
  FinitePmf q = random_pmf(rng, ideal, 0.5);
  FrameworkParams params;
  params.u_axes = {"U"};
  params.b_axes = {"B"};
  params.u0 = {"1"};
  params.u_star = {ulv.back()};
  params.b_star = {blv.back()};
  AlignmentSpec spec = canonical_framework_spec(kind, params, ideal);
  FusedLaw law = random_aligned_law(rng, q, spec);
  return bind_framework(kind, params, spec, law);
}

}  // namespace fusion::testing
