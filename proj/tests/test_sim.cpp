#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>
#include <sstream>

#include "sepness/closed_forms.hpp"
#include "sepness/exact.hpp"
#include "sepness/sim.hpp"
#include "sepness/stats.hpp"
#include "sepness/verify.hpp"

using namespace sepness;

TEST_CASE("stream determinism and independence") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    if (va != c.next_u64()) any_diff = true;
  }
  CHECK(any_diff);

  RngStream u(3, 0);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += u.next_uniform();
  CHECK(std::abs(sum / 100000 - 0.5) < 0.01);
}

TEST_CASE("dual runs conserve particles and reproduce bitwise") {
  const GraphSpec g = homogeneous_segment(4, 2.0, 0.5, 0.2, 0.8);
  const SiteSet start{{1, 3, 4}};
  for (int rep = 0; rep < 200; ++rep) {
    RngStream rng(100, rep);
    const DualState s = simulate_dual(g, start, rng);
    CHECK(s.bulk == 0);
    CHECK(s.absorbed_0 + s.absorbed_N == 3);
  }
  RngStream r1(9, 5), r2(9, 5);
  const DualState s1 = simulate_dual(g, start, r1);
  const DualState s2 = simulate_dual(g, start, r2);
  CHECK(s1.absorbed_0 == s2.absorbed_0);
  CHECK(r1.next_u64() == r2.next_u64());
}

TEST_CASE("dual absorption frequency approaches x/N") {
  const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);  // N = 4
  const auto stats = estimate_dual_levels(g, SiteSet{{2}}, 20000, RngStream(11, 0));
  CHECK(stats.frequency(1).covers(0.5));
}

TEST_CASE("dual level distribution matches the exact solve") {
  const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);  // N = 3
  const SiteSet start{{1, 2}};
  const auto stats = estimate_dual_levels(g, start, 20000, RngStream(12, 0));
  const auto exact = absorption_distribution(g, start);
  for (int l = 0; l <= 2; ++l) CHECK(stats.frequency(l).covers(exact.probs[l]));
  CHECK(chi_square_goodness(stats.level_counts, exact.probs).p_value > 0.01);
}

TEST_CASE("stirring pattern frequencies estimate the mixture weights") {
  const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);  // N = 3
  SiteSet full{{1, 2}};
  const auto stats = estimate_stirring_patterns(g, full, 20000, RngStream(13, 0));
  const MixtureWeights w = mixture_weights(g);
  long long total = 0;
  for (auto c : stats.pattern_counts) total += c;
  CHECK(total == stats.n_runs);
  for (std::uint64_t p = 0; p < 4; ++p)
    CHECK(stats.pattern_frequency(p).covers(w.weights[p]));
  CHECK(stats.marginal_right(0).covers(1.0 / 3));
  CHECK(stats.marginal_right(1).covers(2.0 / 3));
}

TEST_CASE("stirring patterns on a weighted tree match the mixture weights") {
  const GraphSpec g = battery_tree5();
  SiteSet full{{1, 2, 3, 4, 5}};
  const auto stats = estimate_stirring_patterns(g, full, 50000, RngStream(28, 0));
  const MixtureWeights w = mixture_weights(g);
  CHECK(chi_square_goodness(stats.pattern_counts, w.weights).p_value > 0.01);
}

TEST_CASE("open process on a weighted tree reaches its stationary moments") {
  const GraphSpec g = battery_tree5();
  const auto pi = stationary_distribution(g).probs;
  double truth = 0.0;
  for (std::uint64_t eta = 0; eta < pi.size(); ++eta)
    if ((eta >> 1) & 1u) truth += pi[eta];
  RngStream rng(29, 0);
  const auto est = simulate_sep(g, make_config(0, 5), 40000.0, rng, {SiteSet{{2}}});
  CHECK(est[0].covers(truth));
}

TEST_CASE("stirring level counts agree in law with the dual") {
  // the number of labels absorbed on the right is symmetric in the labels,
  // so its law under the swap dynamics equals the dual level distribution
  const GraphSpec g = homogeneous_segment(4, 2.0, 0.5, 0.2, 0.8);
  const SiteSet start{{1, 3}};
  const auto stats = estimate_stirring_patterns(g, start, 20000, RngStream(33, 0));
  std::vector<long long> level_counts(start.size() + 1, 0);
  for (std::uint64_t p = 0; p < stats.pattern_counts.size(); ++p)
    level_counts[std::popcount(p)] += stats.pattern_counts[p];
  const auto exact = absorption_distribution(g, start);
  CHECK(chi_square_goodness(level_counts, exact.probs).p_value > 0.01);
}

TEST_CASE("stirring restriction is consistent") {
  const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);
  SiteSet full{{1, 2, 3}}, sub{{1, 2}};
  const auto full_stats = estimate_stirring_patterns(g, full, 20000, RngStream(14, 0));
  const auto sub_stats = estimate_stirring_patterns(g, sub, 20000, RngStream(14, 1));
  std::vector<long long> restricted(4, 0);
  for (std::uint64_t p = 0; p < full_stats.pattern_counts.size(); ++p)
    restricted[p & 3u] += full_stats.pattern_counts[p];
  CHECK(chi_square_two_sample(restricted, sub_stats.pattern_counts).p_value > 0.01);
}

TEST_CASE("open-process averages reach the stationary values") {
  // equal densities: single-site occupation is rho
  {
    const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.5, 0.5);
    RngStream rng(15, 0);
    const auto est = simulate_sep(g, make_config(0, 3), 20000.0, rng,
                                  {SiteSet{{2}}});
    CHECK(est[0].covers(0.5));
  }
  // linear profile midpoint
  {
    const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);
    RngStream rng(16, 0);
    const auto est = simulate_sep(g, make_config(0, 3), 40000.0, rng,
                                  {SiteSet{{2}}});
    CHECK(est[0].covers(0.5));
  }
  // pair moment on the smallest segment
  {
    const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);
    RngStream rng(17, 0);
    const auto est = simulate_sep(g, make_config(0, 2), 40000.0, rng,
                                  {SiteSet{{1, 2}}});
    const double truth = n_point_correlation(3, 1.0, 1.0, 0.2, 0.8,
                                             SiteSet{{1, 2}}, false);
    CHECK(est[0].covers(truth));
  }
}

TEST_CASE("all single and pair observables converge on small lattices") {
  for (int n_sites : {1, 4}) {
    const GraphSpec g = homogeneous_segment(n_sites, 1.0, 1.0, 0.2, 0.8);
    const auto pi = stationary_distribution(g).probs;
    std::vector<SiteSet> observables;
    std::vector<double> truths;
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << n_sites); ++m) {
      if (std::popcount(m) > 2) continue;
      observables.push_back(SiteSet::from_mask(m));
      double t = 0.0;
      for (std::uint64_t eta = 0; eta < pi.size(); ++eta)
        if ((eta & m) == m) t += pi[eta];
      truths.push_back(t);
    }
    RngStream rng(32, n_sites);
    const auto est = simulate_sep(g, make_config(0, n_sites), 1e5, rng, observables);
    for (std::size_t i = 0; i < observables.size(); ++i) CHECK(est[i].covers(truths[i]));
  }
}

TEST_CASE("open-process trajectories reproduce bitwise") {
  const GraphSpec g = homogeneous_segment(4, 1.0, 1.0, 0.2, 0.8);
  RngStream r1(18, 0), r2(18, 0);
  const auto a = simulate_sep(g, make_config(0, 4), 5000.0, r1, {SiteSet{{1, 3}}});
  const auto b = simulate_sep(g, make_config(0, 4), 5000.0, r2, {SiteSet{{1, 3}}});
  CHECK(a[0].mean == b[0].mean);
  CHECK(a[0].stderr_of_mean == b[0].stderr_of_mean);
}

TEST_CASE("labelled coupling: forbidden starts and conservation") {
  RngStream rng(19, 0);
  CHECK_THROWS_AS(simulate_ninja(4, SiteSet{{1}}, 0, rng), parameter_error);
  CHECK_THROWS_AS(simulate_ninja(4, SiteSet{{3}}, 4, rng), parameter_error);
  CHECK_THROWS_AS(simulate_ninja(4, SiteSet{{2}}, 2, rng), parameter_error);

  for (int rep = 0; rep < 300; ++rep) {
    RngStream r(20, rep);
    const NinjaRun run = simulate_ninja(5, SiteSet{{1, 3}}, 4, r);
    for (int p : run.label_destination) CHECK((p == 0 || p == 5));
    CHECK((run.ninja_destination == 0 || run.ninja_destination == 5));
  }
}

TEST_CASE("labelled coupling forgets to the dual") {
  const int N = 4;
  const auto stats = estimate_ninja(N, SiteSet{{1}}, 3, 20000, RngStream(21, 0));
  const GraphSpec g = homogeneous_segment(N - 1, 1.0, 1.0, 0.2, 0.8);
  const auto exact = absorption_distribution(g, SiteSet{{1, 3}});
  CHECK(chi_square_goodness(stats.level_counts, exact.probs).p_value > 0.01);

  // projected labels evolve on the reduced segment
  const GraphSpec small = homogeneous_segment(N - 2, 1.0, 1.0, 0.2, 0.8);
  const auto exact_small =
      absorption_distribution(small, SiteSet{{ninja_projection(1, 3, N)}});
  CHECK(chi_square_goodness(stats.label_level_counts, exact_small.probs).p_value > 0.01);
  CHECK(stats.all_labels_right_frequency().covers(exact_small.probs.back()));
}

TEST_CASE("conditional return probability of the distinguished walker") {
  const int N = 4;
  const auto stats = estimate_ninja(N, SiteSet{{1}}, 3, 20000, RngStream(22, 0));
  CHECK(stats.conditional_ninja_left().covers(1.0 - (3.0 - 1.0) / N));
}

TEST_CASE("projection map") {
  CHECK(ninja_projection(2, 4, 5) == 2);
  CHECK(ninja_projection(4, 2, 5) == 3);
  CHECK(ninja_projection(5, 5, 5) == 4);
  CHECK(ninja_projection(5, 2, 5) == 4);
  CHECK(ninja_projection(0, 3, 5) == 0);
}

TEST_CASE("replica merging") {
  // identical replica outputs collapse the spread
  const auto constant = run_replicas([](RngStream&) { return 0.25; }, 2,
                                     RngStream(23, 0));
  CHECK(constant.mean == doctest::Approx(0.25));
  CHECK(constant.stderr_of_mean == 0.0);

  // merged mean equals the pooled mean of the raw samples
  std::vector<double> samples;
  {
    RngStream base(24, 0);
    for (long long i = 0; i < 1000; ++i) {
      RngStream rng = base.substream(i);
      samples.push_back(rng.next_uniform());
    }
  }
  const auto merged = run_replicas([](RngStream& rng) { return rng.next_uniform(); },
                                   1000, RngStream(24, 0));
  double pooled = 0.0;
  for (double v : samples) pooled += v;
  pooled /= samples.size();
  CHECK(std::abs(merged.mean - pooled) <= 1e-15 * std::abs(pooled));

  // stderr shrinks roughly like 1/sqrt(2) when replicas double
  const auto half = run_replicas([](RngStream& rng) { return rng.next_uniform(); },
                                 20000, RngStream(25, 0));
  const auto full = run_replicas([](RngStream& rng) { return rng.next_uniform(); },
                                 40000, RngStream(25, 1));
  const double ratio = full.stderr_of_mean / half.stderr_of_mean;
  CHECK(ratio > 0.7071 * 0.8);
  CHECK(ratio < 0.7071 * 1.2);
}

TEST_CASE("running statistics merge is grouping-insensitive") {
  RngStream rng(26, 0);
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back(rng.next_uniform());
  RunningStat whole;
  for (double v : xs) whole.add(v);
  RunningStat left, right;
  for (int i = 0; i < 400; ++i) left.add(xs[i]);
  for (int i = 400; i < 1000; ++i) right.add(xs[i]);
  left.merge(right);
  CHECK(std::abs(left.mean - whole.mean) < 1e-13);
  CHECK(std::abs(left.m2 - whole.m2) < 1e-10);
}

TEST_CASE("replica estimates are independent of the thread cap") {
  const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);
  setenv("SEPNESS_THREADS", "1", 1);
  const auto serial = estimate_dual_levels(g, SiteSet{{1, 3}}, 5000, RngStream(30, 0));
  const auto serial_mc = run_replicas([](RngStream& r) { return r.next_uniform(); },
                                      5000, RngStream(31, 0));
  setenv("SEPNESS_THREADS", "4", 1);
  const auto pooled = estimate_dual_levels(g, SiteSet{{1, 3}}, 5000, RngStream(30, 0));
  const auto pooled_mc = run_replicas([](RngStream& r) { return r.next_uniform(); },
                                      5000, RngStream(31, 0));
  unsetenv("SEPNESS_THREADS");
  CHECK(serial.level_counts == pooled.level_counts);
  CHECK(serial_mc.mean == pooled_mc.mean);
  CHECK(serial_mc.stderr_of_mean == pooled_mc.stderr_of_mean);
}

TEST_CASE("event logs carry the CSV header") {
  std::ostringstream os;
  EventLog log(os);
  const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);
  RngStream rng(27, 0);
  simulate_dual(g, SiteSet{{1, 2}}, rng, &log);
  CHECK(os.str().rfind("time,event_type,site_from,site_to\n", 0) == 0);
  CHECK(os.str().find("absorb") != std::string::npos);
}
