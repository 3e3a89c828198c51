#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>

#include "sepness/closed_forms.hpp"
#include "sepness/exact.hpp"
#include "sepness/verify.hpp"

using namespace sepness;

namespace {

double rate_between(const RateMatrix& q, int from, int to) {
  for (auto [c, r] : q.rows[from])
    if (c == to) return r;
  return 0.0;
}

}  // namespace

TEST_CASE("single-site generator rates") {
  const GraphSpec g = homogeneous_segment(1, 1.0, 1.0, 0.2, 0.8);
  const RateMatrix q = build_sep_generator(g);
  REQUIRE(q.dimension == 2);
  CHECK(rate_between(q, 0, 1) == doctest::Approx(0.2 + 0.8).epsilon(1e-14));
  CHECK(rate_between(q, 1, 0) == doctest::Approx(0.8 + 0.2).epsilon(1e-14));
}

TEST_CASE("bulk hop appears with its conductance") {
  const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);
  const RateMatrix q = build_sep_generator(g);
  // (1,0) -> (0,1): mask 01 -> mask 10
  CHECK(rate_between(q, 0b01, 0b10) == doctest::Approx(1.0));
  CHECK(rate_between(q, 0b10, 0b01) == doctest::Approx(1.0));
}

TEST_CASE("stationary distribution of the two-state chain") {
  const GraphSpec g = homogeneous_segment(1, 1.0, 1.0, 0.2, 0.8);
  const auto pi = stationary_distribution(g).probs;
  REQUIRE(pi.size() == 2);
  CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("equal densities give a product Bernoulli state") {
  for (double rho : {0.3, 0.5, 0.72}) {
    GraphSpec graphs[2] = {homogeneous_segment(4, 2.0, 0.5, rho, rho),
                           battery_tree5()};
    graphs[1].rho_left = graphs[1].rho_right = rho;
    for (const GraphSpec& g : graphs) {
      const auto pi = stationary_distribution(g).probs;
      for (std::uint64_t m = 0; m < pi.size(); ++m) {
        const int k = std::popcount(m);
        const double expected =
            std::pow(rho, k) * std::pow(1.0 - rho, g.n_sites - k);
        CHECK(std::abs(pi[m] - expected) < 1e-10);
      }
    }
  }
}

TEST_CASE("stationary vector sums to one") {
  const GraphSpec g = battery_cycle_chord5();
  const auto pi = stationary_distribution(g).probs;
  double sum = 0.0;
  for (double p : pi) sum += p;
  CHECK(std::abs(sum - 1.0) < 1e-10);
}

TEST_CASE("single-particle absorption matches x/N") {
  const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);  // N = 4
  const auto table = absorption_distribution(g, SiteSet{{2}});
  REQUIRE(table.probs.size() == 2);
  CHECK(table.probs[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(all_absorbed_at_right(g, SiteSet{{3}}) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("two-particle level distribution on the smallest segment") {
  const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);  // N = 3
  const auto table = absorption_distribution(g, SiteSet{{1, 2}});
  REQUIRE(table.probs.size() == 3);
  CHECK(table.probs[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(table.probs[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(table.probs[2] == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("absorption distributions are normalized over a battery") {
  for (const GraphSpec& g :
       {homogeneous_segment(4, 0.5, 3.0, 0.2, 0.8), battery_tree5(),
        battery_cycle_chord5()}) {
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << g.n_sites); ++m) {
      if (std::popcount(m) > 3) continue;
      const auto table = absorption_distribution(g, SiteSet::from_mask(m));
      double sum = 0.0;
      for (double p : table.probs) {
        CHECK(p >= -1e-12);
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("dedicated all-right solve equals the top of the level table") {
  for (const GraphSpec& g :
       {homogeneous_segment(4, 2.0, 0.5, 0.2, 0.8), battery_tree5()}) {
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << g.n_sites); ++m) {
      if (std::popcount(m) > 3) continue;
      const SiteSet xs = SiteSet::from_mask(m);
      const auto table = absorption_distribution(g, xs);
      CHECK(std::abs(all_absorbed_at_right(g, xs) - table.probs[xs.size()]) < 1e-12);
    }
  }
}

TEST_CASE("three particles all collected on the right") {
  const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);  // N = 4
  CHECK(all_absorbed_at_right(g, SiteSet{{1, 2, 3}}) ==
        doctest::Approx(1.0 / 24).epsilon(1e-12));
  CHECK(all_absorbed_at_right(g, SiteSet{}) == 1.0);
}

TEST_CASE("conjugate-gradient layers agree with the product formula") {
  // C(20,4) = 4845 exceeds the dense cap, so the top layer runs through CG.
  const GraphSpec g = homogeneous_segment(20, 1.0, 1.0, 0.2, 0.8);  // N = 21
  const SiteSet xs{{4, 9, 15, 19}};
  const double solved = all_absorbed_at_right(g, xs);
  const double formula = absorption_product(21, 1.0, 1.0, xs);
  CHECK(std::abs(solved - formula) < 1e-10);

  // same path with the full level table (multiple right-hand sides)
  const GraphSpec h = homogeneous_segment(20, 0.5, 3.0, 0.2, 0.8);
  const auto table = absorption_distribution(h, xs);
  double sum = 0.0;
  for (int l = 0; l <= 4; ++l) {
    sum += table.probs[l];
    CHECK(std::abs(table.probs[l] - absorption_level(21, 0.5, 3.0, xs, l)) < 1e-10);
  }
  CHECK(std::abs(sum - 1.0) < 1e-10);
}

TEST_CASE("generator-level duality holds to machine precision") {
  CHECK(check_generator_duality(homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8), 2) < 1e-12);

  GraphSpec het;
  het.n_sites = 3;
  het.edges = {{1, 2, 2.0}, {2, 3, 0.5}};
  het.rho_left = 0.2;
  het.rho_right = 0.8;
  CHECK(check_generator_duality(het, 2) < 1e-12);
  CHECK(check_generator_duality(battery_tree5(), 2) < 1e-12);
}

TEST_CASE("dual moves conserve the particle number") {
  const GraphSpec g = battery_cycle_chord5();
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << g.n_sites); ++m) {
    DualState s{m, g.n_sites, 1, 2};
    for (const auto& [t, rate] : dual_transitions(g, s)) {
      CHECK(rate > 0.0);
      CHECK(t.total_particles() == s.total_particles());
    }
  }
}

TEST_CASE("two-particle compensated processes pass the one-step check") {
  CHECK(check_two_particle_martingales(5, 1.0, 1.0) < 1e-12);
  CHECK(check_two_particle_martingales(4, 3.0, 0.5) < 1e-12);
  CHECK(check_two_particle_martingales(3, 1.0, 1.0) < 1e-12);
  CHECK(check_two_particle_martingales(3, 0.5, 3.0) < 1e-12);
  CHECK_THROWS_AS(check_two_particle_martingales(2, 1.0, 1.0), parameter_error);
}

TEST_CASE("reversal maps right-absorption levels to left ones") {
  for (const GraphSpec& g :
       {homogeneous_segment(4, 2.0, 0.5, 0.2, 0.8), battery_tree5()}) {
    const GraphSpec r = reversed(g);
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << g.n_sites); ++m) {
      if (std::popcount(m) > 3) continue;
      const SiteSet xs = SiteSet::from_mask(m);
      std::vector<int> mirrored;
      for (auto it = xs.sites.rbegin(); it != xs.sites.rend(); ++it)
        mirrored.push_back(g.n_sites + 1 - *it);
      const auto fwd = absorption_distribution(g, xs);
      const auto bwd = absorption_distribution(r, SiteSet{mirrored});
      const int k = xs.size();
      for (int l = 0; l <= k; ++l)
        CHECK(std::abs(fwd.probs[l] - bwd.probs[k - l]) < 1e-12);
    }
  }
}

TEST_CASE("capacity caps are enforced") {
  CHECK_THROWS_AS(build_sep_generator(homogeneous_segment(21, 1.0, 1.0, 0.2, 0.8)),
                  capacity_error);
  CHECK_THROWS_AS(check_generator_duality(homogeneous_segment(11, 1, 1, 0.2, 0.8), 2),
                  capacity_error);
}

TEST_CASE("serialization surfaces") {
  const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);
  const auto dist = stationary_distribution(g);
  CHECK(dist.to_csv().rfind("config_bits,probability\n", 0) == 0);
  CHECK(dist.to_json().find("graph_hash") != std::string::npos);
  const auto table = absorption_distribution(g, SiteSet{{1, 2}});
  CHECK(table.to_json().find("probs") != std::string::npos);
}
