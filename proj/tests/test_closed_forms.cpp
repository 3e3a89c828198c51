#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>

#include "json.hpp"
#include "sepness/closed_forms.hpp"
#include "sepness/exact.hpp"
#include "sepness/verify.hpp"

using namespace sepness;

TEST_CASE("harmonic values") {
  for (int x = 0; x <= 4; ++x)
    CHECK(harmonic_h(4, 1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-14));
  CHECK(harmonic_h(3, 2.0, 1.0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(harmonic_h(3, 2.0, 4.0, 3) == doctest::Approx(1.75).epsilon(1e-14));
  CHECK_THROWS_AS(harmonic_h(3, 1.0, 1.0, 5), parameter_error);
}

TEST_CASE("product formula examples") {
  CHECK(absorption_product(4, 1.0, 1.0, SiteSet{{1, 2, 3}}) ==
        doctest::Approx(1.0 / 24).epsilon(1e-14));
  CHECK(absorption_product(4, 1.0, 1.0, SiteSet{{3}}) ==
        doctest::Approx(0.75).epsilon(1e-14));
  CHECK(absorption_product(4, 1.0, 1.0, SiteSet{}) == 1.0);
}

TEST_CASE("product formula is strictly monotone in each site") {
  const int N = 7;
  for (double wl : {0.5, 1.0, 3.0}) {
    for (double wr : {0.5, 1.0, 3.0}) {
      const SiteSet base{{2, 4}};
      const double mid = absorption_product(N, wl, wr, base);
      CHECK(absorption_product(N, wl, wr, SiteSet{{3, 4}}) > mid);
      CHECK(absorption_product(N, wl, wr, SiteSet{{2, 5}}) > mid);
      CHECK(absorption_product(N, wl, wr, SiteSet{{1, 4}}) < mid);
    }
  }
}

TEST_CASE("level distribution examples") {
  CHECK(absorption_level(3, 1.0, 1.0, SiteSet{{1, 2}}, 1) ==
        doctest::Approx(2.0 / 3).epsilon(1e-14));
  const SiteSet xs{{1, 3, 4}};
  CHECK(absorption_level(5, 1.0, 1.0, xs, 3) ==
        doctest::Approx(absorption_product(5, 1.0, 1.0, xs)).epsilon(1e-14));
  double sum = 0.0;
  for (int l = 0; l <= 3; ++l) sum += absorption_level(5, 1.0, 1.0, xs, l);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(absorption_level(5, 1.0, 1.0, xs, 4), parameter_error);
}

TEST_CASE("mixture weights on one bulk site") {
  const GraphSpec g = homogeneous_segment(1, 1.0, 1.0, 0.2, 0.8);
  const MixtureWeights w = mixture_weights(g);
  CHECK(w.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(w.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("mixture weights sum to one and stay positive") {
  for (int n : {2, 3, 4, 5}) {
    const GraphSpec g = homogeneous_segment(n, 1.0, 1.0, 0.2, 0.8);
    const MixtureWeights w = mixture_weights(g);
    CHECK(std::abs(w.total() - 1.0) < 1e-10);
    for (double f : w.weights) CHECK(f > 0.0);
  }
}

TEST_CASE("single weight through an explicit oracle") {
  const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);
  const MixtureWeights all = mixture_weights(g);
  const auto oracle = [&](const SiteSet& s) {
    return absorption_product(4, 1.0, 1.0, s);
  };
  for (std::uint64_t m = 0; m < all.weights.size(); ++m) {
    const double f = mixture_weight(g, SiteSet::from_mask(m), oracle);
    CHECK(std::abs(f - all.weights[m]) < 1e-13);
  }
}

TEST_CASE("mixture measure reduces to product form at equal densities") {
  GraphSpec g = battery_tree5();
  g.rho_left = g.rho_right = 0.37;
  const auto mu = mixture_measure(g).probs;
  for (std::uint64_t m = 0; m < mu.size(); ++m) {
    const int k = std::popcount(m);
    CHECK(std::abs(mu[m] - std::pow(0.37, k) * std::pow(0.63, g.n_sites - k)) < 1e-12);
  }
}

TEST_CASE("mixture measure equals the stationary solve") {
  const GraphSpec small = homogeneous_segment(1, 1.0, 1.0, 0.2, 0.8);
  CHECK(mixture_measure(small).probs[1] == doctest::Approx(0.5).epsilon(1e-13));

  for (const GraphSpec& g :
       {homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8),
        homogeneous_segment(6, 0.5, 3.0, 0.2, 0.8), battery_cycle_chord5()}) {
    const auto mu = mixture_measure(g).probs;
    const auto pi = stationary_distribution(g).probs;
    for (std::size_t i = 0; i < mu.size(); ++i) CHECK(std::abs(mu[i] - pi[i]) < 1e-9);
  }
}

TEST_CASE("density profile") {
  GraphSpec eq = homogeneous_segment(4, 1.0, 1.0, 0.4, 0.4);
  for (int x = 1; x <= 4; ++x)
    CHECK(density_profile(eq, x) == doctest::Approx(0.4).epsilon(1e-13));

  const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);  // N = 4
  CHECK(density_profile(g, 1) == doctest::Approx(0.35).epsilon(1e-13));
  CHECK(density_profile(g, 2) == doctest::Approx(0.50).epsilon(1e-13));
  CHECK(density_profile(g, 3) == doctest::Approx(0.65).epsilon(1e-13));

  // General graphs route through the absorbing solve.
  const GraphSpec tree = battery_tree5();
  const auto pi = stationary_distribution(tree).probs;
  for (int x = 1; x <= tree.n_sites; ++x) {
    double moment = 0.0;
    for (std::uint64_t eta = 0; eta < pi.size(); ++eta)
      if ((eta >> (x - 1)) & 1u) moment += pi[eta];
    CHECK(std::abs(density_profile(tree, x) - moment) < 1e-9);
  }
}

TEST_CASE("pair correlation examples") {
  CHECK(two_point_correlation(5, 1.0, 1.0, 0.4, 0.4, 1, 3) == 0.0);
  CHECK(two_point_correlation(3, 1.0, 1.0, 0.2, 0.8, 1, 2) ==
        doctest::Approx(-0.02).epsilon(1e-13));
  CHECK_THROWS_AS(two_point_correlation(4, 1.0, 1.0, 0.2, 0.8, 2, 2), parameter_error);

  for (int N : {4, 5, 6}) {
    for (double wl : {0.5, 1.0, 3.0}) {
      for (double wr : {0.5, 1.0, 3.0}) {
        for (int x = 1; x < N - 1; ++x)
          for (int y = x + 1; y <= N - 1; ++y)
            CHECK(two_point_correlation(N, wl, wr, 0.2, 0.8, x, y) < 0.0);
      }
    }
  }
}

TEST_CASE("pair correlation equals the mixture pair moment") {
  const int N = 5;
  const GraphSpec g = homogeneous_segment(N - 1, 2.0, 0.5, 0.2, 0.8);
  const auto mu = mixture_measure(g).probs;
  for (int x = 1; x < N - 1; ++x) {
    for (int y = x + 1; y <= N - 1; ++y) {
      double pair = 0.0, mx = 0.0, my = 0.0;
      for (std::uint64_t eta = 0; eta < mu.size(); ++eta) {
        const bool bx = (eta >> (x - 1)) & 1u;
        const bool by = (eta >> (y - 1)) & 1u;
        pair += mu[eta] * (bx && by);
        mx += mu[eta] * bx;
        my += mu[eta] * by;
      }
      const double cov = pair - mx * my;
      CHECK(std::abs(two_point_correlation(N, 2.0, 0.5, 0.2, 0.8, x, y) - cov) < 1e-10);
    }
  }
}

TEST_CASE("n-point correlations") {
  // one point, non-centered: the density profile
  const GraphSpec g4 = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);
  for (int x = 1; x <= 3; ++x)
    CHECK(n_point_correlation(4, 1.0, 1.0, 0.2, 0.8, SiteSet{{x}}, false) ==
          doctest::Approx(density_profile(g4, x)).epsilon(1e-13));

  // two points centered: the pair formula, as an identity
  for (int N : {4, 5, 6}) {
    for (double wl : {0.5, 1.0, 3.0}) {
      for (int x = 1; x < N - 1; ++x)
        for (int y = x + 1; y <= N - 1; ++y)
          CHECK(std::abs(n_point_correlation(N, wl, 1.0, 0.2, 0.8, SiteSet{{x, y}}, true) -
                         two_point_correlation(N, wl, 1.0, 0.2, 0.8, x, y)) < 1e-12);
    }
  }

  // three points, non-centered: against the dual absorption route
  const SiteSet pts{{1, 2, 3}};
  const auto table = absorption_distribution(g4, pts);
  double via_levels = 0.0;
  for (int l = 0; l <= 3; ++l)
    via_levels += std::pow(0.8, l) * std::pow(0.2, 3 - l) * table.probs[l];
  CHECK(std::abs(n_point_correlation(4, 1.0, 1.0, 0.2, 0.8, pts, false) - via_levels) <
        1e-10);
}

TEST_CASE("general-graph correlations match stationary moments") {
  const GraphSpec g = battery_tree5();
  const auto pi = stationary_distribution(g).probs;
  for (std::uint64_t m = 1; m < (std::uint64_t{1} << g.n_sites); ++m) {
    if (std::popcount(m) > 3) continue;
    const SiteSet pts = SiteSet::from_mask(m);
    double moment = 0.0;
    for (std::uint64_t eta = 0; eta < pi.size(); ++eta)
      if ((eta & m) == m) moment += pi[eta];
    CHECK(std::abs(n_point_correlation(g, pts, false) - moment) < 1e-9);

    std::vector<double> means;
    for (int x : pts.sites) {
      double v = 0.0;
      for (std::uint64_t eta = 0; eta < pi.size(); ++eta)
        if ((eta >> (x - 1)) & 1u) v += pi[eta];
      means.push_back(v);
    }
    double centered = 0.0;
    for (std::uint64_t eta = 0; eta < pi.size(); ++eta) {
      double term = pi[eta];
      for (std::size_t i = 0; i < pts.sites.size(); ++i)
        term *= (((eta >> (pts.sites[i] - 1)) & 1u) ? 1.0 : 0.0) - means[i];
      centered += term;
    }
    CHECK(std::abs(n_point_correlation(g, pts, true) - centered) < 1e-9);
  }
}

TEST_CASE("mixture representation holds on random connected graphs") {
  RngStream rng(4242, 0);
  for (int trial = 0; trial < 12; ++trial) {
    GraphSpec g;
    g.n_sites = 3 + static_cast<int>(rng.next_below(3));  // 3..5 bulk sites
    // random spanning tree, then a few extra edges
    for (int v = 2; v <= g.n_sites; ++v) {
      const int parent = 1 + static_cast<int>(rng.next_below(v - 1));
      g.edges.push_back({parent, v, 0.2 + 2.5 * rng.next_uniform()});
    }
    for (int x = 1; x <= g.n_sites; ++x)
      for (int y = x + 1; y <= g.n_sites; ++y) {
        bool present = false;
        for (const Edge& e : g.edges)
          if (std::min(e.x, e.y) == x && std::max(e.x, e.y) == y) present = true;
        if (!present && rng.next_uniform() < 0.25)
          g.edges.push_back({x, y, 0.2 + 2.5 * rng.next_uniform()});
      }
    g.omega_left = 0.3 + 2.0 * rng.next_uniform();
    g.omega_right = 0.3 + 2.0 * rng.next_uniform();
    g.rho_left = 0.05 + 0.9 * rng.next_uniform();
    g.rho_right = 0.05 + 0.9 * rng.next_uniform();
    REQUIRE(validate(g).empty());

    const MixtureWeights w = mixture_weights(g);
    CHECK(std::abs(w.total() - 1.0) < 1e-10);
    for (double f : w.weights) CHECK(f > 0.0);

    const auto mu = mixture_measure(g).probs;
    const auto pi = stationary_distribution(g).probs;
    for (std::size_t i = 0; i < mu.size(); ++i) CHECK(std::abs(mu[i] - pi[i]) < 1e-9);
  }
}

TEST_CASE("inclusion-exclusion levels hold beyond the segment") {
  // The signed subset sum that rebuilds level probabilities from all-right
  // probabilities never uses the geometry; probe it on the weighted tree.
  const GraphSpec g = battery_tree5();
  const auto allr = all_absorbed_at_right_table(g, g.n_sites);
  for (std::uint64_t m = 1; m < (std::uint64_t{1} << g.n_sites); ++m) {
    const SiteSet xs = SiteSet::from_mask(m);
    const int n = xs.size();
    const auto exact = absorption_distribution(g, xs);
    for (int level = 0; level <= n; ++level) {
      double total = 0.0;
      std::uint64_t sub = m;
      while (true) {  // all subsets of m
        const int k = std::popcount(sub);
        if (k >= level) {
          double binom = 1.0;
          for (int i = 0; i < level; ++i) binom = binom * (k - i) / (i + 1);
          total += ((k - level) % 2 == 0 ? 1.0 : -1.0) * binom * allr[sub];
        }
        if (sub == 0) break;
        sub = (sub - 1) & m;
      }
      CHECK(std::abs(total - exact.probs[level]) < 1e-10);
    }
  }
}

TEST_CASE("size-reduction recursion") {
  const auto check = ninja_recursion_residual(4, SiteSet{{1, 3}});
  CHECK(check.lhs == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(check.rhs == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(check.residual < 1e-13);

  for (int x = 1; x <= 4; ++x) {
    const auto base = ninja_recursion_residual(5, SiteSet{{x}});
    CHECK(base.lhs == doctest::Approx(x / 5.0).epsilon(1e-12));
    CHECK(base.residual < 1e-13);
  }

  CHECK(ninja_recursion_residual(6, SiteSet{{2, 3, 5}}).residual < 1e-12);
}

TEST_CASE("weight serialization") {
  const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);
  const MixtureWeights w = mixture_weights(g);
  const auto j = nlohmann::json::parse(w.to_json());
  CHECK(j["n_sites"] == 2);
  REQUIRE(j["weights"].size() == 4);
  CHECK(j["weights"][3]["sites"].size() == 2);
  CHECK(j["weights"][3].contains("F"));
  const std::string csv = w.to_csv();
  CHECK(csv.rfind("sites;F\n", 0) == 0);
  CHECK(csv.find("1,2;") != std::string::npos);
}
