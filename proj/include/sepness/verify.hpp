#pragma once

#include <string>
#include <vector>

#include "sepness/lattice.hpp"
#include "sepness/rng.hpp"

namespace sepness {

// One verification check: `measured` must stay within `tolerance` (for
// p-value style checks the roles flip and `pass` carries the verdict).
struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool all_pass() const;
};

// Reference non-segment graphs on five bulk sites used across the batteries.
GraphSpec battery_tree5();
GraphSpec battery_cycle_chord5();

// Mixture representation of the steady state: segments N = 3..6 plus the two
// five-site graphs; weights sum to one, stay positive, and reassemble the
// exact stationary distribution.
SuiteReport verify_mixture(double tol_entry = 1e-9);

// Product formula and level distributions against the absorbing solves,
// exhaustively for N <= max_n, |xs| <= 4, boundary conductances in
// {0.5, 1, 3}^2; plus correlation formulas against exact stationary moments.
SuiteReport verify_formulas(int max_n = 8, double tol_product = 1e-12,
                            double tol_level = 1e-10, double tol_corr = 1e-9);

// Generator-level duality residual over a battery of graphs with up to two
// dual particles.
SuiteReport verify_duality(double tol = 1e-12);

// One-step mean identities of the three compensated processes on the
// two-particle jump chain, N = 3..max_n, conductance grid {0.5, 1, 3}^2.
SuiteReport verify_martingales(int max_n = 6, double tol = 1e-12);

// Size-reduction recursion for right-absorption probabilities, exhaustive in
// the start set for N <= max_n.
SuiteReport verify_ninja(int max_n = 7, double tol = 1e-12);

// Monte Carlo consistency: dual absorption frequencies, stirring pattern
// frequencies and the conditional return probability of the distinguished
// walker against their closed forms (4 sigma), plus chi-square tests of the
// label-forgetting identities at the 1% level.
SuiteReport verify_monte_carlo(std::uint64_t seed, std::uint64_t stream,
                               long long n_replicas = 100000);

}  // namespace sepness
