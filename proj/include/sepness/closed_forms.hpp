#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sepness/exact.hpp"
#include "sepness/lattice.hpp"

namespace sepness {

// Harmonic function of the segment walk with boundary conductances:
// h(0) = 0, h(x) = 1/omega_l + x - 1 for bulk x, h(N) = 1/omega_l + 1/omega_r + N - 2.
// A single particle started at x is absorbed on the right with probability
// h(x)/h(N).
double harmonic_h(int N, double omega_l, double omega_r, int x);

// Probability that all particles started at xs (strictly increasing, inside
// 1..N-1) are absorbed at the right endpoint of the homogeneous segment:
//   prod_i (h(x_i) - (i-1)) / (h(N) - (i-1)).
double absorption_product(int N, double omega_l, double omega_r, const SiteSet& xs);

// Full level probability P(exactly `level` particles end on the right) by the
// alternating sum over subsets of xs of the product formula.
double absorption_level(int N, double omega_l, double omega_r, const SiteSet& xs,
                        int level);

// Weights of the product-Bernoulli mixture representing the steady state:
// F(I) = sum_{J >= I} (-1)^{|J\I|} P_J(all absorbed right), indexed by subset
// bitmask.
struct MixtureWeights {
  int n_sites = 0;
  std::vector<double> weights;

  double weight(const SiteSet& I) const;
  double total() const;
  std::string to_json() const;  // {"n_sites","weights":[{"sites":[...],"F":v},...]}
  std::string to_csv() const;   // header "sites;F"
};

using AllAtRightOracle = std::function<double(const SiteSet&)>;

// Single weight through an explicit oracle (2^{n-|I|} oracle calls).
double mixture_weight(const GraphSpec& g, const SiteSet& I,
                      const AllAtRightOracle& oracle);

// All weights at once: one oracle evaluation per subset followed by a signed
// superset transform. Homogeneous segments use the closed-form oracle (in
// exact rational arithmetic when N <= 12); general graphs use the absorbing
// solves.
MixtureWeights mixture_weights(const GraphSpec& g);

// Steady state assembled as the F-weighted mixture of product Bernoulli
// measures. Evaluates every configuration twice (direct sum over components,
// and the regrouping by class counts) and requires the two routes to agree
// within 1e-12.
StationaryDistribution mixture_measure(const GraphSpec& g);

// Expected occupation of site x in the steady state.
double density_profile(const GraphSpec& g, int x);

// Centered pair correlation Cov(eta(x), eta(y)), x < y, on the homogeneous
// segment: -(rho_r-rho_l)^2 h(x)(h(N)-h(y)) / (h(N)^2 (h(N)-1)).
double two_point_correlation(int N, double omega_l, double omega_r, double rho_l,
                             double rho_r, int x, int y);

struct CorrelationRequest {
  SiteSet points;
  bool centered = false;
};

// n-point correlations on the homogeneous segment. Centered uses
// (rho_r-rho_l)^n times the signed sum over ordered subsequences; non-centered
// the corresponding binomial expansion in (rho_r - rho_l).
double n_point_correlation(int N, double omega_l, double omega_r, double rho_l,
                           double rho_r, const SiteSet& points, bool centered);

// General-graph route: moments through the dual absorption distribution.
double n_point_correlation(const GraphSpec& g, const SiteSet& points, bool centered);

// Both sides of the one-step size reduction for right-absorption
// probabilities on the unit segment: with xs = {x_1 < ... < x_{k+1}},
//   P^{[N]}_{xs}(all right) = ((x_{k+1}-k)/N) * P^{[N-1]}_{xs \ {x_{k+1}}}(all right),
// each side from an independent absorbing solve.
struct NinjaRecursionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

NinjaRecursionCheck ninja_recursion_residual(int N, const SiteSet& xs);

}  // namespace sepness
