#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sepness/lattice.hpp"

namespace sepness {

// Conservative CTMC generator in sparse form. Off-diagonal entries are the
// transition rates; the diagonal is implied as minus the row sum.
struct RateMatrix {
  int dimension = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;

  explicit RateMatrix(int dim = 0) : dimension(dim), rows(dim) {}
  void add(int row, int col, double rate);
  double out_rate(int row) const;
};

struct StationaryDistribution {
  GraphSpec graph;
  std::vector<double> probs;  // indexed by configuration bitmask

  std::string to_json() const;
  std::string to_csv() const;  // header "config_bits,probability"
};

// Distribution of the number of dual particles finally absorbed at the right
// endpoint, for a given starting site set.
struct AbsorptionTable {
  SiteSet start;
  std::vector<double> probs;  // probs[l] = P(l particles end at the right), l = 0..|start|

  std::string to_json() const;
};

// Generator of the occupation process over all 2^n_sites configurations.
// Row/column indices are configuration bitmasks.
RateMatrix build_sep_generator(const GraphSpec& g);

// Unique probability vector pi with pi Q = 0, by replacing one balance
// equation with the normalization and solving with LU (dense under 4096,
// sparse above). Throws numerical_error if the residual exceeds 1e-9.
std::vector<double> stationary_distribution(const RateMatrix& q);
StationaryDistribution stationary_distribution(const GraphSpec& g);

// Exact absorption solves on the dual (absorbing) chain.
AbsorptionTable absorption_distribution(const GraphSpec& g, const SiteSet& start);
double all_absorbed_at_right(const GraphSpec& g, const SiteSet& start);

// P(all particles absorbed on the right) for every start mask with at most
// max_count particles, in one layered pass. Entries for heavier masks are
// left at zero.
std::vector<double> all_absorbed_at_right_table(const GraphSpec& g, int max_count);

// All dual moves out of one state: bulk hops plus the two absorptions.
std::vector<std::pair<DualState, double>> dual_transitions(const GraphSpec& g,
                                                           const DualState& s);

// Max over (eta, xi) of |(L D(.,xi))(eta) - (Lhat D(eta,.))(xi)| where D is
// the duality function rho_L^{xi(0)} prod_{x in xi} eta(x) rho_R^{xi(N)}.
// Dual configurations range over all bulk masks with at most
// max_dual_particles particles and absorbed counts in {0,1}^2.
double check_generator_duality(const GraphSpec& g, int max_dual_particles);

// One-step mean identity for the three discrete-time processes attached to
// the two-particle jump chain on the segment [N]_0 (unit bulk conductances,
// boundary conductances omega_l / omega_r): h(X)+h(Y), h(Y)-h(X)-D_n and
// h(X)h(Y)+D_n/2. Returns the largest violation over all states.
double check_two_particle_martingales(int N, double omega_l, double omega_r);

}  // namespace sepness
