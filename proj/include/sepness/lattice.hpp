#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sepness/errors.hpp"

namespace sepness {

// Hard caps. Simulation state fits one 64-bit word; exact engines enumerate
// up to 2^n configurations and are gated much lower.
inline constexpr int kMaxSimSites = 63;
inline constexpr int kMaxEnumSites = 20;

struct Edge {
  int x = 0;
  int y = 0;
  double weight = 1.0;
};

// Weighted connected graph on bulk sites {1..n_sites} plus the two reservoir
// couplings. Site 0 (left) and site n_sites+1 (right) are virtual: the left
// reservoir acts on site 1 with conductance omega_left and density rho_left,
// the right reservoir acts on site n_sites with omega_right / rho_right.
struct GraphSpec {
  int n_sites = 0;
  std::vector<Edge> edges;
  double omega_left = 1.0;
  double omega_right = 1.0;
  double rho_left = 0.5;
  double rho_right = 0.5;

  int left_site() const { return 1; }
  int right_site() const { return n_sites; }
  // Index of the right absorbing site in the extended graph ("N").
  int extended_size() const { return n_sites + 1; }
};

// One exclusion configuration on {1..n_sites}; bit x-1 holds the occupation
// of site x.
struct OccupancyConfig {
  std::uint64_t bits = 0;
  int n_sites = 0;

  bool occupied(int site) const { return (bits >> (site - 1)) & 1u; }
  int count() const;
};

OccupancyConfig make_config(std::uint64_t bits, int n_sites);

// Dual configuration: exclusion occupancies in the bulk plus absorbed counts
// at the two virtual endpoints. Total particle number is conserved by the
// dual dynamics.
struct DualState {
  std::uint64_t bulk = 0;
  int n_sites = 0;
  int absorbed_0 = 0;
  int absorbed_N = 0;

  int bulk_count() const;
  int total_particles() const { return bulk_count() + absorbed_0 + absorbed_N; }
};

// Strictly increasing set of bulk sites. Doubles as an ordered tuple
// x_1 < ... < x_n where the formulas need one.
struct SiteSet {
  std::vector<int> sites;

  SiteSet() = default;
  explicit SiteSet(std::vector<int> s);

  int size() const { return static_cast<int>(sites.size()); }
  bool empty() const { return sites.empty(); }
  bool contains(int site) const;
  std::uint64_t mask() const;
  static SiteSet from_mask(std::uint64_t mask);

  bool operator==(const SiteSet&) const = default;
};

std::string to_string(const SiteSet& s);

struct AbgdParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double delta = 1.0;
};

// Nearest-neighbor segment with unit bulk conductances.
GraphSpec homogeneous_segment(int n_sites, double omega_left, double omega_right,
                              double rho_left, double rho_right);

// Boundary-rate parametrization: creation alpha/delta, annihilation
// gamma/beta map to rho_left = alpha/(alpha+gamma), omega_left = 1/(alpha+gamma)
// and rho_right = delta/(delta+beta), omega_right = 1/(delta+beta).
GraphSpec from_abgd(int n_sites, const AbgdParams& p);
AbgdParams to_abgd(const GraphSpec& g);

// All 2^|sites| subsets, exactly once, in lexicographic bitmask order: subset
// t in 0..2^k-1 picks sites[i] for every set bit i of t.
std::vector<SiteSet> subsets_of(const SiteSet& sites);

// Empty result means the graph is usable by every engine; otherwise a list of
// human-readable violations (disconnected bulk, non-positive conductance,
// out-of-range density, duplicate edge, ...).
std::vector<std::string> validate(const GraphSpec& g);

// Throws parameter_error listing the diagnostics if validate() is non-empty.
void require_valid(const GraphSpec& g);

// JSON document with fields exactly
//   {"n_sites", "edges": [[x,y,w],...], "omega_left", "omega_right",
//    "rho_left", "rho_right"}.
std::string graph_to_json(const GraphSpec& g);
GraphSpec graph_from_json(const std::string& text);

// FNV-1a over the canonical JSON form; stable content identity for reports.
std::string graph_hash(const GraphSpec& g);

// Relabels x -> n_sites+1-x and swaps the reservoir parameters.
GraphSpec reversed(const GraphSpec& g);

// Bulk adjacency (neighbor site, conductance) built once from the edge list.
std::vector<std::vector<std::pair<int, double>>> adjacency(const GraphSpec& g);

bool is_homogeneous_segment(const GraphSpec& g);

}  // namespace sepness
