#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "sepness/lattice.hpp"
#include "sepness/rng.hpp"
#include "sepness/stats.hpp"

namespace sepness {

// Optional raw event stream, CSV "time,event_type,site_from,site_to".
class EventLog {
 public:
  explicit EventLog(std::ostream& os) : os_(&os) { *os_ << "time,event_type,site_from,site_to\n"; }
  void record(double t, const char* type, int from, int to);

 private:
  std::ostream* os_;
};

struct SepOptions {
  double burn_in = -1.0;  // negative: use t_max/5
  int batches = 16;
  EventLog* log = nullptr;
};

// Exact-event dynamics of the open process; returns the time-averaged
// occupation product for each observable over the post-burn-in window,
// with the standard error taken across equal-time batches.
std::vector<McEstimate> simulate_sep(const GraphSpec& g, const OccupancyConfig& initial,
                                     double t_max, RngStream& rng,
                                     const std::vector<SiteSet>& observables,
                                     const SepOptions& opts = {});

// Runs the absorbing dual until the bulk is empty.
DualState simulate_dual(const GraphSpec& g, const SiteSet& start, RngStream& rng,
                        EventLog* log = nullptr);

struct StirringOutcome {
  SiteSet start;
  std::vector<int> destination;  // parallel to start.sites; 0 or n_sites+1

  // Labels that ended on the right, as a bitmask over their start sites.
  std::uint64_t right_mask() const;
};

// Label-preserving swap dynamics: every edge carries a swap clock at its
// conductance, the two endpoint clocks absorb whatever occupies the boundary
// sites. Runs until every label is absorbed.
StirringOutcome simulate_stirring(const GraphSpec& g, RngStream& rng,
                                  EventLog* log = nullptr);
StirringOutcome simulate_stirring_from(const GraphSpec& g, const SiteSet& start,
                                       RngStream& rng, EventLog* log = nullptr);

struct NinjaRun {
  std::vector<int> label_destination;  // 0 or N per labelled particle
  int ninja_destination = 0;
  bool all_labels_right = false;
};

// Labelled coupling on the unit-conductance segment [N]_0 with one
// distinguished walker whose label is exchanged at interactions; the
// unlabelled configuration evolves exactly as the absorbing dual. Runs until
// the labels and then the distinguished walker are absorbed.
NinjaRun simulate_ninja(int N, const SiteSet& xs, int ninja_start, RngStream& rng,
                        EventLog* log = nullptr);

// Projection of a labelled position onto the size-(N-1) segment obtained by
// deleting the distinguished walker's site.
int ninja_projection(int x, int ninja, int N);

// Independent replicas on substreams of `base`, merged in replica order so
// the result does not depend on the thread count. Parallelism is capped by
// the SEPNESS_THREADS environment variable.
McEstimate run_replicas(const std::function<double(RngStream&)>& task,
                        long long n_replicas, const RngStream& base);

int replica_thread_cap();

// Count-based replica estimators used by the verification suites and the CLI.

struct DualLevelStats {
  long long n_runs = 0;
  std::vector<long long> level_counts;  // absorbed on the right: 0..|start|

  McEstimate frequency(int level) const;
};

DualLevelStats estimate_dual_levels(const GraphSpec& g, const SiteSet& start,
                                    long long n_replicas, const RngStream& base);

struct StirringStats {
  SiteSet start;
  long long n_runs = 0;
  std::vector<long long> pattern_counts;  // indexed by right-pattern bitmask over labels

  McEstimate pattern_frequency(std::uint64_t pattern) const;
  McEstimate marginal_right(int label_index) const;
};

StirringStats estimate_stirring_patterns(const GraphSpec& g, const SiteSet& start,
                                         long long n_replicas, const RngStream& base);

struct NinjaStats {
  long long n_runs = 0;
  std::vector<long long> level_counts;        // right-absorbed among labels + ninja
  std::vector<long long> label_level_counts;  // right-absorbed among labels only
  long long n_all_labels_right = 0;
  long long n_all_right_ninja_left = 0;

  McEstimate all_labels_right_frequency() const;
  // P(ninja ends left | all labels right), with its binomial standard error.
  McEstimate conditional_ninja_left() const;
};

NinjaStats estimate_ninja(int N, const SiteSet& xs, int ninja_start,
                          long long n_replicas, const RngStream& base);

}  // namespace sepness
