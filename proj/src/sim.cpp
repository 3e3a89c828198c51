#include "sepness/sim.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "sepness/errors.hpp"

namespace sepness {

namespace {

constexpr long long kEventCap = 1'000'000'000LL;

McEstimate binomial_estimate(long long hits, long long n) {
  McEstimate e;
  e.n_samples = n;
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  e.mean = p;
  e.stderr_of_mean = std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
  e.half_width_99 = 2.5758293035489004 * e.stderr_of_mean;
  return e;
}

// Event table shared by the open and the dual dynamics. Rates are refreshed
// only for events touching the flipped sites; the running total is re-summed
// periodically to bound drift.
struct EventTable {
  struct Event {
    int from, to;          // virtual sites 0 and n+1 stand for the reservoirs
    double base_rate;      // conductance (or omega)
    bool boundary_flip;    // open-process reservoir event
  };

  const GraphSpec* g = nullptr;
  std::vector<Event> events;
  std::vector<std::vector<int>> by_site;  // bulk site -> events to refresh
  std::vector<double> rates;
  double total = 0.0;
  long long since_resum = 0;

  void build(const GraphSpec& graph, bool open_process) {
    g = &graph;
    const int n = graph.n_sites;
    by_site.assign(n + 1, {});
    for (const Edge& e : graph.edges) {
      add_event({e.x, e.y, e.weight, false});
      add_event({e.y, e.x, e.weight, false});
    }
    if (open_process) {
      add_event({0, 1, graph.omega_left, true});
      add_event({n + 1, n, graph.omega_right, true});
    } else {
      add_event({1, 0, graph.omega_left, false});
      add_event({n, n + 1, graph.omega_right, false});
    }
    rates.assign(events.size(), 0.0);
  }

  void add_event(Event e) {
    const int idx = static_cast<int>(events.size());
    events.push_back(e);
    auto touch = [&](int s) {
      if (s >= 1 && s <= g->n_sites) by_site[s].push_back(idx);
    };
    touch(e.from);
    touch(e.to);
  }

  double rate_of(const Event& e, std::uint64_t occ) const {
    auto occupied = [&](int s) { return (occ >> (s - 1)) & 1u; };
    if (e.boundary_flip) {
      const int site = e.to;
      const double rho = (e.from == 0) ? g->rho_left : g->rho_right;
      return occupied(site) ? e.base_rate * (1.0 - rho) : e.base_rate * rho;
    }
    const bool from_ok = e.from == 0 || e.from == g->n_sites + 1 || occupied(e.from);
    const bool to_free = e.to == 0 || e.to == g->n_sites + 1 || !occupied(e.to);
    return (from_ok && to_free) ? e.base_rate : 0.0;
  }

  void refresh_all(std::uint64_t occ) {
    total = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      rates[i] = rate_of(events[i], occ);
      total += rates[i];
    }
    since_resum = 0;
  }

  void refresh_sites(std::uint64_t occ, int a, int b) {
    for (int s : {a, b}) {
      if (s < 1 || s > g->n_sites) continue;
      for (int idx : by_site[s]) {
        total -= rates[idx];
        rates[idx] = rate_of(events[idx], occ);
        total += rates[idx];
      }
    }
    if (++since_resum >= 4096) refresh_all(occ);
  }

  int pick(double u) const {
    double target = u * total;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      target -= rates[i];
      if (target < 0.0) return static_cast<int>(i);
    }
    for (std::size_t i = rates.size(); i-- > 0;)
      if (rates[i] > 0.0) return static_cast<int>(i);
    return -1;
  }
};

}  // namespace

void EventLog::record(double t, const char* type, int from, int to) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.9f,%s,%d,%d\n", t, type, from, to);
  *os_ << buf;
}

std::vector<McEstimate> simulate_sep(const GraphSpec& g, const OccupancyConfig& initial,
                                     double t_max, RngStream& rng,
                                     const std::vector<SiteSet>& observables,
                                     const SepOptions& opts) {
  require_valid(g);
  if (g.n_sites > kMaxSimSites) throw capacity_error("simulation capped at 63 sites");
  if (!(t_max > 0.0)) throw parameter_error("t_max must be positive");
  if (initial.n_sites != g.n_sites)
    throw parameter_error("initial configuration size mismatch");
  const double burn_in = opts.burn_in < 0.0 ? t_max / 5.0 : opts.burn_in;
  if (!(burn_in < t_max)) throw parameter_error("burn-in must be below t_max");
  const int n_batches = std::max(opts.batches, 2);
  const double window = t_max - burn_in;
  const double batch_len = window / n_batches;

  std::vector<std::uint64_t> masks;
  for (const SiteSet& s : observables) {
    for (int x : s.sites)
      if (x < 1 || x > g.n_sites) throw parameter_error("observable site out of range");
    masks.push_back(s.mask());
  }

  EventTable table;
  table.build(g, true);
  std::uint64_t occ = initial.bits;
  table.refresh_all(occ);

  // occupied time per (batch, observable)
  std::vector<double> acc(static_cast<std::size_t>(n_batches) * masks.size(), 0.0);
  auto deposit = [&](double a, double b, std::uint64_t state) {
    a = std::max(a, burn_in);
    b = std::min(b, t_max);
    if (a >= b) return;
    for (std::size_t k = 0; k < masks.size(); ++k) {
      if ((state & masks[k]) != masks[k]) continue;
      double lo = a;
      while (lo < b) {
        const int idx =
            std::min(static_cast<int>((lo - burn_in) / batch_len), n_batches - 1);
        // the last batch absorbs any rounding remainder of the window
        const double hi = (idx == n_batches - 1)
                              ? b
                              : std::min(b, burn_in + (idx + 1) * batch_len);
        acc[static_cast<std::size_t>(idx) * masks.size() + k] += hi - lo;
        lo = hi;
      }
    }
  };

  double t = 0.0;
  while (t < t_max) {
    const double dt = rng.next_exponential(table.total);
    const double t_next = t + dt;
    deposit(t, t_next, occ);
    if (t_next >= t_max) break;
    const int idx = table.pick(rng.next_uniform());
    const auto& ev = table.events[idx];
    if (ev.boundary_flip) {
      const int site = ev.to;
      const int reservoir = ev.from;
      const bool was = (occ >> (site - 1)) & 1u;
      occ ^= std::uint64_t{1} << (site - 1);
      if (opts.log) {
        if (was)
          opts.log->record(t_next, "destroy", site, reservoir);
        else
          opts.log->record(t_next, "create", reservoir, site);
      }
      table.refresh_sites(occ, site, site);
    } else {
      occ ^= std::uint64_t{1} << (ev.from - 1);
      occ ^= std::uint64_t{1} << (ev.to - 1);
      if (opts.log) opts.log->record(t_next, "hop", ev.from, ev.to);
      table.refresh_sites(occ, ev.from, ev.to);
    }
    t = t_next;
  }

  std::vector<McEstimate> out;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    RunningStat stat;
    for (int b = 0; b < n_batches; ++b)
      stat.add(acc[static_cast<std::size_t>(b) * masks.size() + k] / batch_len);
    out.push_back(stat.estimate());
  }
  return out;
}

DualState simulate_dual(const GraphSpec& g, const SiteSet& start, RngStream& rng,
                        EventLog* log) {
  require_valid(g);
  if (g.n_sites > kMaxSimSites) throw capacity_error("simulation capped at 63 sites");
  for (int x : start.sites)
    if (x > g.n_sites) throw parameter_error("start site out of range");

  DualState s;
  s.n_sites = g.n_sites;
  s.bulk = start.mask();

  EventTable table;
  table.build(g, false);
  table.refresh_all(s.bulk);

  double t = 0.0;
  long long steps = 0;
  while (s.bulk != 0) {
    if (++steps > kEventCap)
      throw numerical_error("dual run exceeded the event cap before absorbing");
    const double dt = rng.next_exponential(table.total);
    t += dt;
    const auto& ev = table.events[table.pick(rng.next_uniform())];
    if (ev.to == 0) {
      s.bulk ^= 1u;
      s.absorbed_0 += 1;
      if (log) log->record(t, "absorb", 1, 0);
      table.refresh_sites(s.bulk, 1, 1);
    } else if (ev.to == g.n_sites + 1) {
      s.bulk ^= std::uint64_t{1} << (g.n_sites - 1);
      s.absorbed_N += 1;
      if (log) log->record(t, "absorb", g.n_sites, g.n_sites + 1);
      table.refresh_sites(s.bulk, g.n_sites, g.n_sites);
    } else {
      s.bulk ^= std::uint64_t{1} << (ev.from - 1);
      s.bulk ^= std::uint64_t{1} << (ev.to - 1);
      if (log) log->record(t, "hop", ev.from, ev.to);
      table.refresh_sites(s.bulk, ev.from, ev.to);
    }
  }
  return s;
}

std::uint64_t StirringOutcome::right_mask() const {
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < destination.size(); ++i)
    if (destination[i] != 0) m |= std::uint64_t{1} << (start.sites[i] - 1);
  return m;
}

StirringOutcome simulate_stirring(const GraphSpec& g, RngStream& rng, EventLog* log) {
  SiteSet all;
  for (int x = 1; x <= g.n_sites; ++x) all.sites.push_back(x);
  return simulate_stirring_from(g, all, rng, log);
}

StirringOutcome simulate_stirring_from(const GraphSpec& g, const SiteSet& start,
                                       RngStream& rng, EventLog* log) {
  require_valid(g);
  if (g.n_sites > kMaxSimSites) throw capacity_error("simulation capped at 63 sites");
  for (int x : start.sites)
    if (x > g.n_sites) throw parameter_error("start site out of range");

  const int n = g.n_sites;
  const int right = n + 1;
  StirringOutcome out;
  out.start = start;
  out.destination.assign(start.sites.size(), -1);

  // site -> label index (or -1); clocks ring regardless of occupancy.
  std::vector<int> occupant(n + 1, -1);
  for (std::size_t i = 0; i < start.sites.size(); ++i)
    occupant[start.sites[i]] = static_cast<int>(i);
  int remaining = static_cast<int>(start.sites.size());

  std::vector<double> clock_rates;
  for (const Edge& e : g.edges) clock_rates.push_back(e.weight);
  clock_rates.push_back(g.omega_left);
  clock_rates.push_back(g.omega_right);
  double total = 0.0;
  for (double r : clock_rates) total += r;

  double t = 0.0;
  long long steps = 0;
  while (remaining > 0) {
    if (++steps > kEventCap)
      throw numerical_error("stirring run exceeded the event cap before absorbing");
    t += rng.next_exponential(total);
    double target = rng.next_uniform() * total;
    std::size_t idx = 0;
    for (; idx + 1 < clock_rates.size(); ++idx) {
      target -= clock_rates[idx];
      if (target < 0.0) break;
    }
    if (idx < g.edges.size()) {
      const Edge& e = g.edges[idx];
      std::swap(occupant[e.x], occupant[e.y]);
      if (log && (occupant[e.x] >= 0 || occupant[e.y] >= 0))
        log->record(t, "swap", e.x, e.y);
    } else if (idx == g.edges.size()) {
      if (occupant[1] >= 0) {
        out.destination[occupant[1]] = 0;
        occupant[1] = -1;
        --remaining;
        if (log) log->record(t, "absorb", 1, 0);
      }
    } else {
      if (occupant[n] >= 0) {
        out.destination[occupant[n]] = right;
        occupant[n] = -1;
        --remaining;
        if (log) log->record(t, "absorb", n, right);
      }
    }
  }
  return out;
}

int ninja_projection(int x, int ninja, int N) {
  if (x == N && ninja == N) return N - 1;
  return x - (ninja < x ? 1 : 0);
}

NinjaRun simulate_ninja(int N, const SiteSet& xs, int ninja_start, RngStream& rng,
                        EventLog* log) {
  if (N < 2) throw parameter_error("segment size N must be at least 2");
  if (N - 1 > kMaxSimSites) throw capacity_error("simulation capped at 63 sites");
  for (int x : xs.sites)
    if (x < 1 || x > N - 1) throw parameter_error("label start outside 1..N-1");
  if (ninja_start < 0 || ninja_start > N)
    throw parameter_error("distinguished start outside 0..N");
  if (xs.contains(ninja_start))
    throw parameter_error("start positions must be distinct");
  if (ninja_start == 0 && xs.contains(1))
    throw parameter_error("start with the distinguished walker at 0 next to a label at 1 is not allowed");
  if (ninja_start == N && xs.contains(N - 1))
    throw parameter_error("start with the distinguished walker at N next to a label at N-1 is not allowed");

  const int k = xs.size();
  std::vector<int> pos(xs.sites);
  int ninja = ninja_start;

  auto occupied = [&](int s) {
    if (s == ninja && s >= 1 && s <= N - 1) return true;
    for (int p : pos)
      if (p == s && s >= 1 && s <= N - 1) return true;
    return false;
  };
  auto absorbing = [&](int s) { return s == 0 || s == N; };

  struct Move {
    int label;  // -1 = distinguished walker
    int to;
    int ninja_to;
  };
  std::vector<Move> moves;

  auto enumerate = [&]() {
    moves.clear();
    if (!absorbing(ninja)) {
      bool any_adjacent = false;
      for (int i = 0; i < k; ++i)
        if (!absorbing(pos[i]) && std::abs(pos[i] - ninja) == 1) any_adjacent = true;

      for (int i = 0; i < k; ++i) {
        if (absorbing(pos[i])) continue;
        if (any_adjacent && std::abs(pos[i] - ninja) == 1) {
          const int d = ninja - pos[i];
          const int over = pos[i] + 2 * d;  // hop across the distinguished walker
          if (absorbing(over) || !occupied(over)) moves.push_back({i, over, pos[i]});
          const int away = pos[i] - d;
          if (absorbing(away) || !occupied(away)) moves.push_back({i, away, ninja});
        } else {
          for (int d : {-1, 1}) {
            const int to = pos[i] + d;
            if (absorbing(to) || !occupied(to)) moves.push_back({i, to, ninja});
          }
        }
      }
      if (!any_adjacent) {
        for (int d : {-1, 1}) {
          const int to = ninja + d;
          if (absorbing(to) || !occupied(to)) moves.push_back({-1, to, to});
        }
      }
    } else {
      const int partner = (ninja == 0) ? 2 : N - 2;   // distance-2 site
      const int doorway = (ninja == 0) ? 1 : N - 1;   // guaranteed free
      for (int i = 0; i < k; ++i) {
        if (absorbing(pos[i])) continue;
        if (pos[i] == partner && partner >= 1 && partner <= N - 1) {
          const int away = (ninja == 0) ? partner + 1 : partner - 1;
          if (absorbing(away) || !occupied(away)) moves.push_back({i, away, ninja});
          // the label slips into the absorbing site; the walker returns
          moves.push_back({i, ninja, doorway});
        } else {
          for (int d : {-1, 1}) {
            const int to = pos[i] + d;
            if (absorbing(to) || !occupied(to)) moves.push_back({i, to, ninja});
          }
        }
      }
    }
  };

  double t = 0.0;
  long long steps = 0;
  while (true) {
    bool labels_done = true;
    for (int p : pos)
      if (!absorbing(p)) labels_done = false;
    if (labels_done && absorbing(ninja)) break;
    if (++steps > kEventCap)
      throw numerical_error("labelled run exceeded the event cap before absorbing");

    enumerate();
    t += rng.next_exponential(static_cast<double>(moves.size()));
    const Move m = moves[static_cast<std::size_t>(rng.next_below(moves.size()))];
    if (m.label < 0) {
      if (log) log->record(t, "hop", ninja, m.to);
      ninja = m.to;
    } else {
      if (log) log->record(t, "hop", pos[m.label], m.to);
      pos[m.label] = m.to;
      ninja = m.ninja_to;
    }
  }

  NinjaRun run;
  run.label_destination = pos;
  run.ninja_destination = ninja;
  run.all_labels_right = true;
  for (int p : pos)
    if (p != N) run.all_labels_right = false;
  return run;
}

int replica_thread_cap() {
  if (const char* env = std::getenv("SEPNESS_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

// Runs fn(replica_index, rng) over [0, n) with at most replica_thread_cap()
// workers. Each replica draws from its own substream; fn must only touch
// replica-indexed slots, so the result is independent of the partitioning.
void parallel_replicas(long long n, const RngStream& base,
                       const std::function<void(long long, RngStream&)>& fn) {
  const int threads = static_cast<int>(
      std::min<long long>(replica_thread_cap(), std::max<long long>(n, 1)));
  if (threads <= 1) {
    for (long long i = 0; i < n; ++i) {
      RngStream rng = base.substream(static_cast<std::uint64_t>(i));
      fn(i, rng);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<long long> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      constexpr long long kBlock = 64;
      while (true) {
        const long long begin = next.fetch_add(kBlock);
        if (begin >= n) return;
        const long long end = std::min(n, begin + kBlock);
        for (long long i = begin; i < end; ++i) {
          RngStream rng = base.substream(static_cast<std::uint64_t>(i));
          fn(i, rng);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

McEstimate run_replicas(const std::function<double(RngStream&)>& task,
                        long long n_replicas, const RngStream& base) {
  if (n_replicas < 2) throw parameter_error("need at least two replicas");
  std::vector<double> samples(static_cast<std::size_t>(n_replicas));
  parallel_replicas(n_replicas, base,
                    [&](long long i, RngStream& rng) { samples[i] = task(rng); });
  // Fold in replica order: the estimate is identical whatever the thread count.
  RunningStat stat;
  for (double v : samples) stat.add(v);
  return stat.estimate();
}

DualLevelStats estimate_dual_levels(const GraphSpec& g, const SiteSet& start,
                                    long long n_replicas, const RngStream& base) {
  if (n_replicas < 2) throw parameter_error("need at least two replicas");
  DualLevelStats out;
  out.n_runs = n_replicas;
  std::vector<std::uint8_t> levels(static_cast<std::size_t>(n_replicas));
  parallel_replicas(n_replicas, base, [&](long long i, RngStream& rng) {
    const DualState final = simulate_dual(g, start, rng);
    levels[i] = static_cast<std::uint8_t>(final.absorbed_N);
  });
  out.level_counts.assign(start.size() + 1, 0);
  for (auto l : levels) out.level_counts[l] += 1;
  return out;
}

McEstimate DualLevelStats::frequency(int level) const {
  return binomial_estimate(level_counts.at(level), n_runs);
}

StirringStats estimate_stirring_patterns(const GraphSpec& g, const SiteSet& start,
                                         long long n_replicas, const RngStream& base) {
  if (n_replicas < 2) throw parameter_error("need at least two replicas");
  if (start.size() > 20) throw capacity_error("too many labels for pattern counting");
  StirringStats out;
  out.start = start;
  out.n_runs = n_replicas;
  std::vector<std::uint32_t> patterns(static_cast<std::size_t>(n_replicas));
  parallel_replicas(n_replicas, base, [&](long long i, RngStream& rng) {
    const StirringOutcome run = simulate_stirring_from(g, start, rng);
    std::uint32_t p = 0;
    for (std::size_t j = 0; j < run.destination.size(); ++j)
      if (run.destination[j] != 0) p |= std::uint32_t{1} << j;
    patterns[i] = p;
  });
  out.pattern_counts.assign(std::size_t{1} << start.size(), 0);
  for (auto p : patterns) out.pattern_counts[p] += 1;
  return out;
}

McEstimate StirringStats::pattern_frequency(std::uint64_t pattern) const {
  return binomial_estimate(pattern_counts.at(pattern), n_runs);
}

McEstimate StirringStats::marginal_right(int label_index) const {
  long long hits = 0;
  for (std::size_t p = 0; p < pattern_counts.size(); ++p)
    if ((p >> label_index) & 1u) hits += pattern_counts[p];
  return binomial_estimate(hits, n_runs);
}

NinjaStats estimate_ninja(int N, const SiteSet& xs, int ninja_start,
                          long long n_replicas, const RngStream& base) {
  if (n_replicas < 2) throw parameter_error("need at least two replicas");
  NinjaStats out;
  out.n_runs = n_replicas;
  const int k = xs.size();
  struct Row {
    std::uint8_t level, label_level, all_right, ninja_left;
  };
  std::vector<Row> rows(static_cast<std::size_t>(n_replicas));
  parallel_replicas(n_replicas, base, [&](long long i, RngStream& rng) {
    const NinjaRun run = simulate_ninja(N, xs, ninja_start, rng);
    std::uint8_t labels_right = 0;
    for (int p : run.label_destination)
      if (p == N) ++labels_right;
    Row r;
    r.label_level = labels_right;
    r.level = labels_right + (run.ninja_destination == N ? 1 : 0);
    r.all_right = run.all_labels_right ? 1 : 0;
    r.ninja_left = (run.all_labels_right && run.ninja_destination == 0) ? 1 : 0;
    rows[i] = r;
  });
  out.level_counts.assign(k + 2, 0);
  out.label_level_counts.assign(k + 1, 0);
  for (const Row& r : rows) {
    out.level_counts[r.level] += 1;
    out.label_level_counts[r.label_level] += 1;
    out.n_all_labels_right += r.all_right;
    out.n_all_right_ninja_left += r.ninja_left;
  }
  return out;
}

McEstimate NinjaStats::all_labels_right_frequency() const {
  return binomial_estimate(n_all_labels_right, n_runs);
}

McEstimate NinjaStats::conditional_ninja_left() const {
  if (n_all_labels_right == 0)
    throw numerical_error("conditioning event never occurred");
  return binomial_estimate(n_all_right_ninja_left, n_all_labels_right);
}

}  // namespace sepness
