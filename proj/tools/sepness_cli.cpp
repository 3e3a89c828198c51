// Command-line front door: build a graph from flags or JSON, dispatch to the
// exact engines, closed forms and simulators, and run the verification
// suites. Exit codes: 0 success, 1 input error, 2 capacity, 3 verification
// failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "sepness/closed_forms.hpp"
#include "sepness/exact.hpp"
#include "sepness/lattice.hpp"
#include "sepness/sim.hpp"
#include "sepness/verify.hpp"

namespace {

using nlohmann::json;
using namespace sepness;

struct GraphArgs {
  int segment_n = 0;   // extended segment size N (bulk N-1)
  int n_sites = 0;     // bulk size directly
  std::string graph_path;
  std::string abgd;
  double rho_l = 0.5, rho_r = 0.5;
  double omega_l = 1.0, omega_r = 1.0;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--segment,--segment-n", segment_n,
                    "homogeneous segment [N]_0 with bulk sites 1..N-1 (N >= 2)");
    cmd->add_option("--n-sites", n_sites, "homogeneous segment with this many bulk sites");
    cmd->add_option("--graph", graph_path, "graph JSON file");
    cmd->add_option("--rho-l", rho_l, "left reservoir density");
    cmd->add_option("--rho-r", rho_r, "right reservoir density");
    cmd->add_option("--omega-l", omega_l, "left reservoir conductance");
    cmd->add_option("--omega-r", omega_r, "right reservoir conductance");
    cmd->add_option("--abgd", abgd,
                    "alpha,beta,gamma,delta boundary rates (overrides rho/omega)");
  }

  GraphSpec resolve() const {
    const int sources = (segment_n > 0) + (n_sites > 0) + (!graph_path.empty());
    if (sources != 1)
      throw parameter_error("exactly one of --segment, --n-sites, --graph is required");
    if (!graph_path.empty()) {
      std::ifstream in(graph_path);
      if (!in) throw parameter_error("cannot open graph file " + graph_path);
      std::stringstream buf;
      buf << in.rdbuf();
      GraphSpec g = graph_from_json(buf.str());
      require_valid(g);
      return g;
    }
    int bulk = 0;
    if (segment_n > 0) {
      if (segment_n < 2) throw parameter_error("--segment takes N >= 2 (bulk N-1 >= 1)");
      bulk = segment_n - 1;
    } else {
      bulk = n_sites;
    }
    if (!abgd.empty()) {
      AbgdParams p;
      std::istringstream is(abgd);
      char c1, c2, c3;
      if (!(is >> p.alpha >> c1 >> p.beta >> c2 >> p.gamma >> c3 >> p.delta) ||
          c1 != ',' || c2 != ',' || c3 != ',')
        throw parameter_error("--abgd expects alpha,beta,gamma,delta");
      return from_abgd(bulk, p);
    }
    return homogeneous_segment(bulk, omega_l, omega_r, rho_l, rho_r);
  }
};

SiteSet parse_sites(const std::string& text) {
  SiteSet out;
  if (text.empty()) return out;
  std::istringstream is(text);
  std::string tok;
  std::vector<int> sites;
  while (std::getline(is, tok, ',')) sites.push_back(std::stoi(tok));
  return SiteSet(std::move(sites));
}

struct OutputArgs {
  std::string format = "json";
  std::string out_path;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--out", out_path, "output path (default stdout)");
  }

  void write(const std::string& text) const {
    if (out_path.empty()) {
      std::cout << text << std::endl;
      return;
    }
    std::ofstream f(out_path);
    if (!f) throw parameter_error("cannot write " + out_path);
    f << text;
  }
};

json report_skeleton(const std::string& command, const std::string& invocation,
                     std::uint64_t seed, std::uint64_t stream) {
  json j;
  j["command"] = command;
  j["invocation"] = invocation;
  j["params"] = json::object();
  j["seed"] = seed;
  j["stream"] = stream;
  j["results"] = json::object();
  j["residuals"] = json::object();
  j["pass"] = true;
  return j;
}

json suite_to_json(const SuiteReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks) {
    json e;
    e["name"] = c.name;
    e["measured"] = c.measured;
    e["tolerance"] = c.tolerance;
    e["pass"] = c.pass;
    if (!c.detail.empty()) e["detail"] = c.detail;
    checks.push_back(e);
  }
  json j;
  j["suite"] = report.suite;
  j["checks"] = checks;
  j["pass"] = report.all_pass();
  return j;
}

void print_suite(const SuiteReport& report) {
  for (const auto& c : report.checks)
    std::cerr << (c.pass ? "PASS " : "FAIL ") << report.suite << ": " << c.name
              << "  measured=" << c.measured << " tol=" << c.tolerance
              << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
}

int cmd_exact(const GraphArgs& graph_args, const OutputArgs& out,
              const std::string& invocation, const std::string& weights_csv) {
  const GraphSpec g = graph_args.resolve();
  const StationaryDistribution exact = stationary_distribution(g);
  const StationaryDistribution mix = mixture_measure(g);
  const MixtureWeights weights = mixture_weights(g);

  double deviation = 0.0;
  for (std::size_t i = 0; i < exact.probs.size(); ++i)
    deviation = std::max(deviation, std::abs(exact.probs[i] - mix.probs[i]));

  if (!weights_csv.empty()) {
    std::ofstream f(weights_csv);
    if (!f) throw parameter_error("cannot write " + weights_csv);
    f << weights.to_csv();
  }

  if (out.format == "csv") {
    out.write(exact.to_csv());
    return deviation < 1e-9 ? 0 : 3;
  }
  json j = report_skeleton("exact", invocation, 0, 0);
  j["params"] = json::parse(graph_to_json(g));
  j["graph_hash"] = graph_hash(g);
  j["results"]["stationary"] = exact.probs;
  j["results"]["mixture"] = mix.probs;
  j["results"]["weights"] = json::parse(weights.to_json());
  j["residuals"]["mixture_vs_stationary"] = deviation;
  j["pass"] = deviation < 1e-9;
  out.write(j.dump(2));
  return j["pass"].get<bool>() ? 0 : 3;
}

int cmd_absorption(const GraphArgs& graph_args, const OutputArgs& out,
                   const std::string& invocation, const std::string& sites_text,
                   const std::string& only) {
  const GraphSpec g = graph_args.resolve();
  const SiteSet sites = parse_sites(sites_text);
  for (int x : sites.sites)
    if (x > g.n_sites) throw parameter_error("site out of range");
  const bool homogeneous = is_homogeneous_segment(g);
  const int N = g.n_sites + 1;

  json j = report_skeleton("absorption", invocation, 0, 0);
  j["params"] = json::parse(graph_to_json(g));
  j["params"]["sites"] = sites.sites;
  j["graph_hash"] = graph_hash(g);

  double discrepancy = 0.0;
  if (only == "all-at-n") {
    const double oracle = all_absorbed_at_right(g, sites);
    j["results"]["oracle"] = oracle;
    if (homogeneous) {
      const double formula = absorption_product(N, g.omega_left, g.omega_right, sites);
      discrepancy = std::abs(formula - oracle);
      j["results"]["closed_form"] = formula;
    }
  } else {
    const AbsorptionTable oracle = absorption_distribution(g, sites);
    j["results"]["oracle"] = oracle.probs;
    if (homogeneous) {
      std::vector<double> formula;
      for (int l = 0; l <= sites.size(); ++l)
        formula.push_back(absorption_level(N, g.omega_left, g.omega_right, sites, l));
      for (int l = 0; l <= sites.size(); ++l)
        discrepancy = std::max(discrepancy, std::abs(formula[l] - oracle.probs[l]));
      j["results"]["closed_form"] = formula;
    }
    if (out.format == "csv") {
      std::ostringstream os;
      os << "level,probability\n";
      os.precision(17);
      for (int l = 0; l <= sites.size(); ++l) os << l << ',' << oracle.probs[l] << '\n';
      out.write(os.str());
      return 0;
    }
  }
  j["residuals"]["closed_form_vs_oracle"] = discrepancy;
  j["pass"] = discrepancy < 1e-10;
  out.write(j.dump(2));
  return j["pass"].get<bool>() ? 0 : 3;
}

int cmd_correlations(const GraphArgs& graph_args, const OutputArgs& out,
                     const std::string& invocation, const std::string& points_text,
                     bool centered, bool check) {
  const GraphSpec g = graph_args.resolve();
  const SiteSet points = parse_sites(points_text);
  const bool homogeneous = is_homogeneous_segment(g);
  const int N = g.n_sites + 1;

  json j = report_skeleton("correlations", invocation, 0, 0);
  j["params"] = json::parse(graph_to_json(g));
  j["params"]["points"] = points.sites;
  j["params"]["centered"] = centered;
  j["graph_hash"] = graph_hash(g);

  double value = 0.0;
  if (homogeneous) {
    value = n_point_correlation(N, g.omega_left, g.omega_right, g.rho_left,
                                g.rho_right, points, centered);
  } else {
    value = n_point_correlation(g, points, centered);
  }
  j["results"]["value"] = value;

  if (check) {
    const double oracle = n_point_correlation(g, points, centered);
    const auto pi = stationary_distribution(g).probs;
    double moment = 0.0;
    if (!centered) {
      const std::uint64_t mask = points.mask();
      for (std::uint64_t eta = 0; eta < pi.size(); ++eta)
        if ((eta & mask) == mask) moment += pi[eta];
    } else {
      std::vector<double> means;
      for (int x : points.sites) {
        double m = 0.0;
        for (std::uint64_t eta = 0; eta < pi.size(); ++eta)
          if ((eta >> (x - 1)) & 1u) m += pi[eta];
        means.push_back(m);
      }
      for (std::uint64_t eta = 0; eta < pi.size(); ++eta) {
        double term = pi[eta];
        for (std::size_t i = 0; i < points.sites.size(); ++i)
          term *= (((eta >> (points.sites[i] - 1)) & 1u) ? 1.0 : 0.0) - means[i];
        moment += term;
      }
    }
    j["results"]["dual_route"] = oracle;
    j["results"]["stationary_moment"] = moment;
    const double disc =
        std::max(std::abs(value - oracle), std::abs(value - moment));
    j["residuals"]["formula_vs_oracle"] = disc;
    j["pass"] = disc < 1e-9;
  }
  out.write(j.dump(2));
  return j["pass"].get<bool>() ? 0 : 3;
}

int cmd_simulate(const GraphArgs& graph_args, const OutputArgs& out,
                 const std::string& invocation, const std::string& mode,
                 const std::string& sites_text, int ninja_start, long long replicas,
                 double t_max, std::uint64_t seed, std::uint64_t stream,
                 const std::string& observables_text, const std::string& event_log_path) {
  json j = report_skeleton("simulate", invocation, seed, stream);
  j["params"]["mode"] = mode;
  j["params"]["replicas"] = replicas;
  j["rng_algorithm"] = RngStream::kAlgorithm;
  const RngStream base(seed, stream);

  std::ofstream log_file;
  std::optional<EventLog> log;
  if (!event_log_path.empty()) {
    log_file.open(event_log_path);
    if (!log_file) throw parameter_error("cannot write " + event_log_path);
    log.emplace(log_file);
  }

  auto emit = [&](bool pass) {
    j["pass"] = pass;
    out.write(j.dump(2));
    return pass ? 0 : 3;
  };

  if (mode == "ninja") {
    if (graph_args.omega_l != 1.0 || graph_args.omega_r != 1.0 ||
        !graph_args.abgd.empty())
      throw unsupported_regime_error(
          "the labelled coupling is defined for unit conductances only");
    const int N = graph_args.segment_n > 0 ? graph_args.segment_n : graph_args.n_sites + 1;
    if (N < 2) throw parameter_error("--segment N >= 2 required for ninja mode");
    const SiteSet xs = parse_sites(sites_text);
    if (ninja_start < 0) throw parameter_error("--ninja start site required");
    if (log) {
      RngStream rng = base.substream(~std::uint64_t{0});
      simulate_ninja(N, xs, ninja_start, rng, &*log);
    }
    const NinjaStats stats = estimate_ninja(N, xs, ninja_start, replicas, base);
    j["params"]["segment_n"] = N;
    j["params"]["sites"] = xs.sites;
    j["params"]["ninja"] = ninja_start;
    const auto cond = stats.conditional_ninja_left();
    const auto all_right = stats.all_labels_right_frequency();
    j["results"]["conditional_ninja_left"] = {{"mean", cond.mean},
                                              {"stderr", cond.stderr_of_mean},
                                              {"n", cond.n_samples}};
    j["results"]["all_labels_right"] = {{"mean", all_right.mean},
                                        {"stderr", all_right.stderr_of_mean},
                                        {"n", all_right.n_samples}};
    j["results"]["level_counts"] = stats.level_counts;
    const double target = 1.0 - static_cast<double>(ninja_start - xs.size()) / N;
    j["results"]["closed_form_conditional"] = target;
    return emit(std::abs(cond.mean - target) <= 4.0 * cond.stderr_of_mean);
  }

  const GraphSpec g = graph_args.resolve();
  j["params"]["graph"] = json::parse(graph_to_json(g));
  j["graph_hash"] = graph_hash(g);

  if (mode == "dual") {
    const SiteSet start = parse_sites(sites_text);
    if (start.empty()) throw parameter_error("--sites required for dual mode");
    if (log) {
      RngStream rng = base.substream(~std::uint64_t{0});
      simulate_dual(g, start, rng, &*log);
    }
    const DualLevelStats stats = estimate_dual_levels(g, start, replicas, base);
    const AbsorptionTable exact = absorption_distribution(g, start);
    json levels = json::array();
    bool pass = true;
    for (int l = 0; l <= start.size(); ++l) {
      const auto est = stats.frequency(l);
      levels.push_back({{"level", l},
                        {"mean", est.mean},
                        {"stderr", est.stderr_of_mean},
                        {"exact", exact.probs[l]}});
      if (std::abs(est.mean - exact.probs[l]) > 4.0 * est.stderr_of_mean &&
          est.stderr_of_mean > 0.0)
        pass = false;
    }
    j["results"]["levels"] = levels;
    j["results"]["n_runs"] = stats.n_runs;
    return emit(pass);
  }

  if (mode == "stirring") {
    SiteSet start = parse_sites(sites_text);
    if (start.empty())
      for (int x = 1; x <= g.n_sites; ++x) start.sites.push_back(x);
    if (log) {
      RngStream rng = base.substream(~std::uint64_t{0});
      simulate_stirring_from(g, start, rng, &*log);
    }
    const StirringStats stats = estimate_stirring_patterns(g, start, replicas, base);
    const bool full_bulk = start.size() == g.n_sites;
    std::optional<MixtureWeights> weights;
    if (full_bulk && is_homogeneous_segment(g)) weights = mixture_weights(g);
    json patterns = json::array();
    bool pass = true;
    for (std::uint64_t p = 0; p < stats.pattern_counts.size(); ++p) {
      const auto est = stats.pattern_frequency(p);
      json entry;
      std::uint64_t site_mask = 0;
      for (int i = 0; i < start.size(); ++i)
        if ((p >> i) & 1u) site_mask |= std::uint64_t{1} << (start.sites[i] - 1);
      entry["sites"] = SiteSet::from_mask(site_mask).sites;
      entry["frequency"] = est.mean;
      entry["stderr"] = est.stderr_of_mean;
      if (weights) {
        entry["F"] = weights->weights[site_mask];
        if (std::abs(est.mean - weights->weights[site_mask]) >
            4.0 * std::max(est.stderr_of_mean, 1e-300))
          pass = false;
      }
      patterns.push_back(entry);
    }
    j["results"]["patterns"] = patterns;
    j["results"]["n_runs"] = stats.n_runs;
    return emit(pass);
  }

  if (mode == "sep") {
    if (!(t_max > 0.0)) throw parameter_error("--t-max required for sep mode");
    std::vector<SiteSet> observables;
    if (!observables_text.empty()) {
      std::istringstream is(observables_text);
      std::string tok;
      while (std::getline(is, tok, ';')) observables.push_back(parse_sites(tok));
    } else {
      for (int x = 1; x <= g.n_sites; ++x) {
        SiteSet s;
        s.sites = {x};
        observables.push_back(s);
      }
    }
    RngStream rng = base.substream(0);
    SepOptions opts;
    if (log) opts.log = &*log;
    const OccupancyConfig empty = make_config(0, g.n_sites);
    const auto estimates = simulate_sep(g, empty, t_max, rng, observables, opts);
    json arr = json::array();
    for (std::size_t i = 0; i < observables.size(); ++i) {
      arr.push_back({{"sites", observables[i].sites},
                     {"mean", estimates[i].mean},
                     {"stderr", estimates[i].stderr_of_mean},
                     {"n", estimates[i].n_samples}});
    }
    j["params"]["t_max"] = t_max;
    j["params"]["burn_in"] = opts.burn_in < 0.0 ? t_max / 5.0 : opts.burn_in;
    j["results"]["observables"] = arr;
    return emit(true);
  }

  throw parameter_error("unknown mode " + mode);
}

int cmd_verify(const OutputArgs& out, const std::string& invocation,
               const std::string& suite, int segment_n, int max_n, double tol,
               std::uint64_t seed, std::uint64_t stream, long long replicas) {
  std::vector<SuiteReport> reports;
  const bool tol_set = tol > 0.0;

  if (suite == "duality" || suite == "all")
    reports.push_back(verify_duality(tol_set ? tol : 1e-12));
  if (suite == "martingales" || suite == "all") {
    if (segment_n > 0) {
      SuiteReport r;
      r.suite = "martingales";
      double worst = 0.0;
      for (double wl : {0.5, 1.0, 3.0})
        for (double wr : {0.5, 1.0, 3.0})
          worst = std::max(worst, check_two_particle_martingales(segment_n, wl, wr));
      CheckResult c;
      c.name = "martingales N=" + std::to_string(segment_n);
      c.measured = worst;
      c.tolerance = tol_set ? tol : 1e-12;
      c.pass = worst <= c.tolerance;
      r.checks.push_back(c);
      reports.push_back(r);
    } else {
      reports.push_back(verify_martingales(6, tol_set ? tol : 1e-12));
    }
  }
  if (suite == "ninja" || suite == "all")
    reports.push_back(verify_ninja(max_n > 0 ? max_n : 7, tol_set ? tol : 1e-12));
  if (suite == "mixture" || suite == "all")
    reports.push_back(verify_mixture(tol_set ? tol : 1e-9));
  if (suite == "formulas" || suite == "all")
    reports.push_back(verify_formulas(max_n > 0 ? max_n : 8));
  if (suite == "mc")
    reports.push_back(verify_monte_carlo(seed, stream, replicas));
  if (reports.empty()) throw parameter_error("unknown suite " + suite);

  json j = report_skeleton("verify", invocation, seed, stream);
  j["params"]["suite"] = suite;
  json arr = json::array();
  bool pass = true;
  std::vector<std::string> failures;
  for (const auto& r : reports) {
    print_suite(r);
    arr.push_back(suite_to_json(r));
    if (!r.all_pass()) {
      pass = false;
      for (const auto& c : r.checks)
        if (!c.pass) failures.push_back(r.suite + "/" + c.name);
    }
  }
  j["results"]["suites"] = arr;
  j["results"]["failures"] = failures;
  j["pass"] = pass;
  out.write(j.dump(2));
  return pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  std::string invocation;
  for (int i = 0; i < argc; ++i) {
    if (i) invocation += ' ';
    invocation += argv[i];
  }

  CLI::App app{"boundary-driven exclusion process toolkit"};
  app.require_subcommand(1);

  GraphArgs graph_args;
  OutputArgs output;
  std::uint64_t seed = 12345, stream = 0;
  long long replicas = 100000;
  double t_max = 0.0;
  std::string sites_text, points_text, observables_text, event_log_path;
  std::string only, mode = "dual", suite = "all", weights_csv;
  int ninja_start = -1, segment_n_opt = 0, max_n = 0;
  double tol = 0.0;
  bool centered = false, check = false;

  auto* exact_cmd = app.add_subcommand("exact", "stationary distribution and mixture weights");
  graph_args.add_options(exact_cmd);
  output.add_options(exact_cmd);
  exact_cmd->add_option("--weights-csv", weights_csv, "also write the weights as CSV");

  auto* abs_cmd = app.add_subcommand("absorption", "absorption probabilities of the dual");
  graph_args.add_options(abs_cmd);
  output.add_options(abs_cmd);
  abs_cmd->add_option("--sites", sites_text, "start sites, e.g. 1,2")->required();
  abs_cmd->add_option("--only", only, "all-at-n: only the top level")
      ->check(CLI::IsMember({"all-at-n"}));

  auto* corr_cmd = app.add_subcommand("correlations", "stationary occupation correlations");
  graph_args.add_options(corr_cmd);
  output.add_options(corr_cmd);
  corr_cmd->add_option("--points", points_text, "sites, e.g. 1,3")->required();
  corr_cmd->add_flag("--centered", centered, "centered moments");
  corr_cmd->add_flag("--check", check, "also compute the exact oracle value");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo estimators");
  graph_args.add_options(sim_cmd);
  output.add_options(sim_cmd);
  sim_cmd->add_option("--mode", mode, "sep | dual | stirring | ninja")
      ->check(CLI::IsMember({"sep", "dual", "stirring", "ninja"}));
  sim_cmd->add_option("--sites", sites_text, "start sites / labels");
  sim_cmd->add_option("--ninja", ninja_start, "start of the distinguished walker");
  sim_cmd->add_option("--replicas", replicas, "number of independent runs");
  sim_cmd->add_option("--t-max", t_max, "horizon for sep mode");
  sim_cmd->add_option("--observable", observables_text,
                      "site sets for sep mode, e.g. 2;1,3");
  sim_cmd->add_option("--seed", seed, "RNG seed");
  sim_cmd->add_option("--stream", stream, "RNG stream id");
  sim_cmd->add_option("--event-log", event_log_path, "CSV event log of one run");

  auto* verify_cmd = app.add_subcommand("verify", "replay the verification batteries");
  output.add_options(verify_cmd);
  verify_cmd->add_option("--suite", suite,
                         "all | duality | martingales | ninja | mixture | formulas | mc");
  verify_cmd->add_option("--segment-n,--segment", segment_n_opt,
                         "restrict martingale checks to one N");
  verify_cmd->add_option("--max-n", max_n, "cap for exhaustive suites");
  verify_cmd->add_option("--tol", tol, "override residual tolerance")
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", seed, "RNG seed (mc suite)");
  verify_cmd->add_option("--stream", stream, "RNG stream id (mc suite)");
  verify_cmd->add_option("--replicas", replicas, "replicas (mc suite)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (exact_cmd->parsed())
      return cmd_exact(graph_args, output, invocation, weights_csv);
    if (abs_cmd->parsed())
      return cmd_absorption(graph_args, output, invocation, sites_text, only);
    if (corr_cmd->parsed())
      return cmd_correlations(graph_args, output, invocation, points_text, centered,
                              check);
    if (sim_cmd->parsed())
      return cmd_simulate(graph_args, output, invocation, mode, sites_text,
                          ninja_start, replicas, t_max, seed, stream,
                          observables_text, event_log_path);
    if (verify_cmd->parsed())
      return cmd_verify(output, invocation, suite, segment_n_opt, max_n, tol, seed,
                        stream, replicas);
  } catch (const capacity_error& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 2;
  } catch (const parameter_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const unsupported_regime_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
