#include "sepness/verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "sepness/closed_forms.hpp"
#include "sepness/exact.hpp"
#include "sepness/sim.hpp"
#include "sepness/stats.hpp"

namespace sepness {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

CheckResult residual_check(std::string name, double measured, double tol,
                           std::string detail = {}) {
  CheckResult c;
  c.name = std::move(name);
  c.measured = measured;
  c.tolerance = tol;
  c.pass = measured <= tol;
  c.detail = std::move(detail);
  return c;
}

CheckResult sigma_check(std::string name, const McEstimate& est, double truth,
                        double k_sigma = 4.0) {
  CheckResult c;
  c.name = std::move(name);
  c.measured = std::abs(est.mean - truth);
  c.tolerance = k_sigma * est.stderr_of_mean;
  c.pass = c.measured <= c.tolerance;
  c.detail = "estimate " + fmt(est.mean) + " vs " + fmt(truth) + " (n=" +
             std::to_string(est.n_samples) + ")";
  return c;
}

CheckResult pvalue_check(std::string name, const ChiSquareResult& r, double alpha = 0.01) {
  CheckResult c;
  c.name = std::move(name);
  c.measured = r.p_value;
  c.tolerance = alpha;
  c.pass = r.p_value >= alpha;
  c.detail = "chi2=" + fmt(r.statistic) + " dof=" + std::to_string(r.dof);
  return c;
}

double stationary_moment(const std::vector<double>& pi, std::uint64_t mask) {
  double s = 0.0;
  for (std::uint64_t eta = 0; eta < pi.size(); ++eta)
    if ((eta & mask) == mask) s += pi[eta];
  return s;
}

double stationary_centered_moment(const std::vector<double>& pi,
                                  const std::vector<int>& pts,
                                  const std::vector<double>& means) {
  double s = 0.0;
  for (std::uint64_t eta = 0; eta < pi.size(); ++eta) {
    double term = pi[eta];
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double bit = (eta >> (pts[i] - 1)) & 1u;
      term *= bit - means[i];
    }
    s += term;
  }
  return s;
}

const double kOmegaGrid[3] = {0.5, 1.0, 3.0};

}  // namespace

bool SuiteReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

GraphSpec battery_tree5() {
  GraphSpec g;
  g.n_sites = 5;
  g.edges = {{1, 2, 1.0}, {2, 3, 2.0}, {2, 4, 0.5}, {4, 5, 1.5}};
  g.omega_left = 1.7;
  g.omega_right = 0.6;
  g.rho_left = 0.2;
  g.rho_right = 0.8;
  return g;
}

GraphSpec battery_cycle_chord5() {
  GraphSpec g;
  g.n_sites = 5;
  g.edges = {{1, 2, 1.0}, {2, 3, 0.8}, {3, 4, 1.2}, {4, 5, 1.0}, {1, 5, 0.7}, {2, 5, 2.0}};
  g.omega_left = 0.9;
  g.omega_right = 1.4;
  g.rho_left = 0.2;
  g.rho_right = 0.8;
  return g;
}

SuiteReport verify_mixture(double tol_entry) {
  SuiteReport report;
  report.suite = "mixture";

  std::vector<std::pair<std::string, GraphSpec>> graphs;
  const double omegas[4][2] = {{1.0, 1.0}, {2.0, 0.5}, {0.5, 3.0}, {1.5, 0.8}};
  for (int N = 3; N <= 6; ++N) {
    const auto& w = omegas[N - 3];
    graphs.push_back({"segment N=" + std::to_string(N),
                      homogeneous_segment(N - 1, w[0], w[1], 0.2, 0.8)});
  }
  graphs.push_back({"tree5", battery_tree5()});
  graphs.push_back({"cycle_chord5", battery_cycle_chord5()});

  for (const auto& [name, g] : graphs) {
    const MixtureWeights weights = mixture_weights(g);
    report.checks.push_back(residual_check(
        name + " sum F = 1", std::abs(weights.total() - 1.0), 1e-10));
    const double min_f = *std::min_element(weights.weights.begin(), weights.weights.end());
    CheckResult pos;
    pos.name = name + " all F > 0";
    pos.measured = min_f;
    pos.tolerance = 0.0;
    pos.pass = min_f > 0.0;
    pos.detail = "min F = " + fmt(min_f);
    report.checks.push_back(pos);

    const StationaryDistribution mix = mixture_measure(g);
    const StationaryDistribution exact = stationary_distribution(g);
    double worst = 0.0;
    for (std::size_t i = 0; i < mix.probs.size(); ++i)
      worst = std::max(worst, std::abs(mix.probs[i] - exact.probs[i]));
    report.checks.push_back(
        residual_check(name + " mixture vs stationary", worst, tol_entry));
  }
  return report;
}

SuiteReport verify_formulas(int max_n, double tol_product, double tol_level,
                            double tol_corr) {
  SuiteReport report;
  report.suite = "formulas";

  // Product formula and level distributions against the absorbing solves.
  for (int N = 2; N <= max_n; ++N) {
    double worst_product = 0.0;
    double worst_level = 0.0;
    double worst_sum = 0.0;
    long checks = 0;
    for (double wl : kOmegaGrid) {
      for (double wr : kOmegaGrid) {
        const GraphSpec g = homogeneous_segment(N - 1, wl, wr, 0.35, 0.65);
        const int max_k = std::min(4, N - 1);
        const auto table = all_absorbed_at_right_table(g, max_k);
        for (std::uint64_t m = 1; m < table.size(); ++m) {
          if (std::popcount(m) > max_k) continue;
          const SiteSet xs = SiteSet::from_mask(m);
          const double formula = absorption_product(N, wl, wr, xs);
          worst_product = std::max(worst_product, std::abs(formula - table[m]));
          ++checks;

          const AbsorptionTable dist = absorption_distribution(g, xs);
          double sum = 0.0;
          for (int l = 0; l <= xs.size(); ++l) {
            const double lvl = absorption_level(N, wl, wr, xs, l);
            worst_level = std::max(worst_level, std::abs(lvl - dist.probs[l]));
            sum += lvl;
          }
          worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        }
      }
    }
    report.checks.push_back(residual_check("product formula N=" + std::to_string(N),
                                           worst_product, tol_product,
                                           std::to_string(checks) + " site sets"));
    report.checks.push_back(residual_check("level distribution N=" + std::to_string(N),
                                           worst_level, tol_level));
    report.checks.push_back(residual_check(
        "level normalization N=" + std::to_string(N), worst_sum, tol_level));
  }

  // Correlation formulas against exact stationary moments.
  for (int N = 3; N <= std::min(max_n, 6); ++N) {
    double worst_moment = 0.0;
    double worst_pair = 0.0;
    for (double wl : kOmegaGrid) {
      for (double wr : kOmegaGrid) {
        const GraphSpec g = homogeneous_segment(N - 1, wl, wr, 0.2, 0.8);
        const auto pi = stationary_distribution(g).probs;
        std::vector<double> means(N);
        for (int x = 1; x <= N - 1; ++x)
          means[x] = stationary_moment(pi, std::uint64_t{1} << (x - 1));

        for (std::uint64_t m = 1; m < (std::uint64_t{1} << (N - 1)); ++m) {
          if (std::popcount(m) > 3) continue;
          const SiteSet pts = SiteSet::from_mask(m);
          const double plain =
              n_point_correlation(N, wl, wr, 0.2, 0.8, pts, false);
          worst_moment =
              std::max(worst_moment, std::abs(plain - stationary_moment(pi, m)));

          std::vector<double> pt_means;
          for (int x : pts.sites) pt_means.push_back(means[x]);
          const double centered =
              n_point_correlation(N, wl, wr, 0.2, 0.8, pts, true);
          worst_moment = std::max(
              worst_moment,
              std::abs(centered - stationary_centered_moment(pi, pts.sites, pt_means)));

          if (pts.size() == 2) {
            const double pair = two_point_correlation(N, wl, wr, 0.2, 0.8,
                                                      pts.sites[0], pts.sites[1]);
            worst_pair = std::max(worst_pair, std::abs(centered - pair));
          }
        }
      }
    }
    report.checks.push_back(residual_check(
        "correlations vs stationary N=" + std::to_string(N), worst_moment, tol_corr));
    report.checks.push_back(residual_check(
        "pair formula identity N=" + std::to_string(N), worst_pair, 1e-12));
  }
  return report;
}

SuiteReport verify_duality(double tol) {
  SuiteReport report;
  report.suite = "duality";

  std::vector<std::pair<std::string, GraphSpec>> graphs;
  graphs.push_back({"segment N=3", homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8)});
  graphs.push_back({"segment N=5 boundary 2/0.5",
                    homogeneous_segment(4, 2.0, 0.5, 0.3, 0.7)});
  graphs.push_back({"segment N=6 boundary 0.5/3",
                    homogeneous_segment(5, 0.5, 3.0, 0.45, 0.55)});
  GraphSpec het;
  het.n_sites = 3;
  het.edges = {{1, 2, 2.0}, {2, 3, 0.5}};
  het.omega_left = 1.0;
  het.omega_right = 1.0;
  het.rho_left = 0.2;
  het.rho_right = 0.8;
  graphs.push_back({"weighted path N=4", het});
  graphs.push_back({"tree5", battery_tree5()});
  graphs.push_back({"cycle_chord5", battery_cycle_chord5()});

  for (const auto& [name, g] : graphs)
    report.checks.push_back(
        residual_check("duality " + name, check_generator_duality(g, 2), tol));
  return report;
}

SuiteReport verify_martingales(int max_n, double tol) {
  SuiteReport report;
  report.suite = "martingales";
  for (int N = 3; N <= max_n; ++N) {
    double worst = 0.0;
    for (double wl : kOmegaGrid)
      for (double wr : kOmegaGrid)
        worst = std::max(worst, check_two_particle_martingales(N, wl, wr));
    report.checks.push_back(
        residual_check("martingales N=" + std::to_string(N), worst, tol,
                       "conductance grid {0.5,1,3}^2"));
  }
  return report;
}

SuiteReport verify_ninja(int max_n, double tol) {
  SuiteReport report;
  report.suite = "ninja";
  for (int N = 2; N <= max_n; ++N) {
    double worst = 0.0;
    long cases = 0;
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << (N - 1)); ++m) {
      const auto check = ninja_recursion_residual(N, SiteSet::from_mask(m));
      worst = std::max(worst, check.residual);
      ++cases;
    }
    report.checks.push_back(residual_check("recursion N=" + std::to_string(N), worst,
                                           tol, std::to_string(cases) + " start sets"));
  }
  return report;
}

SuiteReport verify_monte_carlo(std::uint64_t seed, std::uint64_t stream,
                               long long n_replicas) {
  SuiteReport report;
  report.suite = "monte-carlo";
  const RngStream base(seed, stream);
  int lane = 0;
  auto next_base = [&]() { return base.substream(0xABCD0000u + lane++); };

  // Dual absorption frequencies.
  {
    const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);  // N = 4
    SiteSet start;
    start.sites = {2};
    const auto stats = estimate_dual_levels(g, start, n_replicas, next_base());
    report.checks.push_back(
        sigma_check("dual N=4 start {2} right-absorption", stats.frequency(1), 0.5));
  }
  {
    const GraphSpec g = homogeneous_segment(2, 1.0, 1.0, 0.2, 0.8);  // N = 3
    SiteSet start;
    start.sites = {1, 2};
    const auto stats = estimate_dual_levels(g, start, n_replicas, next_base());
    const auto exact = absorption_distribution(g, start);
    for (int l = 0; l <= 2; ++l)
      report.checks.push_back(sigma_check(
          "dual N=3 start {1,2} level " + std::to_string(l), stats.frequency(l),
          exact.probs[l]));
    report.checks.push_back(pvalue_check("dual N=3 level chi-square",
                                         chi_square_goodness(stats.level_counts,
                                                             exact.probs)));
  }

  // Stirring pattern frequencies against the mixture weights.
  for (int N : {3, 4}) {
    const GraphSpec g = homogeneous_segment(N - 1, 1.0, 1.0, 0.2, 0.8);
    SiteSet full;
    for (int x = 1; x <= g.n_sites; ++x) full.sites.push_back(x);
    const auto stats = estimate_stirring_patterns(g, full, n_replicas, next_base());
    const MixtureWeights weights = mixture_weights(g);
    for (std::uint64_t p = 0; p < stats.pattern_counts.size(); ++p)
      report.checks.push_back(
          sigma_check("stirring N=" + std::to_string(N) + " pattern " +
                          to_string(SiteSet::from_mask(p)),
                      stats.pattern_frequency(p), weights.weights[p]));
    for (int i = 0; i < full.size(); ++i) {
      const double single =
          static_cast<double>(full.sites[i]) / static_cast<double>(N);
      report.checks.push_back(
          sigma_check("stirring N=" + std::to_string(N) + " marginal site " +
                          std::to_string(full.sites[i]),
                      stats.marginal_right(i), single));
    }
  }

  // Consistency of the label restriction: patterns of labels {1,2} inside a
  // full run over three sites against a fresh run started from {1,2}.
  {
    const GraphSpec g = homogeneous_segment(3, 1.0, 1.0, 0.2, 0.8);
    SiteSet full, sub;
    full.sites = {1, 2, 3};
    sub.sites = {1, 2};
    const auto full_stats = estimate_stirring_patterns(g, full, n_replicas, next_base());
    const auto sub_stats = estimate_stirring_patterns(g, sub, n_replicas, next_base());
    std::vector<long long> restricted(4, 0);
    for (std::uint64_t p = 0; p < full_stats.pattern_counts.size(); ++p)
      restricted[p & 3u] += full_stats.pattern_counts[p];
    report.checks.push_back(pvalue_check("stirring restriction consistency",
                                         chi_square_two_sample(restricted,
                                                               sub_stats.pattern_counts)));
  }

  // Distinguished-walker runs: label forgetting, projection, and the
  // conditional return probability.
  {
    const int N = 4;
    SiteSet xs;
    xs.sites = {1};
    const int ninja_start = 3;
    const auto stats = estimate_ninja(N, xs, ninja_start, n_replicas, next_base());

    const GraphSpec g_full = homogeneous_segment(N - 1, 1.0, 1.0, 0.2, 0.8);
    SiteSet combined;
    combined.sites = {1, 3};
    const auto exact_full = absorption_distribution(g_full, combined);
    report.checks.push_back(pvalue_check(
        "label forgetting N=4 chi-square",
        chi_square_goodness(stats.level_counts, exact_full.probs)));

    const auto dual_stats = estimate_dual_levels(g_full, combined, n_replicas, next_base());
    report.checks.push_back(pvalue_check(
        "label forgetting N=4 vs dual sample",
        chi_square_two_sample(stats.level_counts, dual_stats.level_counts)));

    const GraphSpec g_small = homogeneous_segment(N - 2, 1.0, 1.0, 0.2, 0.8);
    SiteSet projected;
    for (int x : xs.sites) projected.sites.push_back(ninja_projection(x, ninja_start, N));
    const auto exact_small = absorption_distribution(g_small, projected);
    report.checks.push_back(pvalue_check(
        "projection N=4 chi-square",
        chi_square_goodness(stats.label_level_counts, exact_small.probs)));
    report.checks.push_back(sigma_check("projection N=4 all-right frequency",
                                        stats.all_labels_right_frequency(),
                                        exact_small.probs.back()));

    const double target = 1.0 - static_cast<double>(ninja_start - xs.size()) / N;
    report.checks.push_back(sigma_check("conditional return N=4",
                                        stats.conditional_ninja_left(), target));
  }
  {
    const int N = 5;
    SiteSet xs;
    xs.sites = {2, 3};
    const int ninja_start = 4;
    const auto stats = estimate_ninja(N, xs, ninja_start, n_replicas, next_base());
    const double target = 1.0 - static_cast<double>(ninja_start - xs.size()) / N;
    report.checks.push_back(sigma_check("conditional return N=5",
                                        stats.conditional_ninja_left(), target));

    const GraphSpec g_full = homogeneous_segment(N - 1, 1.0, 1.0, 0.2, 0.8);
    SiteSet combined;
    combined.sites = {2, 3, 4};
    const auto exact_full = absorption_distribution(g_full, combined);
    report.checks.push_back(pvalue_check(
        "label forgetting N=5 chi-square",
        chi_square_goodness(stats.level_counts, exact_full.probs)));
  }

  return report;
}

}  // namespace sepness
