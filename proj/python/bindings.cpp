#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sepness/closed_forms.hpp"
#include "sepness/exact.hpp"
#include "sepness/lattice.hpp"
#include "sepness/sim.hpp"
#include "sepness/verify.hpp"

namespace py = pybind11;
using namespace sepness;

namespace {

SiteSet sites_from_list(const std::vector<int>& v) { return SiteSet(v); }

}  // namespace

PYBIND11_MODULE(_sepness, m) {
  m.doc() = "boundary-driven exclusion process toolkit";

  py::register_exception<parameter_error>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<capacity_error>(m, "CapacityError", PyExc_RuntimeError);
  py::register_exception<numerical_error>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<unsupported_regime_error>(m, "UnsupportedRegimeError",
                                                   PyExc_ValueError);

  py::class_<Edge>(m, "Edge")
      .def(py::init<>())
      .def(py::init([](int x, int y, double w) { return Edge{x, y, w}; }),
           py::arg("x"), py::arg("y"), py::arg("weight") = 1.0)
      .def_readwrite("x", &Edge::x)
      .def_readwrite("y", &Edge::y)
      .def_readwrite("weight", &Edge::weight);

  py::class_<GraphSpec>(m, "GraphSpec")
      .def(py::init<>())
      .def_readwrite("n_sites", &GraphSpec::n_sites)
      .def_readwrite("edges", &GraphSpec::edges)
      .def_readwrite("omega_left", &GraphSpec::omega_left)
      .def_readwrite("omega_right", &GraphSpec::omega_right)
      .def_readwrite("rho_left", &GraphSpec::rho_left)
      .def_readwrite("rho_right", &GraphSpec::rho_right)
      .def("to_json", &graph_to_json)
      .def("__repr__", [](const GraphSpec& g) {
        return "<GraphSpec n_sites=" + std::to_string(g.n_sites) + ">";
      });

  py::class_<SiteSet>(m, "SiteSet")
      .def(py::init(&sites_from_list), py::arg("sites"))
      .def_readonly("sites", &SiteSet::sites)
      .def("__repr__", [](const SiteSet& s) { return to_string(s); });

  py::class_<AbgdParams>(m, "AbgdParams")
      .def(py::init([](double a, double b, double g, double d) {
             return AbgdParams{a, b, g, d};
           }),
           py::arg("alpha"), py::arg("beta"), py::arg("gamma"), py::arg("delta"))
      .def_readwrite("alpha", &AbgdParams::alpha)
      .def_readwrite("beta", &AbgdParams::beta)
      .def_readwrite("gamma", &AbgdParams::gamma)
      .def_readwrite("delta", &AbgdParams::delta);

  m.def("homogeneous_segment", &homogeneous_segment, py::arg("n_sites"),
        py::arg("omega_left"), py::arg("omega_right"), py::arg("rho_left"),
        py::arg("rho_right"));
  m.def("from_abgd", &from_abgd, py::arg("n_sites"), py::arg("params"));
  m.def("to_abgd", &to_abgd);
  m.def("validate", &validate);
  m.def("graph_from_json", &graph_from_json);
  m.def("graph_hash", &graph_hash);
  m.def("subsets_of",
        [](const std::vector<int>& sites) {
          std::vector<std::vector<int>> out;
          for (const SiteSet& s : subsets_of(SiteSet(sites))) out.push_back(s.sites);
          return out;
        },
        py::arg("sites"));

  py::class_<StationaryDistribution>(m, "StationaryDistribution")
      .def_readonly("probs", &StationaryDistribution::probs)
      .def("to_json", &StationaryDistribution::to_json)
      .def("to_csv", &StationaryDistribution::to_csv);

  py::class_<AbsorptionTable>(m, "AbsorptionTable")
      .def_readonly("probs", &AbsorptionTable::probs)
      .def("to_json", &AbsorptionTable::to_json);

  m.def("stationary_distribution",
        [](const GraphSpec& g) { return stationary_distribution(g); });
  m.def("absorption_distribution",
        [](const GraphSpec& g, const std::vector<int>& start) {
          return absorption_distribution(g, SiteSet(start));
        });
  m.def("all_absorbed_at_right",
        [](const GraphSpec& g, const std::vector<int>& start) {
          return all_absorbed_at_right(g, SiteSet(start));
        });
  m.def("check_generator_duality", &check_generator_duality, py::arg("graph"),
        py::arg("max_dual_particles") = 2);
  m.def("check_two_particle_martingales", &check_two_particle_martingales,
        py::arg("N"), py::arg("omega_left"), py::arg("omega_right"));

  m.def("harmonic_h", &harmonic_h, py::arg("N"), py::arg("omega_left"),
        py::arg("omega_right"), py::arg("x"));
  m.def("absorption_product",
        [](int N, double wl, double wr, const std::vector<int>& xs) {
          return absorption_product(N, wl, wr, SiteSet(xs));
        });
  m.def("absorption_level",
        [](int N, double wl, double wr, const std::vector<int>& xs, int level) {
          return absorption_level(N, wl, wr, SiteSet(xs), level);
        });

  py::class_<MixtureWeights>(m, "MixtureWeights")
      .def_readonly("n_sites", &MixtureWeights::n_sites)
      .def_readonly("weights", &MixtureWeights::weights)
      .def("weight",
           [](const MixtureWeights& w, const std::vector<int>& sites) {
             return w.weight(SiteSet(sites));
           })
      .def("total", &MixtureWeights::total)
      .def("to_json", &MixtureWeights::to_json)
      .def("to_csv", &MixtureWeights::to_csv);

  m.def("mixture_weights", &mixture_weights);
  m.def("mixture_weight",
        [](const GraphSpec& g, const std::vector<int>& I, const AllAtRightOracle& f) {
          return mixture_weight(g, SiteSet(I), f);
        });
  m.def("mixture_measure", &mixture_measure);
  m.def("density_profile", &density_profile);
  m.def("two_point_correlation", &two_point_correlation, py::arg("N"),
        py::arg("omega_left"), py::arg("omega_right"), py::arg("rho_left"),
        py::arg("rho_right"), py::arg("x"), py::arg("y"));
  m.def("n_point_correlation",
        [](int N, double wl, double wr, double rl, double rr,
           const std::vector<int>& pts, bool centered) {
          return n_point_correlation(N, wl, wr, rl, rr, SiteSet(pts), centered);
        });
  m.def("n_point_correlation_graph",
        [](const GraphSpec& g, const std::vector<int>& pts, bool centered) {
          return n_point_correlation(g, SiteSet(pts), centered);
        });

  py::class_<NinjaRecursionCheck>(m, "NinjaRecursionCheck")
      .def_readonly("lhs", &NinjaRecursionCheck::lhs)
      .def_readonly("rhs", &NinjaRecursionCheck::rhs)
      .def_readonly("residual", &NinjaRecursionCheck::residual);
  m.def("ninja_recursion_residual", [](int N, const std::vector<int>& xs) {
    return ninja_recursion_residual(N, SiteSet(xs));
  });

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream"))
      .def("next_u64", &RngStream::next_u64)
      .def("next_uniform", &RngStream::next_uniform)
      .def_property_readonly_static("algorithm",
                                    [](py::object) { return RngStream::kAlgorithm; });

  py::class_<McEstimate>(m, "McEstimate")
      .def_readonly("mean", &McEstimate::mean)
      .def_readonly("stderr", &McEstimate::stderr_of_mean)
      .def_readonly("n_samples", &McEstimate::n_samples)
      .def_readonly("half_width_99", &McEstimate::half_width_99);

  py::class_<DualState>(m, "DualState")
      .def_readonly("bulk", &DualState::bulk)
      .def_readonly("absorbed_0", &DualState::absorbed_0)
      .def_readonly("absorbed_N", &DualState::absorbed_N);

  m.def("simulate_dual",
        [](const GraphSpec& g, const std::vector<int>& start, std::uint64_t seed,
           std::uint64_t stream) {
          RngStream rng(seed, stream);
          return simulate_dual(g, SiteSet(start), rng);
        },
        py::arg("graph"), py::arg("start"), py::arg("seed"), py::arg("stream") = 0);

  py::class_<StirringOutcome>(m, "StirringOutcome")
      .def_readonly("destination", &StirringOutcome::destination)
      .def_property_readonly("start",
                             [](const StirringOutcome& s) { return s.start.sites; });

  m.def("simulate_stirring",
        [](const GraphSpec& g, std::uint64_t seed, std::uint64_t stream) {
          RngStream rng(seed, stream);
          return simulate_stirring(g, rng);
        },
        py::arg("graph"), py::arg("seed"), py::arg("stream") = 0);

  py::class_<NinjaRun>(m, "NinjaRun")
      .def_readonly("label_destination", &NinjaRun::label_destination)
      .def_readonly("ninja_destination", &NinjaRun::ninja_destination)
      .def_readonly("all_labels_right", &NinjaRun::all_labels_right);

  m.def("simulate_ninja",
        [](int N, const std::vector<int>& xs, int ninja_start, std::uint64_t seed,
           std::uint64_t stream) {
          RngStream rng(seed, stream);
          return simulate_ninja(N, SiteSet(xs), ninja_start, rng);
        },
        py::arg("N"), py::arg("xs"), py::arg("ninja_start"), py::arg("seed"),
        py::arg("stream") = 0);

  m.def("simulate_sep",
        [](const GraphSpec& g, double t_max, const std::vector<std::vector<int>>& obs,
           std::uint64_t seed, std::uint64_t stream) {
          RngStream rng(seed, stream);
          std::vector<SiteSet> observables;
          for (const auto& o : obs) observables.push_back(SiteSet(o));
          return simulate_sep(g, make_config(0, g.n_sites), t_max, rng, observables);
        },
        py::arg("graph"), py::arg("t_max"), py::arg("observables"), py::arg("seed"),
        py::arg("stream") = 0);

  py::class_<DualLevelStats>(m, "DualLevelStats")
      .def_readonly("n_runs", &DualLevelStats::n_runs)
      .def_readonly("level_counts", &DualLevelStats::level_counts)
      .def("frequency", &DualLevelStats::frequency);

  m.def("estimate_dual_levels",
        [](const GraphSpec& g, const std::vector<int>& start, long long n,
           std::uint64_t seed, std::uint64_t stream) {
          return estimate_dual_levels(g, SiteSet(start), n, RngStream(seed, stream));
        },
        py::arg("graph"), py::arg("start"), py::arg("n_replicas"), py::arg("seed"),
        py::arg("stream") = 0, py::call_guard<py::gil_scoped_release>());

  py::class_<StirringStats>(m, "StirringStats")
      .def_readonly("n_runs", &StirringStats::n_runs)
      .def_readonly("pattern_counts", &StirringStats::pattern_counts)
      .def("pattern_frequency", &StirringStats::pattern_frequency)
      .def("marginal_right", &StirringStats::marginal_right);

  m.def("estimate_stirring_patterns",
        [](const GraphSpec& g, const std::vector<int>& start, long long n,
           std::uint64_t seed, std::uint64_t stream) {
          return estimate_stirring_patterns(g, SiteSet(start), n,
                                            RngStream(seed, stream));
        },
        py::arg("graph"), py::arg("start"), py::arg("n_replicas"), py::arg("seed"),
        py::arg("stream") = 0, py::call_guard<py::gil_scoped_release>());

  py::class_<NinjaStats>(m, "NinjaStats")
      .def_readonly("n_runs", &NinjaStats::n_runs)
      .def_readonly("level_counts", &NinjaStats::level_counts)
      .def_readonly("label_level_counts", &NinjaStats::label_level_counts)
      .def("all_labels_right_frequency", &NinjaStats::all_labels_right_frequency)
      .def("conditional_ninja_left", &NinjaStats::conditional_ninja_left);

  m.def("estimate_ninja",
        [](int N, const std::vector<int>& xs, int ninja_start, long long n,
           std::uint64_t seed, std::uint64_t stream) {
          return estimate_ninja(N, SiteSet(xs), ninja_start, n, RngStream(seed, stream));
        },
        py::arg("N"), py::arg("xs"), py::arg("ninja_start"), py::arg("n_replicas"),
        py::arg("seed"), py::arg("stream") = 0, py::call_guard<py::gil_scoped_release>());

  // The replica pool calls the task from worker threads, each of which takes
  // the GIL for its call; the caller must not hold it meanwhile.
  m.def("run_replicas",
        [](const std::function<double(RngStream&)>& task, long long n,
           std::uint64_t seed, std::uint64_t stream) {
          return run_replicas(task, n, RngStream(seed, stream));
        },
        py::arg("task"), py::arg("n_replicas"), py::arg("seed"), py::arg("stream") = 0,
        py::call_guard<py::gil_scoped_release>());

  py::class_<CheckResult>(m, "CheckResult")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("measured", &CheckResult::measured)
      .def_readonly("tolerance", &CheckResult::tolerance)
      .def_readonly("pass_", &CheckResult::pass)
      .def_readonly("detail", &CheckResult::detail);

  py::class_<SuiteReport>(m, "SuiteReport")
      .def_readonly("suite", &SuiteReport::suite)
      .def_readonly("checks", &SuiteReport::checks)
      .def("all_pass", &SuiteReport::all_pass);

  m.def("verify_mixture", &verify_mixture, py::arg("tol_entry") = 1e-9);
  m.def("verify_formulas", &verify_formulas, py::arg("max_n") = 8,
        py::arg("tol_product") = 1e-12, py::arg("tol_level") = 1e-10,
        py::arg("tol_corr") = 1e-9);
  m.def("verify_duality", &verify_duality, py::arg("tol") = 1e-12);
  m.def("verify_martingales", &verify_martingales, py::arg("max_n") = 6,
        py::arg("tol") = 1e-12);
  m.def("verify_ninja", &verify_ninja, py::arg("max_n") = 7, py::arg("tol") = 1e-12);
  m.def("verify_monte_carlo", &verify_monte_carlo, py::arg("seed"), py::arg("stream"),
        py::arg("n_replicas") = 100000);
}
