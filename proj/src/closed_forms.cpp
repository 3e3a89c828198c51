#include "sepness/closed_forms.hpp"

#include <gmpxx.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "json.hpp"
#include "sepness/errors.hpp"

namespace sepness {

namespace {

// Exact rational arithmetic is used for the product / inclusion-exclusion
// formulas whenever N <= 12; the alternating sums are the cancellation risk
// that motivates it. Larger systems fall back to double precision.
constexpr int kRationalCap = 12;

inline mpq_class rat(double v) {
  mpq_class q;
  mpq_set_d(q.get_mpq_t(), v);
  return q;
}

inline double to_double(double v) { return v; }
inline double to_double(const mpq_class& v) { return v.get_d(); }

template <class S>
S from_double(double v);
template <>
double from_double<double>(double v) {
  return v;
}
template <>
mpq_class from_double<mpq_class>(double v) {
  return rat(v);
}

template <class S>
S pow_int(S base, int e) {
  S out = S(1);
  for (int i = 0; i < e; ++i) out *= base;
  return out;
}

template <class S>
S h_value(int N, const S& inv_wl, const S& inv_wr, int x) {
  if (x == 0) return S(0);
  if (x == N) return inv_wl + inv_wr + S(N - 2);
  return inv_wl + S(x - 1);
}

// prod_i (h(x_i) - (i-1)) / (h(N) - (i-1)) over an increasing site list.
template <class S>
S product_formula(int N, const S& inv_wl, const S& inv_wr, const std::vector<int>& xs) {
  const S hN = h_value(N, inv_wl, inv_wr, N);
  S out(1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const S shift = S(static_cast<int>(i));
    out *= (h_value(N, inv_wl, inv_wr, xs[i]) - shift) / (hN - shift);
  }
  return out;
}

template <class S>
S level_formula(int N, const S& inv_wl, const S& inv_wr, const std::vector<int>& xs,
                int level) {
  const int n = static_cast<int>(xs.size());
  // binomial(k, level) with alternating sign, tabulated once
  std::vector<S> coef(n + 1, S(0));
  for (int k = level; k <= n; ++k) {
    S binom(1);
    for (int i = 0; i < level; ++i) binom = binom * S(k - i) / S(i + 1);
    coef[k] = ((k - level) % 2 == 0) ? binom : -binom;
  }
  S total(0);
  std::vector<int> subset;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    const int k = std::popcount(m);
    if (k < level) continue;
    subset.clear();
    for (int i = 0; i < n; ++i)
      if ((m >> i) & 1u) subset.push_back(xs[i]);
    total += coef[k] * product_formula(N, inv_wl, inv_wr, subset);
  }
  return total;
}

// In-place signed superset transform: on return,
// values[I] = sum_{J >= I} (-1)^{|J\I|} input[J].
template <class S>
void superset_alternating_transform(std::vector<S>& values, int n) {
  for (int b = 0; b < n; ++b) {
    const std::uint64_t bit = std::uint64_t{1} << b;
    for (std::uint64_t m = 0; m < values.size(); ++m)
      if (!(m & bit)) values[m] -= values[m | bit];
  }
}

template <class S>
std::vector<S> closed_form_weights(const GraphSpec& g) {
  const int n = g.n_sites;
  const int N = n + 1;
  const S inv_wl = S(1) / from_double<S>(g.omega_left);
  const S inv_wr = S(1) / from_double<S>(g.omega_right);
  std::vector<S> values(std::uint64_t{1} << n);
  std::vector<int> xs;
  for (std::uint64_t m = 0; m < values.size(); ++m) {
    xs.clear();
    for (int i = 0; i < n; ++i)
      if ((m >> i) & 1u) xs.push_back(i + 1);
    values[m] = product_formula(N, inv_wl, inv_wr, xs);
  }
  superset_alternating_transform(values, n);
  return values;
}

void check_sites_range(int N, const SiteSet& xs) {
  for (int x : xs.sites)
    if (x < 1 || x > N - 1)
      throw parameter_error("site " + std::to_string(x) + " outside 1.." +
                            std::to_string(N - 1));
}

// Shared mixture evaluation. Route A sums component by component; route B
// regroups by (occupied-overlap, empty-overlap) class counts first. The two
// orders only differ by floating-point rounding.
template <class S>
std::pair<std::vector<double>, double> mixture_eval(const std::vector<S>& weights,
                                                    int n, const S& rho_l,
                                                    const S& rho_r) {
  const std::uint64_t n_conf = std::uint64_t{1} << n;
  const S one(1);
  const S ql = one - rho_l;
  const S qr = one - rho_r;
  std::vector<S> pow_rl(n + 1), pow_rr(n + 1), pow_ql(n + 1), pow_qr(n + 1);
  for (int i = 0; i <= n; ++i) {
    pow_rl[i] = pow_int(rho_l, i);
    pow_rr[i] = pow_int(rho_r, i);
    pow_ql[i] = pow_int(ql, i);
    pow_qr[i] = pow_int(qr, i);
  }

  std::vector<double> probs(n_conf);
  double worst_gap = 0.0;
  std::vector<S> class_sum((n + 1) * (n + 1));
  for (std::uint64_t eta = 0; eta < n_conf; ++eta) {
    const int occupied = std::popcount(eta);
    S direct(0);
    for (auto& c : class_sum) c = S(0);
    for (std::uint64_t i_mask = 0; i_mask < n_conf; ++i_mask) {
      const int l = std::popcount(i_mask & eta);
      const int k = std::popcount(i_mask) - l;
      direct += weights[i_mask] * pow_rr[l] * pow_qr[k] * pow_rl[occupied - l] *
                pow_ql[n - occupied - k];
      class_sum[l * (n + 1) + k] += weights[i_mask];
    }
    S grouped(0);
    for (int l = 0; l <= occupied; ++l)
      for (int k = 0; k <= n - occupied; ++k)
        grouped += pow_rr[l] * pow_rl[occupied - l] * pow_qr[k] *
                   pow_ql[n - occupied - k] * class_sum[l * (n + 1) + k];
    const double a = to_double(direct);
    const double b = to_double(grouped);
    worst_gap = std::max(worst_gap, std::abs(a - b));
    probs[eta] = a;
  }
  return {probs, worst_gap};
}

bool use_rational(const GraphSpec& g) {
  return is_homogeneous_segment(g) && g.n_sites + 1 <= kRationalCap;
}

}  // namespace

double harmonic_h(int N, double omega_l, double omega_r, int x) {
  if (N < 2) throw parameter_error("segment size N must be at least 2");
  if (!(omega_l > 0.0) || !(omega_r > 0.0))
    throw parameter_error("conductances must be positive");
  if (x < 0 || x > N) throw parameter_error("harmonic argument outside 0..N");
  if (N <= kRationalCap)
    return to_double(h_value<mpq_class>(N, rat(1.0) / rat(omega_l),
                                        rat(1.0) / rat(omega_r), x));
  return h_value<double>(N, 1.0 / omega_l, 1.0 / omega_r, x);
}

double absorption_product(int N, double omega_l, double omega_r, const SiteSet& xs) {
  if (N < 2) throw parameter_error("segment size N must be at least 2");
  if (!(omega_l > 0.0) || !(omega_r > 0.0))
    throw parameter_error("conductances must be positive");
  check_sites_range(N, xs);
  if (N <= kRationalCap)
    return to_double(product_formula<mpq_class>(N, rat(1.0) / rat(omega_l),
                                                rat(1.0) / rat(omega_r), xs.sites));
  return product_formula<double>(N, 1.0 / omega_l, 1.0 / omega_r, xs.sites);
}

double absorption_level(int N, double omega_l, double omega_r, const SiteSet& xs,
                        int level) {
  if (N < 2) throw parameter_error("segment size N must be at least 2");
  if (!(omega_l > 0.0) || !(omega_r > 0.0))
    throw parameter_error("conductances must be positive");
  check_sites_range(N, xs);
  if (level < 0 || level > xs.size())
    throw parameter_error("level outside 0..|xs|");
  if (N <= kRationalCap)
    return to_double(level_formula<mpq_class>(N, rat(1.0) / rat(omega_l),
                                              rat(1.0) / rat(omega_r), xs.sites, level));
  return level_formula<double>(N, 1.0 / omega_l, 1.0 / omega_r, xs.sites, level);
}

double MixtureWeights::weight(const SiteSet& I) const { return weights.at(I.mask()); }

double MixtureWeights::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

std::string MixtureWeights::to_json() const {
  nlohmann::json j;
  j["n_sites"] = n_sites;
  auto arr = nlohmann::json::array();
  for (std::uint64_t m = 0; m < weights.size(); ++m) {
    nlohmann::json entry;
    entry["sites"] = SiteSet::from_mask(m).sites;
    entry["F"] = weights[m];
    arr.push_back(entry);
  }
  j["weights"] = arr;
  return j.dump();
}

std::string MixtureWeights::to_csv() const {
  std::ostringstream os;
  os << "sites;F\n";
  os.precision(17);
  for (std::uint64_t m = 0; m < weights.size(); ++m) {
    const auto sites = SiteSet::from_mask(m).sites;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      if (i) os << ',';
      os << sites[i];
    }
    os << ';' << weights[m] << '\n';
  }
  return os.str();
}

double mixture_weight(const GraphSpec& g, const SiteSet& I,
                      const AllAtRightOracle& oracle) {
  require_valid(g);
  if (g.n_sites > kMaxEnumSites) throw capacity_error("subset lattice exceeds 2^20");
  for (int x : I.sites)
    if (x > g.n_sites) throw parameter_error("site out of range");
  std::vector<int> complement;
  for (int x = 1; x <= g.n_sites; ++x)
    if (!I.contains(x)) complement.push_back(x);
  double total = 0.0;
  const std::uint64_t base = I.mask();
  for (std::uint64_t t = 0; t < (std::uint64_t{1} << complement.size()); ++t) {
    std::uint64_t m = base;
    for (std::size_t i = 0; i < complement.size(); ++i)
      if ((t >> i) & 1u) m |= std::uint64_t{1} << (complement[i] - 1);
    const double v = oracle(SiteSet::from_mask(m));
    total += (std::popcount(t) % 2 == 0) ? v : -v;
  }
  return total;
}

MixtureWeights mixture_weights(const GraphSpec& g) {
  require_valid(g);
  if (g.n_sites > kMaxEnumSites) throw capacity_error("subset lattice exceeds 2^20");
  MixtureWeights out;
  out.n_sites = g.n_sites;
  if (use_rational(g)) {
    auto w = closed_form_weights<mpq_class>(g);
    out.weights.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out.weights[i] = to_double(w[i]);
    return out;
  }
  if (is_homogeneous_segment(g)) {
    out.weights = closed_form_weights<double>(g);
    return out;
  }
  std::vector<double> values = all_absorbed_at_right_table(g, g.n_sites);
  superset_alternating_transform(values, g.n_sites);
  out.weights = std::move(values);
  return out;
}

StationaryDistribution mixture_measure(const GraphSpec& g) {
  require_valid(g);
  if (g.n_sites > kMaxEnumSites)
    throw capacity_error("full tabulation capped at 2^20 configurations");
  StationaryDistribution out;
  out.graph = g;

  double gap = 0.0;
  if (use_rational(g)) {
    auto w = closed_form_weights<mpq_class>(g);
    auto [probs, worst] =
        mixture_eval<mpq_class>(w, g.n_sites, rat(g.rho_left), rat(g.rho_right));
    out.probs = std::move(probs);
    gap = worst;
  } else {
    auto w = mixture_weights(g);
    auto [probs, worst] =
        mixture_eval<double>(w.weights, g.n_sites, g.rho_left, g.rho_right);
    out.probs = std::move(probs);
    gap = worst;
  }
  if (!(gap <= 1e-12))
    throw numerical_error("mixture assembly routes disagree by " + std::to_string(gap));
  return out;
}

double density_profile(const GraphSpec& g, int x) {
  require_valid(g);
  if (x < 1 || x > g.n_sites) throw parameter_error("site out of range");
  if (is_homogeneous_segment(g)) {
    const int N = g.n_sites + 1;
    const double ratio =
        harmonic_h(N, g.omega_left, g.omega_right, x) /
        harmonic_h(N, g.omega_left, g.omega_right, N);
    return g.rho_left + (g.rho_right - g.rho_left) * ratio;
  }
  SiteSet single;
  single.sites = {x};
  return g.rho_left + (g.rho_right - g.rho_left) * all_absorbed_at_right(g, single);
}

double two_point_correlation(int N, double omega_l, double omega_r, double rho_l,
                             double rho_r, int x, int y) {
  if (x >= y) throw parameter_error("pair correlation needs x < y");
  if (x < 1 || y > N - 1) throw parameter_error("sites outside 1..N-1");
  if (!(omega_l > 0.0) || !(omega_r > 0.0))
    throw parameter_error("conductances must be positive");
  if (N <= kRationalCap) {
    const mpq_class inv_wl = rat(1.0) / rat(omega_l);
    const mpq_class inv_wr = rat(1.0) / rat(omega_r);
    const mpq_class hx = h_value(N, inv_wl, inv_wr, x);
    const mpq_class hy = h_value(N, inv_wl, inv_wr, y);
    const mpq_class hN = h_value(N, inv_wl, inv_wr, N);
    const mpq_class gap = rat(rho_r) - rat(rho_l);
    return to_double(mpq_class(-gap * gap * hx * (hN - hy) / (hN * hN * (hN - 1))));
  }
  const double hx = harmonic_h(N, omega_l, omega_r, x);
  const double hy = harmonic_h(N, omega_l, omega_r, y);
  const double hN = harmonic_h(N, omega_l, omega_r, N);
  const double gap = rho_r - rho_l;
  return -gap * gap * hx * (hN - hy) / (hN * hN * (hN - 1.0));
}

namespace {

// Signed sum over ordered subsequences; the mask picks which points enter the
// depth-shifted product, the rest contribute single-particle factors. A
// length-j subsequence carries sign (-1)^(n-j): the centered product expands
// over E[prod_T (eta - rho_L)] = gap^|T| prod_l g_l(T), alternating in the
// size of the complement.
template <class S>
S psi_formula(int N, const S& inv_wl, const S& inv_wr, const std::vector<int>& xs) {
  const int n = static_cast<int>(xs.size());
  const S hN = h_value(N, inv_wl, inv_wr, N);
  S total(0);
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    S term(1);
    int depth = 0;
    for (int i = 0; i < n; ++i) {
      const S hx = h_value(N, inv_wl, inv_wr, xs[i]);
      if ((m >> i) & 1u) {
        term *= (hx - S(depth)) / (hN - S(depth));
        ++depth;
      } else {
        term *= hx / hN;
      }
    }
    total += ((n - depth) % 2 == 0) ? term : -term;
  }
  return total;
}

template <class S>
S n_point_value(int N, const S& inv_wl, const S& inv_wr, const S& rho_l,
                const S& rho_r, const std::vector<int>& xs, bool centered) {
  const int n = static_cast<int>(xs.size());
  const S gap = rho_r - rho_l;
  if (centered) {
    return pow_int(gap, n) * psi_formula(N, inv_wl, inv_wr, xs);
  }
  S total(0);
  std::vector<int> subset;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    subset.clear();
    for (int i = 0; i < n; ++i)
      if ((m >> i) & 1u) subset.push_back(xs[i]);
    const int j = static_cast<int>(subset.size());
    total += pow_int(rho_l, n - j) * pow_int(gap, j) *
             product_formula(N, inv_wl, inv_wr, subset);
  }
  return total;
}

}  // namespace

double n_point_correlation(int N, double omega_l, double omega_r, double rho_l,
                           double rho_r, const SiteSet& points, bool centered) {
  if (points.empty()) throw parameter_error("need at least one point");
  check_sites_range(N, points);
  if (!(omega_l > 0.0) || !(omega_r > 0.0))
    throw parameter_error("conductances must be positive");
  if (N <= kRationalCap)
    return to_double(n_point_value<mpq_class>(N, rat(1.0) / rat(omega_l),
                                              rat(1.0) / rat(omega_r), rat(rho_l),
                                              rat(rho_r), points.sites, centered));
  return n_point_value<double>(N, 1.0 / omega_l, 1.0 / omega_r, rho_l, rho_r,
                               points.sites, centered);
}

double n_point_correlation(const GraphSpec& g, const SiteSet& points, bool centered) {
  require_valid(g);
  if (points.empty()) throw parameter_error("need at least one point");
  for (int x : points.sites)
    if (x > g.n_sites) throw parameter_error("point out of range");

  // E[prod eta(x_i)] = sum_l rho_r^l rho_l^{n-l} P(l particles end right).
  auto moment = [&](const SiteSet& pts) -> double {
    if (pts.empty()) return 1.0;
    const auto table = absorption_distribution(g, pts);
    double v = 0.0;
    for (int l = 0; l <= pts.size(); ++l)
      v += std::pow(g.rho_right, l) * std::pow(g.rho_left, pts.size() - l) *
           table.probs[l];
    return v;
  };

  if (!centered) return moment(points);

  const int n = points.size();
  std::vector<double> means(n);
  for (int i = 0; i < n; ++i) {
    SiteSet single;
    single.sites = {points.sites[i]};
    means[i] = moment(single);
  }
  double total = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    SiteSet sub;
    double tail = 1.0;
    for (int i = 0; i < n; ++i) {
      if ((m >> i) & 1u)
        sub.sites.push_back(points.sites[i]);
      else
        tail *= -means[i];
    }
    total += moment(sub) * tail;
  }
  return total;
}

NinjaRecursionCheck ninja_recursion_residual(int N, const SiteSet& xs) {
  if (N < 2) throw parameter_error("segment size N must be at least 2");
  if (xs.empty()) throw parameter_error("need at least one start site");
  check_sites_range(N, xs);

  const int k = xs.size() - 1;
  const int top = xs.sites.back();
  NinjaRecursionCheck out;

  const GraphSpec big = homogeneous_segment(N - 1, 1.0, 1.0, 0.5, 0.5);
  out.lhs = all_absorbed_at_right(big, xs);

  SiteSet rest;
  rest.sites.assign(xs.sites.begin(), xs.sites.end() - 1);
  double tail = 1.0;
  if (!rest.empty()) {
    const GraphSpec small = homogeneous_segment(N - 2, 1.0, 1.0, 0.5, 0.5);
    tail = all_absorbed_at_right(small, rest);
  }
  out.rhs = (static_cast<double>(top - k) / N) * tail;
  out.residual = std::abs(out.lhs - out.rhs);
  return out;
}

}  // namespace sepness
