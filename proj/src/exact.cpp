#include "sepness/exact.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <bit>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "sepness/errors.hpp"

namespace sepness {

namespace {

constexpr int kDenseSolveCap = 4096;
constexpr std::uint64_t kDualStateCap = std::uint64_t{1} << 20;

// All bitmasks over n bits with the given popcount, in increasing order.
std::vector<std::uint64_t> masks_with_count(int n, int count) {
  std::vector<std::uint64_t> out;
  if (count == 0) {
    out.push_back(0);
    return out;
  }
  if (count > n) return out;
  std::uint64_t m = (std::uint64_t{1} << count) - 1;
  const std::uint64_t limit = std::uint64_t{1} << n;
  while (m < limit) {
    out.push_back(m);
    std::uint64_t c = m & -m;
    std::uint64_t r = m + c;
    m = (((r ^ m) >> 2) / c) | r;
    if (c == 0) break;
  }
  return out;
}

// Per-layer absorbing solve for the dual chain. Unknowns live on the bulk
// masks of one particle count; absorptions couple to the layer below, which
// is already solved and therefore enters the right-hand side. The layer
// matrix is the (negated) symmetric hopping Laplacian plus the absorption
// rates on the diagonal: SPD, solved dense by LU under 4096 and by conjugate
// gradient above (tolerance 1e-12, at most 10*dimension iterations).
class DualLayerSolver {
 public:
  DualLayerSolver(const GraphSpec& g, int n_cols)
      : g_(g), adj_(adjacency(g)), n_cols_(n_cols) {}

  // rhs_from_below(mask, col) must return the coupling
  //   omega_L 1{1 in mask} f(mask\1, .) + omega_R 1{n in mask} f(mask\n, .)
  // assembled from the previously solved layer.
  template <typename RhsFn>
  Eigen::MatrixXd solve_layer(const std::vector<std::uint64_t>& masks,
                              const std::unordered_map<std::uint64_t, int>& index,
                              RhsFn rhs_from_below) const {
    const int dim = static_cast<int>(masks.size());
    const int n = g_.n_sites;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim, n_cols_);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(dim) * (n + 2));

    for (int r = 0; r < dim; ++r) {
      const std::uint64_t m = masks[r];
      double out_rate = 0.0;
      std::uint64_t rest = m;
      while (rest) {
        const int x = std::countr_zero(rest) + 1;
        rest &= rest - 1;
        for (auto [y, w] : adj_[x]) {
          if (m & (std::uint64_t{1} << (y - 1))) continue;  // exclusion
          out_rate += w;
          const std::uint64_t target = (m ^ (std::uint64_t{1} << (x - 1))) |
                                       (std::uint64_t{1} << (y - 1));
          trips.emplace_back(r, index.at(target), -w);
        }
      }
      if (m & 1u) out_rate += g_.omega_left;
      if (m & (std::uint64_t{1} << (n - 1))) out_rate += g_.omega_right;
      trips.emplace_back(r, r, out_rate);
      for (int c = 0; c < n_cols_; ++c) rhs(r, c) = rhs_from_below(m, c);
    }

    Eigen::SparseMatrix<double> s(dim, dim);
    s.setFromTriplets(trips.begin(), trips.end());

    if (dim <= kDenseSolveCap) {
      Eigen::MatrixXd dense(s);
      return Eigen::PartialPivLU<Eigen::MatrixXd>(dense).solve(rhs);
    }
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(10L * dim);
    cg.compute(s);
    Eigen::MatrixXd sol = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
      throw numerical_error("conjugate gradient failed to converge on dual layer");
    return sol;
  }

 private:
  const GraphSpec& g_;
  std::vector<std::vector<std::pair<int, double>>> adj_;
  int n_cols_;
};

void check_absorption_capacity(const GraphSpec& g, int k, int n_cols) {
  std::uint64_t total = 0;
  double binom = 1.0;
  for (int j = 0; j <= k; ++j) {
    total += static_cast<std::uint64_t>(binom) * n_cols;
    binom = binom * (g.n_sites - j) / (j + 1);
    if (total > kDualStateCap)
      throw capacity_error("dual state space exceeds the 2^20 cap");
  }
}

}  // namespace

void RateMatrix::add(int row, int col, double rate) {
  if (rate == 0.0) return;
  for (auto& [c, r] : rows[row])
    if (c == col) {
      r += rate;
      return;
    }
  rows[row].push_back({col, rate});
}

double RateMatrix::out_rate(int row) const {
  double s = 0.0;
  for (auto& [c, r] : rows[row]) s += r;
  return s;
}

RateMatrix build_sep_generator(const GraphSpec& g) {
  require_valid(g);
  if (g.n_sites > kMaxEnumSites)
    throw capacity_error("configuration space exceeds 2^" + std::to_string(kMaxEnumSites));
  const int n = g.n_sites;
  const std::uint64_t dim = std::uint64_t{1} << n;
  RateMatrix q(static_cast<int>(dim));
  const std::uint64_t b_left = 1u;
  const std::uint64_t b_right = std::uint64_t{1} << (n - 1);

  for (std::uint64_t m = 0; m < dim; ++m) {
    const int row = static_cast<int>(m);
    for (const Edge& e : g.edges) {
      const std::uint64_t bx = std::uint64_t{1} << (e.x - 1);
      const std::uint64_t by = std::uint64_t{1} << (e.y - 1);
      const bool ox = m & bx, oy = m & by;
      if (ox != oy) q.add(row, static_cast<int>(m ^ bx ^ by), e.weight);
    }
    q.add(row, static_cast<int>(m ^ b_left),
          (m & b_left) ? g.omega_left * (1.0 - g.rho_left) : g.omega_left * g.rho_left);
    q.add(row, static_cast<int>(m ^ b_right),
          (m & b_right) ? g.omega_right * (1.0 - g.rho_right)
                        : g.omega_right * g.rho_right);
  }
  return q;
}

std::vector<double> stationary_distribution(const RateMatrix& q) {
  const int dim = q.dimension;
  if (dim < 1) throw parameter_error("empty generator");
  Eigen::VectorXd pi(dim);

  // pi Q = 0 with one balance equation traded for sum(pi) = 1.
  if (dim <= kDenseSolveCap) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (auto [j, rate] : q.rows[i]) a(j, i) += rate;
      a(i, i) -= q.out_rate(i);
    }
    a.row(dim - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    b(dim - 1) = 1.0;
    pi = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(b);
  } else {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < dim; ++i) {
      for (auto [j, rate] : q.rows[i])
        if (j != dim - 1) trips.emplace_back(j, i, rate);
      if (i != dim - 1) trips.emplace_back(i, i, -q.out_rate(i));
    }
    for (int i = 0; i < dim; ++i) trips.emplace_back(dim - 1, i, 1.0);
    Eigen::SparseMatrix<double> a(dim, dim);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
      throw numerical_error("sparse LU factorization of the balance system failed");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    b(dim - 1) = 1.0;
    pi = lu.solve(b);
  }

  // Residual of the defining equations.
  Eigen::VectorXd res = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    for (auto [j, rate] : q.rows[i]) res(j) += pi(i) * rate;
    res(i) -= pi(i) * q.out_rate(i);
  }
  const double residual = res.cwiseAbs().maxCoeff();
  if (!(residual < 1e-9))
    throw numerical_error("stationary solve residual " + std::to_string(residual) +
                          " exceeds 1e-9");
  return std::vector<double>(pi.data(), pi.data() + dim);
}

StationaryDistribution stationary_distribution(const GraphSpec& g) {
  StationaryDistribution out;
  out.graph = g;
  out.probs = stationary_distribution(build_sep_generator(g));
  return out;
}

AbsorptionTable absorption_distribution(const GraphSpec& g, const SiteSet& start) {
  require_valid(g);
  for (int x : start.sites)
    if (x > g.n_sites) throw parameter_error("start site out of range");
  const int k = start.size();
  AbsorptionTable table;
  table.start = start;
  if (k == 0) {
    table.probs = {1.0};
    return table;
  }
  check_absorption_capacity(g, k, k + 1);

  // u_l(mask): probability that exactly l of the particles currently in the
  // bulk end at the right endpoint. Absorbed counts enter only as an offset,
  // so the final table is read off the start mask directly.
  DualLayerSolver solver(g, k + 1);
  const std::uint64_t b_left = 1u;
  const std::uint64_t b_right = std::uint64_t{1} << (g.n_sites - 1);

  std::vector<std::uint64_t> below_masks = masks_with_count(g.n_sites, 0);
  std::unordered_map<std::uint64_t, int> below_index{{0u, 0}};
  Eigen::MatrixXd below = Eigen::MatrixXd::Zero(1, k + 1);
  below(0, 0) = 1.0;

  Eigen::MatrixXd current;
  std::unordered_map<std::uint64_t, int> index;
  for (int j = 1; j <= k; ++j) {
    auto masks = masks_with_count(g.n_sites, j);
    index.clear();
    for (int r = 0; r < static_cast<int>(masks.size()); ++r) index[masks[r]] = r;
    current = solver.solve_layer(
        masks, index, [&](std::uint64_t m, int l) -> double {
          double v = 0.0;
          if (m & b_left) v += g.omega_left * below(below_index.at(m ^ b_left), l);
          if ((m & b_right) && l >= 1)
            v += g.omega_right * below(below_index.at(m ^ b_right), l - 1);
          return v;
        });
    below = current;
    below_index = index;
    below_masks = std::move(masks);
  }

  const int row = below_index.at(start.mask());
  table.probs.assign(k + 1, 0.0);
  for (int l = 0; l <= k; ++l) table.probs[l] = below(row, l);

  double sum = 0.0;
  for (double p : table.probs) sum += p;
  if (std::abs(sum - 1.0) > 1e-8)
    throw numerical_error("absorption distribution sums to " + std::to_string(sum));
  return table;
}

std::vector<double> all_absorbed_at_right_table(const GraphSpec& g, int max_count) {
  require_valid(g);
  if (g.n_sites > kMaxEnumSites) throw capacity_error("subset table capped at 2^20 masks");
  max_count = std::min(max_count, g.n_sites);
  check_absorption_capacity(g, max_count, 1);

  std::vector<double> table(std::uint64_t{1} << g.n_sites, 0.0);
  table[0] = 1.0;

  // Any absorption on the left kills the event, so it carries value zero and
  // only the right absorptions feed the layer below.
  DualLayerSolver solver(g, 1);
  const std::uint64_t b_right = std::uint64_t{1} << (g.n_sites - 1);

  for (int j = 1; j <= max_count; ++j) {
    auto masks = masks_with_count(g.n_sites, j);
    std::unordered_map<std::uint64_t, int> index;
    for (int r = 0; r < static_cast<int>(masks.size()); ++r) index[masks[r]] = r;
    Eigen::MatrixXd layer =
        solver.solve_layer(masks, index, [&](std::uint64_t m, int) -> double {
          if (m & b_right) return g.omega_right * table[m ^ b_right];
          return 0.0;
        });
    for (int r = 0; r < static_cast<int>(masks.size()); ++r) table[masks[r]] = layer(r, 0);
  }
  return table;
}

double all_absorbed_at_right(const GraphSpec& g, const SiteSet& start) {
  require_valid(g);
  for (int x : start.sites)
    if (x > g.n_sites) throw parameter_error("start site out of range");
  const int k = start.size();
  if (k == 0) return 1.0;
  return all_absorbed_at_right_table(g, k)[start.mask()];
}

std::vector<std::pair<DualState, double>> dual_transitions(const GraphSpec& g,
                                                           const DualState& s) {
  std::vector<std::pair<DualState, double>> out;
  const std::uint64_t m = s.bulk;
  for (const Edge& e : g.edges) {
    const std::uint64_t bx = std::uint64_t{1} << (e.x - 1);
    const std::uint64_t by = std::uint64_t{1} << (e.y - 1);
    const bool ox = m & bx, oy = m & by;
    if (ox != oy) {
      DualState t = s;
      t.bulk = m ^ bx ^ by;
      out.push_back({t, e.weight});
    }
  }
  if (m & 1u) {
    DualState t = s;
    t.bulk = m ^ 1u;
    t.absorbed_0 += 1;
    out.push_back({t, g.omega_left});
  }
  const std::uint64_t b_right = std::uint64_t{1} << (g.n_sites - 1);
  if (m & b_right) {
    DualState t = s;
    t.bulk = m ^ b_right;
    t.absorbed_N += 1;
    out.push_back({t, g.omega_right});
  }
  return out;
}

double check_generator_duality(const GraphSpec& g, int max_dual_particles) {
  require_valid(g);
  if (g.n_sites > 10 || max_dual_particles > 4)
    throw capacity_error("duality check capped at 10 sites and 4 dual particles");
  const int n = g.n_sites;
  const std::uint64_t n_configs = std::uint64_t{1} << n;
  const RateMatrix q = build_sep_generator(g);

  auto dual_value = [&](std::uint64_t eta, const DualState& xi) -> double {
    if ((eta & xi.bulk) != xi.bulk) return 0.0;
    return std::pow(g.rho_left, xi.absorbed_0) * std::pow(g.rho_right, xi.absorbed_N);
  };

  double worst = 0.0;
  for (int count = 0; count <= max_dual_particles; ++count) {
    for (std::uint64_t bulk : masks_with_count(n, count)) {
      for (int a0 = 0; a0 <= 1; ++a0) {
        for (int aN = 0; aN <= 1; ++aN) {
          DualState xi{bulk, n, a0, aN};
          const auto moves = dual_transitions(g, xi);
          for (std::uint64_t eta = 0; eta < n_configs; ++eta) {
            const double d0 = dual_value(eta, xi);
            double lhs = 0.0;
            for (auto [target, rate] : q.rows[static_cast<int>(eta)])
              lhs += rate * (dual_value(static_cast<std::uint64_t>(target), xi) - d0);
            double rhs = 0.0;
            for (const auto& [target, rate] : moves)
              rhs += rate * (dual_value(eta, target) - d0);
            worst = std::max(worst, std::abs(lhs - rhs));
          }
        }
      }
    }
  }
  return worst;
}

double check_two_particle_martingales(int N, double omega_l, double omega_r) {
  if (N < 3) throw parameter_error("two-particle chain needs N >= 3");
  if (!(omega_l > 0.0) || !(omega_r > 0.0))
    throw parameter_error("boundary conductances must be positive");

  auto h = [&](int z) -> double {
    if (z == 0) return 0.0;
    if (z == N) return 1.0 / omega_l + 1.0 / omega_r + N - 2;
    return 1.0 / omega_l + z - 1;
  };

  // Jump chain of the ordered pair (no swapping): the lower particle can
  // never pass the upper one.
  struct Move {
    int a, b;
    double rate;
  };
  auto moves_from = [&](int a, int b) -> std::vector<Move> {
    std::vector<Move> mv;
    const bool a_bulk = a >= 1 && a <= N - 1;
    const bool b_bulk = b >= 1 && b <= N - 1;
    if (a_bulk && b_bulk) {
      mv.push_back({a - 1, b, a == 1 ? omega_l : 1.0});
      if (a + 1 != b) mv.push_back({a + 1, b, 1.0});
      if (b - 1 != a) mv.push_back({a, b - 1, 1.0});
      mv.push_back({a, b + 1, b == N - 1 ? omega_r : 1.0});
    } else if (a == 0 && b_bulk) {
      mv.push_back({0, b - 1, b == 1 ? omega_l : 1.0});
      mv.push_back({0, b + 1, b == N - 1 ? omega_r : 1.0});
    } else if (b == N && a_bulk) {
      mv.push_back({a - 1, N, a == 1 ? omega_l : 1.0});
      mv.push_back({a + 1, N, a == N - 1 ? omega_r : 1.0});
    }
    return mv;
  };

  double worst = 0.0;
  for (int a = 0; a <= N; ++a) {
    for (int b = a; b <= N; ++b) {
      const bool a_bulk = a >= 1 && a <= N - 1;
      const bool b_bulk = b >= 1 && b <= N - 1;
      const bool valid = (a < b && (a_bulk || a == 0) && (b_bulk || b == N)) ||
                         (a == b && !a_bulk);
      if (!valid) continue;
      const auto mv = moves_from(a, b);
      if (mv.empty()) continue;  // fully absorbed: one-step identity is exact

      double total = 0.0;
      for (const Move& m : mv) total += m.rate;
      double e_sum = 0.0, e_diff = 0.0, e_prod = 0.0;
      for (const Move& m : mv) {
        const double p = m.rate / total;
        e_sum += p * (h(m.a) + h(m.b));
        e_diff += p * (h(m.b) - h(m.a));
        e_prod += p * h(m.a) * h(m.b);
      }

      // Increment of the compensator D at a nearest-neighbor bulk pair:
      // 2 / (rate of the lower-left move + rate of the upper-right move).
      double incr = 0.0;
      if (a_bulk && b_bulk && b - a == 1) {
        const double r_left = (a == 1) ? omega_l : 1.0;
        const double r_right = (b == N - 1) ? omega_r : 1.0;
        incr = 2.0 / (r_left + r_right);
      }

      worst = std::max(worst, std::abs(e_sum - (h(a) + h(b))));
      worst = std::max(worst, std::abs(e_diff - incr - (h(b) - h(a))));
      worst = std::max(worst, std::abs(e_prod + 0.5 * incr - h(a) * h(b)));
    }
  }
  return worst;
}

std::string StationaryDistribution::to_json() const {
  nlohmann::json j;
  j["graph"] = nlohmann::json::parse(graph_to_json(graph));
  j["graph_hash"] = sepness::graph_hash(graph);
  j["probs"] = probs;
  return j.dump();
}

std::string StationaryDistribution::to_csv() const {
  std::ostringstream os;
  os << "config_bits,probability\n";
  os.precision(17);
  for (std::size_t m = 0; m < probs.size(); ++m) os << m << ',' << probs[m] << '\n';
  return os.str();
}

std::string AbsorptionTable::to_json() const {
  nlohmann::json j;
  j["start"] = start.sites;
  j["probs"] = probs;
  return j.dump();
}

}  // namespace sepness
