#include "sepness/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sepness {

namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }
bool open_unit(double v) { return std::isfinite(v) && v > 0.0 && v < 1.0; }

}  // namespace

int OccupancyConfig::count() const { return std::popcount(bits); }

OccupancyConfig make_config(std::uint64_t bits, int n_sites) {
  if (n_sites < 1 || n_sites > kMaxSimSites)
    throw parameter_error("config size out of range: " + std::to_string(n_sites));
  if (n_sites < 64 && (bits >> n_sites) != 0)
    throw parameter_error("configuration bits exceed lattice size");
  return OccupancyConfig{bits, n_sites};
}

int DualState::bulk_count() const { return std::popcount(bulk); }

SiteSet::SiteSet(std::vector<int> s) : sites(std::move(s)) {
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i] < 1) throw parameter_error("site indices start at 1");
    if (i > 0 && sites[i] <= sites[i - 1])
      throw parameter_error("sites must be strictly increasing");
  }
}

bool SiteSet::contains(int site) const {
  return std::binary_search(sites.begin(), sites.end(), site);
}

std::uint64_t SiteSet::mask() const {
  std::uint64_t m = 0;
  for (int s : sites) {
    if (s > kMaxSimSites) throw parameter_error("site index exceeds bitmask capacity");
    m |= std::uint64_t{1} << (s - 1);
  }
  return m;
}

SiteSet SiteSet::from_mask(std::uint64_t mask) {
  SiteSet out;
  while (mask) {
    int bit = std::countr_zero(mask);
    out.sites.push_back(bit + 1);
    mask &= mask - 1;
  }
  return out;
}

std::string to_string(const SiteSet& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.sites.size(); ++i) {
    if (i) os << ',';
    os << s.sites[i];
  }
  os << '}';
  return os.str();
}

GraphSpec homogeneous_segment(int n_sites, double omega_left, double omega_right,
                              double rho_left, double rho_right) {
  if (n_sites < 1) throw parameter_error("segment needs at least one bulk site");
  if (!finite_positive(omega_left) || !finite_positive(omega_right))
    throw parameter_error("reservoir conductances must be positive");
  if (!open_unit(rho_left) || !open_unit(rho_right))
    throw parameter_error("reservoir densities must lie strictly inside (0,1)");
  GraphSpec g;
  g.n_sites = n_sites;
  g.omega_left = omega_left;
  g.omega_right = omega_right;
  g.rho_left = rho_left;
  g.rho_right = rho_right;
  for (int x = 1; x < n_sites; ++x) g.edges.push_back({x, x + 1, 1.0});
  return g;
}

GraphSpec from_abgd(int n_sites, const AbgdParams& p) {
  if (!finite_positive(p.alpha) || !finite_positive(p.beta) ||
      !finite_positive(p.gamma) || !finite_positive(p.delta))
    throw parameter_error("alpha, beta, gamma, delta must all be positive");
  const double rho_l = p.alpha / (p.alpha + p.gamma);
  const double rho_r = p.delta / (p.delta + p.beta);
  const double omega_l = 1.0 / (p.alpha + p.gamma);
  const double omega_r = 1.0 / (p.delta + p.beta);
  return homogeneous_segment(n_sites, omega_l, omega_r, rho_l, rho_r);
}

AbgdParams to_abgd(const GraphSpec& g) {
  AbgdParams p;
  p.alpha = g.rho_left / g.omega_left;
  p.gamma = (1.0 - g.rho_left) / g.omega_left;
  p.delta = g.rho_right / g.omega_right;
  p.beta = (1.0 - g.rho_right) / g.omega_right;
  return p;
}

std::vector<SiteSet> subsets_of(const SiteSet& sites) {
  const int k = sites.size();
  if (k > kMaxEnumSites) throw capacity_error("too many sites to enumerate subsets");
  std::vector<SiteSet> out;
  out.reserve(std::size_t{1} << k);
  for (std::uint64_t t = 0; t < (std::uint64_t{1} << k); ++t) {
    SiteSet s;
    for (int i = 0; i < k; ++i)
      if ((t >> i) & 1u) s.sites.push_back(sites.sites[i]);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> validate(const GraphSpec& g) {
  std::vector<std::string> diags;
  if (g.n_sites < 1) {
    diags.push_back("n_sites must be at least 1");
    return diags;
  }
  if (!finite_positive(g.omega_left)) diags.push_back("non-positive left conductance");
  if (!finite_positive(g.omega_right)) diags.push_back("non-positive right conductance");
  if (!open_unit(g.rho_left)) diags.push_back("left density outside (0,1)");
  if (!open_unit(g.rho_right)) diags.push_back("right density outside (0,1)");

  std::set<std::pair<int, int>> seen;
  for (const Edge& e : g.edges) {
    if (e.x < 1 || e.x > g.n_sites || e.y < 1 || e.y > g.n_sites) {
      diags.push_back("edge endpoint out of range: {" + std::to_string(e.x) + "," +
                      std::to_string(e.y) + "}");
      continue;
    }
    if (e.x == e.y) {
      diags.push_back("self-loop at site " + std::to_string(e.x));
      continue;
    }
    auto key = std::minmax(e.x, e.y);
    if (!seen.insert(key).second)
      diags.push_back("duplicate edge {" + std::to_string(key.first) + "," +
                      std::to_string(key.second) + "}");
    if (!finite_positive(e.weight))
      diags.push_back("non-positive conductance on edge {" + std::to_string(e.x) + "," +
                      std::to_string(e.y) + "}");
  }

  // Connectivity over the bulk graph alone (reservoir couplings do not help).
  if (g.n_sites > 1) {
    std::vector<std::vector<int>> nbr(g.n_sites + 1);
    for (const Edge& e : g.edges) {
      if (e.x >= 1 && e.x <= g.n_sites && e.y >= 1 && e.y <= g.n_sites && e.x != e.y) {
        nbr[e.x].push_back(e.y);
        nbr[e.y].push_back(e.x);
      }
    }
    std::vector<char> reached(g.n_sites + 1, 0);
    std::vector<int> stack{1};
    reached[1] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : nbr[v])
        if (!reached[w]) {
          reached[w] = 1;
          stack.push_back(w);
        }
    }
    for (int v = 1; v <= g.n_sites; ++v)
      if (!reached[v]) {
        diags.push_back("not connected");
        break;
      }
  }
  return diags;
}

void require_valid(const GraphSpec& g) {
  auto diags = validate(g);
  if (diags.empty()) return;
  std::string msg = "invalid graph:";
  for (const auto& d : diags) msg += " " + d + ";";
  throw parameter_error(msg);
}

std::string graph_to_json(const GraphSpec& g) {
  nlohmann::json j;
  j["n_sites"] = g.n_sites;
  auto edges = nlohmann::json::array();
  for (const Edge& e : g.edges) edges.push_back({e.x, e.y, e.weight});
  j["edges"] = edges;
  j["omega_left"] = g.omega_left;
  j["omega_right"] = g.omega_right;
  j["rho_left"] = g.rho_left;
  j["rho_right"] = g.rho_right;
  return j.dump();
}

GraphSpec graph_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parameter_error(std::string("graph JSON parse failure: ") + e.what());
  }
  GraphSpec g;
  try {
    g.n_sites = j.at("n_sites").get<int>();
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3)
        throw parameter_error("each edge must be [x, y, weight]");
      g.edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<double>()});
    }
    g.omega_left = j.at("omega_left").get<double>();
    g.omega_right = j.at("omega_right").get<double>();
    g.rho_left = j.at("rho_left").get<double>();
    g.rho_right = j.at("rho_right").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw parameter_error(std::string("graph JSON missing field: ") + e.what());
  }
  return g;
}

std::string graph_hash(const GraphSpec& g) {
  const std::string text = graph_to_json(g);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GraphSpec reversed(const GraphSpec& g) {
  GraphSpec r = g;
  std::swap(r.omega_left, r.omega_right);
  std::swap(r.rho_left, r.rho_right);
  for (Edge& e : r.edges) {
    e.x = g.n_sites + 1 - e.x;
    e.y = g.n_sites + 1 - e.y;
    if (e.x > e.y) std::swap(e.x, e.y);
  }
  return r;
}

std::vector<std::vector<std::pair<int, double>>> adjacency(const GraphSpec& g) {
  std::vector<std::vector<std::pair<int, double>>> adj(g.n_sites + 1);
  for (const Edge& e : g.edges) {
    adj[e.x].push_back({e.y, e.weight});
    adj[e.y].push_back({e.x, e.weight});
  }
  return adj;
}

bool is_homogeneous_segment(const GraphSpec& g) {
  if (static_cast<int>(g.edges.size()) != g.n_sites - 1) return false;
  std::vector<char> present(g.n_sites + 1, 0);
  for (const Edge& e : g.edges) {
    auto [a, b] = std::minmax(e.x, e.y);
    if (b != a + 1 || e.weight != 1.0) return false;
    if (a < 1 || b > g.n_sites || present[a]) return false;
    present[a] = 1;
  }
  return true;
}

}  // namespace sepness
