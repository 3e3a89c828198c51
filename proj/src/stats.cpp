#include "sepness/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

#include "sepness/errors.hpp"

namespace sepness {

namespace {
// Two-sided 99% quantile of the standard normal.
constexpr double kZ99 = 2.5758293035489004;
}  // namespace

bool McEstimate::covers(double truth, double k_sigma) const {
  return std::abs(mean - truth) <= k_sigma * stderr_of_mean;
}

void RunningStat::add(double x) {
  n += 1;
  const double delta = x - mean;
  mean += delta / static_cast<double>(n);
  m2 += delta * (x - mean);
}

void RunningStat::merge(const RunningStat& other) {
  if (other.n == 0) return;
  if (n == 0) {
    *this = other;
    return;
  }
  const double delta = other.mean - mean;
  const long long total = n + other.n;
  const double nf = static_cast<double>(n);
  const double of = static_cast<double>(other.n);
  mean += delta * of / static_cast<double>(total);
  m2 += other.m2 + delta * delta * nf * of / static_cast<double>(total);
  n = total;
}

McEstimate RunningStat::estimate() const {
  if (n < 2) throw parameter_error("estimate needs at least two samples");
  McEstimate e;
  e.n_samples = n;
  e.mean = mean;
  const double var = m2 / static_cast<double>(n - 1);
  e.stderr_of_mean = std::sqrt(var / static_cast<double>(n));
  e.half_width_99 = kZ99 * e.stderr_of_mean;
  return e;
}

ChiSquareResult chi_square_goodness(const std::vector<long long>& counts,
                                    const std::vector<double>& probs) {
  if (counts.size() != probs.size() || counts.empty())
    throw parameter_error("counts and cell probabilities must align");
  long long total = 0;
  for (long long c : counts) total += c;
  if (total <= 0) throw parameter_error("empty sample");

  // Pool cells until every kept cell has a workable expected count.
  double stat = 0.0;
  int cells = 0;
  double pooled_exp = 0.0;
  long long pooled_obs = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    pooled_exp += probs[i] * static_cast<double>(total);
    pooled_obs += counts[i];
    if (pooled_exp >= 5.0) {
      const double d = static_cast<double>(pooled_obs) - pooled_exp;
      stat += d * d / pooled_exp;
      cells += 1;
      pooled_exp = 0.0;
      pooled_obs = 0;
    }
  }
  if (pooled_obs > 0 || pooled_exp > 0.0) {
    if (pooled_exp <= 0.0 && pooled_obs > 0)
      throw numerical_error("observations in zero-probability cells");
    if (pooled_exp > 0.0) {
      const double d = static_cast<double>(pooled_obs) - pooled_exp;
      stat += d * d / pooled_exp;
      cells += 1;
    }
  }

  ChiSquareResult r;
  r.statistic = stat;
  r.dof = cells - 1;
  if (r.dof <= 0) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  return r;
}

ChiSquareResult chi_square_two_sample(const std::vector<long long>& a,
                                      const std::vector<long long>& b) {
  if (a.size() != b.size() || a.empty())
    throw parameter_error("samples must cover the same cells");
  long long na = 0, nb = 0;
  for (long long c : a) na += c;
  for (long long c : b) nb += c;
  if (na <= 0 || nb <= 0) throw parameter_error("empty sample");
  const double total = static_cast<double>(na + nb);

  double stat = 0.0;
  int cells = 0;
  long long pa = 0, pb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa += a[i];
    pb += b[i];
    const double cell = static_cast<double>(pa + pb);
    const double ea = cell * static_cast<double>(na) / total;
    const double eb = cell * static_cast<double>(nb) / total;
    if (ea >= 5.0 && eb >= 5.0) {
      const double da = static_cast<double>(pa) - ea;
      const double db = static_cast<double>(pb) - eb;
      stat += da * da / ea + db * db / eb;
      cells += 1;
      pa = pb = 0;
    }
  }
  if (pa > 0 || pb > 0) {
    const double cell = static_cast<double>(pa + pb);
    if (cell > 0.0) {
      const double ea = cell * static_cast<double>(na) / total;
      const double eb = cell * static_cast<double>(nb) / total;
      const double da = static_cast<double>(pa) - ea;
      const double db = static_cast<double>(pb) - eb;
      stat += da * da / ea + db * db / eb;
      cells += 1;
    }
  }

  ChiSquareResult r;
  r.statistic = stat;
  r.dof = cells - 1;
  if (r.dof <= 0) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  return r;
}

}  // namespace sepness
