#pragma once

#include <cstdint>
#include <vector>

namespace sepness {

// Monte Carlo summary: sample mean, standard error of the mean, and the 99%
// normal-approximation half-width.
struct McEstimate {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  long long n_samples = 0;
  double half_width_99 = 0.0;

  bool covers(double truth, double k_sigma = 4.0) const;
};

// Streaming mean/variance accumulator with an associative, count-weighted
// merge, so replica summaries can be combined in any grouping.
struct RunningStat {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const RunningStat& other);
  McEstimate estimate() const;
};

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// Goodness of fit of observed counts against exact cell probabilities.
// Cells with negligible expected count are pooled into their neighbor.
ChiSquareResult chi_square_goodness(const std::vector<long long>& counts,
                                    const std::vector<double>& probs);

// Homogeneity test of two independent count vectors over the same cells.
ChiSquareResult chi_square_two_sample(const std::vector<long long>& a,
                                      const std::vector<long long>& b);

}  // namespace sepness
