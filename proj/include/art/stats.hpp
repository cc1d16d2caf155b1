#pragma once
// Small statistics helpers: power-law fits, chi-square goodness of fit,
// binomial/normal summaries.

#include <cstdint>
#include <vector>

namespace art {

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_ = 0.0;  // standard error of the slope (0 for two points)
};

// OLS of log(metric) on log(x). Needs >= 3 points, all positive.
SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& metric);

// Pearson chi-square statistic and p-value against the given expected
// probabilities.
struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};
ChiSquare chi_square_test(const std::vector<std::int64_t>& counts, const std::vector<double>& probs);
// Upper-tail probability of a chi-square statistic.
double chi_square_pvalue(double statistic, int dof);

double mean(const std::vector<double>& v);
// unbiased sample variance
double variance(const std::vector<double>& v);

// Wilson score interval for a binomial proportion.
struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};
Interval wilson_interval(std::int64_t successes, std::int64_t n, double z = 1.96);

}  // namespace art
