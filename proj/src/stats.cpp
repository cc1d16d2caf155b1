#include "art/stats.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "art/tree.hpp"

namespace art {

SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& metric) {
    if (x.size() != metric.size()) throw ContractError("slope fit needs matching x and metric");
    if (x.size() < 3) throw ContractError("slope fit needs at least 3 points");
    const std::size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(metric[i] > 0.0)) throw ContractError("slope fit needs positive values");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(metric[i]);
    }
    const double mx = mean(lx), my = mean(ly);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw ContractError("slope fit needs distinct x values");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = ly[i] - f.intercept - f.slope * lx[i];
        rss += r * r;
    }
    f.stderr_ = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    return f;
}

ChiSquare chi_square_test(const std::vector<std::int64_t>& counts, const std::vector<double>& probs) {
    if (counts.size() != probs.size() || counts.empty()) throw ContractError("chi-square needs matching bins");
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
    ChiSquare c;
    c.dof = static_cast<int>(counts.size()) - 1;
    if (c.dof == 0) return c;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double e = total * probs[i];
        if (!(e > 0.0)) throw ContractError("chi-square bin with zero expectation");
        c.statistic += (counts[i] - e) * (counts[i] - e) / e;
    }
    c.p_value = chi_square_pvalue(c.statistic, c.dof);
    return c;
}

double chi_square_pvalue(double statistic, int dof) {
    if (dof <= 0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw ContractError("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    if (v.size() < 2) throw ContractError("variance needs two samples");
    const double m = mean(v);
    double s = 0.0;
    for (double a : v) s += (a - m) * (a - m);
    return s / static_cast<double>(v.size() - 1);
}

Interval wilson_interval(std::int64_t successes, std::int64_t n, double z) {
    if (n <= 0) throw ContractError("interval needs n >= 1");
    const double p = static_cast<double>(successes) / static_cast<double>(n);
    const double dn = static_cast<double>(n);
    const double den = 1.0 + z * z / dn;
    const double ctr = (p + z * z / (2.0 * dn)) / den;
    const double half = z * std::sqrt(p * (1.0 - p) / dn + z * z / (4.0 * dn * dn)) / den;
    return {std::max(0.0, ctr - half), std::min(1.0, ctr + half)};
}

}  // namespace art
