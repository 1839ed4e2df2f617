#include "raildelay/stats.hpp"

#include <cmath>

namespace raildelay {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

HazardRatioRow wald_row(const std::string& name, double coef, double se) {
    HazardRatioRow row;
    row.name = name;
    row.coef = coef;
    row.se = se;
    row.hazard_ratio = std::exp(coef);
    row.ci_lower = std::exp(coef - 1.96 * se);
    row.ci_upper = std::exp(coef + 1.96 * se);
    const double z = se > 0 ? std::abs(coef) / se : INFINITY;
    row.p_value = 2.0 * (1.0 - normal_cdf(z));
    return row;
}

} // namespace raildelay
