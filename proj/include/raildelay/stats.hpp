#pragma once

#include <string>

namespace raildelay {

double normal_cdf(double z);

// One row of a hazard-ratio table: exp(coef) with a 95% Wald CI built on
// the coefficient scale and a two-sided Wald p-value.
struct HazardRatioRow {
    std::string name;
    double coef = 0.0;
    double se = 0.0;
    double hazard_ratio = 1.0;
    double ci_lower = 1.0;
    double ci_upper = 1.0;
    double p_value = 1.0;
};

HazardRatioRow wald_row(const std::string& name, double coef, double se);

} // namespace raildelay
