#pragma once

#include <Eigen/Core>
#include <vector>

namespace raildelay {

// Piecewise-constant vector-valued covariates over running distance.
// breaks has m+1 entries for m pieces; values[i] holds on (breaks[i],
// breaks[i+1]]. Evaluation is left-continuous: the value at a section's
// upper endpoint is that section's value, which is the convention used when
// covariates are looked up at event distances recorded at arrival spots.
class CovariatePath {
public:
    CovariatePath() = default;
    CovariatePath(std::vector<double> breaks, std::vector<Eigen::VectorXd> values);

    // Single piece spanning [start, end] with one covariate vector.
    static CovariatePath constant(double start, double end, Eigen::VectorXd value);

    double start() const { return breaks_.front(); }
    double end() const { return breaks_.back(); }
    std::size_t pieces() const { return values_.size(); }
    const std::vector<double>& breaks() const { return breaks_; }
    const Eigen::VectorXd& piece_value(std::size_t i) const { return values_[i]; }

    // Value of the piece (breaks[i], breaks[i+1]] containing d; d <= start
    // maps to the first piece. d beyond the end throws DataError.
    const Eigen::VectorXd& at(double d) const;

    // Indices of interior breakpoints strictly inside (a, b).
    std::vector<double> breaks_inside(double a, double b) const;

private:
    std::vector<double> breaks_;
    std::vector<Eigen::VectorXd> values_;
};

} // namespace raildelay
