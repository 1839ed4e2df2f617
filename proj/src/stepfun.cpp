#include "raildelay/stepfun.hpp"

#include <algorithm>
#include <string>

#include "raildelay/errors.hpp"

namespace raildelay {

CovariatePath::CovariatePath(std::vector<double> breaks, std::vector<Eigen::VectorXd> values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
    if (breaks_.size() != values_.size() + 1 || values_.empty())
        throw DataError("covariate path needs m+1 breaks for m >= 1 pieces");
    for (std::size_t i = 0; i + 1 < breaks_.size(); ++i)
        if (!(breaks_[i] < breaks_[i + 1]))
            throw DataError("covariate path breaks not strictly increasing at index " +
                            std::to_string(i));
}

CovariatePath CovariatePath::constant(double start, double end, Eigen::VectorXd value) {
    return CovariatePath({start, end}, {std::move(value)});
}

const Eigen::VectorXd& CovariatePath::at(double d) const {
    if (d <= breaks_.front()) return values_.front();
    if (d > breaks_.back())
        throw DataError("covariate lookup at " + std::to_string(d) +
                        " beyond path end " + std::to_string(breaks_.back()));
    // First break >= d; value index is that break's piece.
    auto it = std::lower_bound(breaks_.begin(), breaks_.end(), d);
    std::size_t idx = static_cast<std::size_t>(it - breaks_.begin());
    return values_[idx - 1];
}

std::vector<double> CovariatePath::breaks_inside(double a, double b) const {
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < breaks_.size(); ++i)
        if (breaks_[i] > a && breaks_[i] < b) out.push_back(breaks_[i]);
    return out;
}

} // namespace raildelay
