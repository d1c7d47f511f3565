#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stackgp::metrics {

/// Mean absolute error. Throws EmptyInput on empty input and
/// DimensionMismatch on unequal lengths.
double mae(std::span<const double> actual, std::span<const double> predicted);

/// Coefficient of determination 1 - SS_res/SS_tot. Needs at least two
/// points; throws ZeroVariance when every actual value is equal.
double r2(std::span<const double> actual, std::span<const double> predicted);

/// Fraction of points with lower <= actual <= upper.
double coverage(std::span<const double> actual, std::span<const double> lower, std::span<const double> upper);

struct Summary {
    double mae = 0.0;
    std::optional<double> r2;  // undefined for fewer than two points or constant actuals
    double coverage95 = 0.0;
    std::size_t n = 0;
};

struct EvalReport {
    Summary pooled;
    std::map<std::string, Summary> per_region;
};

/// One joined (actual, forecast) observation.
struct Observation {
    std::string region;
    double actual = 0.0;
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

Summary summarize(const std::vector<Observation>& obs);
EvalReport evaluate(const std::vector<Observation>& obs);

}  // namespace stackgp::metrics
