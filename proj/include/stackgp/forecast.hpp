#pragma once

#include <string>
#include <vector>

#include "stackgp/calendar.hpp"

namespace stackgp {

/// One household-month predictive distribution, in consumption units. Every
/// forecasting method produces this shape.
struct ForecastEntry {
    std::string task_id;
    MonthIndex month = 0;
    double mean = 0.0;
    double variance = 0.0;
    double lower95 = 0.0;
    double upper95 = 0.0;

    bool operator==(const ForecastEntry&) const = default;
};

using Forecasts = std::vector<ForecastEntry>;

/// Sorts by (task_id, month).
void sort_forecasts(Forecasts& f);

}  // namespace stackgp
