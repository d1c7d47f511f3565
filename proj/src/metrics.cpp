#include "stackgp/metrics.hpp"

#include <cmath>

#include "stackgp/errors.hpp"

namespace stackgp::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a == 0) throw EmptyInput(std::string(what) + ": empty input");
    if (a != b)
        throw DimensionMismatch(std::string(what) + ": lengths " + std::to_string(a) + " and " + std::to_string(b));
}

}  // namespace

double mae(std::span<const double> actual, std::span<const double> predicted) {
    check_lengths(actual.size(), predicted.size(), "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) s += std::abs(actual[i] - predicted[i]);
    return s / static_cast<double>(actual.size());
}

double r2(std::span<const double> actual, std::span<const double> predicted) {
    check_lengths(actual.size(), predicted.size(), "r2");
    if (actual.size() < 2) throw EmptyInput("r2: needs at least two points");
    double mean = 0.0;
    for (double a : actual) mean += a;
    mean /= static_cast<double>(actual.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
        ss_tot += (actual[i] - mean) * (actual[i] - mean);
    }
    if (ss_tot == 0.0) throw ZeroVariance("r2: all actual values are equal");
    return 1.0 - ss_res / ss_tot;
}

double coverage(std::span<const double> actual, std::span<const double> lower, std::span<const double> upper) {
    check_lengths(actual.size(), lower.size(), "coverage");
    check_lengths(actual.size(), upper.size(), "coverage");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < actual.size(); ++i)
        if (lower[i] <= actual[i] && actual[i] <= upper[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(actual.size());
}

Summary summarize(const std::vector<Observation>& obs) {
    std::vector<double> a, m, lo, hi;
    for (const auto& o : obs) {
        a.push_back(o.actual);
        m.push_back(o.mean);
        lo.push_back(o.lower);
        hi.push_back(o.upper);
    }
    Summary s;
    s.n = obs.size();
    s.mae = mae(a, m);
    s.coverage95 = coverage(a, lo, hi);
    try {
        s.r2 = r2(a, m);
    } catch (const ZeroVariance&) {
    } catch (const EmptyInput&) {
    }
    return s;
}

EvalReport evaluate(const std::vector<Observation>& obs) {
    EvalReport report;
    report.pooled = summarize(obs);
    std::map<std::string, std::vector<Observation>> groups;
    for (const auto& o : obs) groups[o.region].push_back(o);
    for (const auto& [region, g] : groups) report.per_region[region] = summarize(g);
    return report;
}

}  // namespace stackgp::metrics
