#pragma once

#include <span>
#include <vector>

namespace kabb::stats {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> xs);
// Linear-interpolated quantile, q in [0,1].
double quantile(std::vector<double> xs, double q);

struct MannWhitney {
    double u = 0.0;         // U statistic of the first sample
    double z = 0.0;         // normal approximation with tie and continuity correction
    double p_two_sided = 1.0;
};

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b);

// Least-squares slope of log(y) against log(x) over points with x, y > 0.
// Returns 0 when fewer than two such points exist.
double log_log_slope(std::span<const double> x, std::span<const double> y);

}  // namespace kabb::stats
