#include "kabb/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "kabb/error.hpp"

namespace kabb::stats {

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw DomainError("quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] + frac * (xs[hi] - xs[lo]);
}

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DomainError("Mann-Whitney needs two non-empty samples");
    struct Item {
        double value;
        bool first;
    };
    std::vector<Item> all;
    for (double x : a) all.push_back({x, true});
    for (double x : b) all.push_back({x, false});
    std::sort(all.begin(), all.end(), [](const Item& l, const Item& r) { return l.value < r.value; });

    const double n1 = static_cast<double>(a.size());
    const double n2 = static_cast<double>(b.size());
    const double n = n1 + n2;
    double rank_sum = 0.0;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].value == all[i].value) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].first) rank_sum += avg_rank;
        }
        i = j;
    }

    MannWhitney r;
    r.u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    const double mu = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
        r.z = 0.0;
        r.p_two_sided = 1.0;
        return r;
    }
    const double diff = r.u - mu;
    const double corrected = std::max(std::abs(diff) - 0.5, 0.0);
    r.z = std::copysign(corrected / std::sqrt(var), diff);
    r.p_two_sided = std::erfc(std::abs(r.z) / std::sqrt(2.0));
    return r;
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    if (m < 2) return 0.0;
    const double dm = static_cast<double>(m);
    const double denom = dm * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    return (dm * sxy - sx * sy) / denom;
}

}  // namespace kabb::stats
