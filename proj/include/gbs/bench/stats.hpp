#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace gbs::bench {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Linear-interpolated sample quantile (type 7), q in [0,1].
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// Across-seed statistics. Two interval kinds are reported because figure
/// captions speak of confidence intervals without saying which: a normal
/// interval mean +- 1.96 se and the 2.5/97.5 percentile band of the seeds.
struct Band {
    std::size_t count = 0;
    double mean = 0.0;
    double std_error = 0.0;
    double se_low = 0.0, se_high = 0.0;
    double pct_low = 0.0, pct_high = 0.0;
};

inline Band summarize(const std::vector<double>& xs) {
    Band b;
    b.count = xs.size();
    if (xs.empty()) return b;
    double sum = 0.0;
    for (double x : xs) sum += x;
    b.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - b.mean) * (x - b.mean);
        b.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    b.se_low = b.mean - 1.96 * b.std_error;
    b.se_high = b.mean + 1.96 * b.std_error;
    b.pct_low = quantile(xs, 0.025);
    b.pct_high = quantile(xs, 0.975);
    return b;
}

} // namespace gbs::bench
