#pragma once

#include <span>
#include <string>
#include <vector>

namespace urbanflow::numerics {

/// Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b| over the merged
/// sorted samples, evaluated after each tie group. Throws on empty input.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Product-moment correlation. Requires equal lengths >= 3 and non-constant
/// inputs ("zero variance" otherwise).
double pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation: Pearson on mid-ranks (ties get average rank).
double spearman(std::span<const double> a, std::span<const double> b);

/// Mid-ranks of a sample, 1-based; tied values share the average rank.
std::vector<double> midranks(std::span<const double> v);

enum class BandwidthRule { scott, silverman };

/// Scott / Silverman 1-D bandwidths. Throws on zero-variance samples.
double bandwidth_1d(std::span<const double> sample, BandwidthRule rule);

/// Gaussian kernel density estimate evaluated on `grid`. Pass bandwidth <= 0
/// to apply the rule instead.
std::vector<double> kde(std::span<const double> sample, std::span<const double> grid,
                        double bandwidth, BandwidthRule rule = BandwidthRule::scott);

/// Weighted variant; weights need not be normalized.
std::vector<double> kde_weighted(std::span<const double> sample,
                                 std::span<const double> weights,
                                 std::span<const double> grid, double bandwidth,
                                 BandwidthRule rule = BandwidthRule::scott);

/// Evenly spaced evaluation grid extended `pad_bandwidths` beyond the data.
std::vector<double> kde_grid(std::span<const double> sample, double bandwidth,
                             std::size_t points, double pad_bandwidths = 8.0);

/// 2-D product-Gaussian KDE on the cartesian grid (gx x gy), returned in
/// row-major order over gx. Per-axis bandwidths <= 0 fall back to the rule
/// with the 2-D Scott exponent n^(-1/6).
std::vector<double> kde2d(std::span<const double> xs, std::span<const double> ys,
                          std::span<const double> gx, std::span<const double> gy,
                          double bandwidth_x = 0.0, double bandwidth_y = 0.0);

}  // namespace urbanflow::numerics
