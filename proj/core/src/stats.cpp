#include "urbanflow/numerics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace urbanflow::numerics {

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  const double na = double(sa.size()), nb = double(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;  // advance through the tie group
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  // Remaining tail of either sample cannot increase the gap beyond the
  // value at the shorter sample's end, which the loop already recorded.
  return d;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("correlation: samples differ in length");
  if (a.size() < 3) throw std::invalid_argument("correlation: need at least 3 pairs");
}

}  // namespace

double pearson(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const double n = double(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw std::invalid_argument("correlation: zero variance input");
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> midranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (double(i) + double(j)) / 2.0 + 1.0;  // average 1-based rank
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  return pearson(ra, rb);
}

namespace {

double sample_sd(std::span<const double> v) {
  const double n = double(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
}

double iqr(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  auto quantile = [&](double q) {
    const double pos = q * double(s.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - double(lo);
    return lo + 1 < s.size() ? s[lo] * (1 - frac) + s[lo + 1] * frac : s[lo];
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace

double bandwidth_1d(std::span<const double> sample, BandwidthRule rule) {
  if (sample.empty()) throw std::invalid_argument("kde: empty sample");
  const double sd = sample_sd(sample);
  const double n = double(sample.size());
  double h;
  switch (rule) {
    case BandwidthRule::scott:
      h = sd * std::pow(n, -0.2);
      break;
    case BandwidthRule::silverman: {
      const double spread = std::min(sd, iqr(sample) / 1.34);
      h = 0.9 * spread * std::pow(n, -0.2);
      break;
    }
    default:
      throw std::invalid_argument("kde: unknown bandwidth rule");
  }
  if (h <= 0.0)
    throw std::invalid_argument(
        "kde: zero-variance sample, rule-based bandwidth undefined; pass an explicit bandwidth");
  return h;
}

std::vector<double> kde_weighted(std::span<const double> sample,
                                 std::span<const double> weights,
                                 std::span<const double> grid, double bandwidth,
                                 BandwidthRule rule) {
  if (sample.empty()) throw std::invalid_argument("kde: empty sample");
  if (!weights.empty() && weights.size() != sample.size())
    throw std::invalid_argument("kde: weight length mismatch");
  const double h = bandwidth > 0 ? bandwidth : bandwidth_1d(sample, rule);

  double wsum = 0.0;
  if (weights.empty()) {
    wsum = double(sample.size());
  } else {
    for (double w : weights) {
      if (w < 0) throw std::invalid_argument("kde: negative weight");
      wsum += w;
    }
    if (wsum <= 0) throw std::invalid_argument("kde: weights sum to zero");
  }

  const double norm = 1.0 / (wsum * h * std::sqrt(2.0 * M_PI));
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const double u = (grid[g] - sample[i]) / h;
      acc += (weights.empty() ? 1.0 : weights[i]) * std::exp(-0.5 * u * u);
    }
    out[g] = acc * norm;
  }
  return out;
}

std::vector<double> kde(std::span<const double> sample, std::span<const double> grid,
                        double bandwidth, BandwidthRule rule) {
  return kde_weighted(sample, {}, grid, bandwidth, rule);
}

std::vector<double> kde_grid(std::span<const double> sample, double bandwidth,
                             std::size_t points, double pad_bandwidths) {
  if (sample.empty()) throw std::invalid_argument("kde: empty sample");
  if (points < 2) throw std::invalid_argument("kde: grid needs at least 2 points");
  const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
  const double lo = *mn - pad_bandwidths * bandwidth;
  const double hi = *mx + pad_bandwidths * bandwidth;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * double(i) / double(points - 1);
  return grid;
}

std::vector<double> kde2d(std::span<const double> xs, std::span<const double> ys,
                          std::span<const double> gx, std::span<const double> gy,
                          double bandwidth_x, double bandwidth_y) {
  if (xs.size() != ys.size()) throw std::invalid_argument("kde2d: sample length mismatch");
  if (xs.empty()) throw std::invalid_argument("kde2d: empty sample");
  const double n = double(xs.size());
  auto rule_bw = [&](std::span<const double> v) {
    const double sd = sample_sd(v);
    const double h = sd * std::pow(n, -1.0 / 6.0);  // Scott, d = 2
    if (h <= 0.0)
      throw std::invalid_argument(
          "kde2d: zero-variance axis, pass explicit bandwidths");
    return h;
  };
  const double hx = bandwidth_x > 0 ? bandwidth_x : rule_bw(xs);
  const double hy = bandwidth_y > 0 ? bandwidth_y : rule_bw(ys);

  const double norm = 1.0 / (n * 2.0 * M_PI * hx * hy);
  std::vector<double> out(gx.size() * gy.size(), 0.0);
  for (std::size_t a = 0; a < gx.size(); ++a) {
    for (std::size_t b = 0; b < gy.size(); ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double ux = (gx[a] - xs[i]) / hx;
        const double uy = (gy[b] - ys[i]) / hy;
        acc += std::exp(-0.5 * (ux * ux + uy * uy));
      }
      out[a * gy.size() + b] = acc * norm;
    }
  }
  return out;
}

}  // namespace urbanflow::numerics
