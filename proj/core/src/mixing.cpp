#include "urbanflow/mixing.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "urbanflow/numerics/random.hpp"
#include "urbanflow/numerics/stats.hpp"

namespace urbanflow::mixing {

CountBuildResult build_counts(const visits::VisitTable& visits,
                              const std::vector<DeviceCategory>& labels,
                              const std::vector<std::string>& category_names) {
  std::unordered_map<std::string, std::size_t> label_of;
  for (const auto& l : labels) {
    if (l.category >= category_names.size())
      throw std::invalid_argument("build_counts: category index out of range");
    label_of[l.device_id] = l.category;
  }

  std::vector<std::string> malls;
  for (const auto& [mall, devices] : visits.visitor_sets()) malls.push_back(mall);

  CountBuildResult result;
  result.table.categories = category_names;
  result.table.malls = malls;
  result.table.counts = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(category_names.size()), static_cast<Eigen::Index>(malls.size()));

  std::unordered_map<std::string, std::size_t> mall_index;
  for (std::size_t j = 0; j < malls.size(); ++j) mall_index[malls[j]] = j;

  for (const auto& [device, device_malls] : visits.by_device()) {
    auto it = label_of.find(device);
    if (it == label_of.end()) {
      ++result.unlabeled_devices;
      continue;
    }
    for (const auto& [mall, days] : device_malls)
      result.table.counts(static_cast<Eigen::Index>(it->second),
                          static_cast<Eigen::Index>(mall_index[mall])) += 1.0;
  }
  return result;
}

namespace {

/// Drop malls with zero visitors; returns surviving column indices.
std::vector<Eigen::Index> surviving_malls(const CountTable& counts,
                                          std::vector<std::string>* excluded) {
  const Eigen::VectorXd n_m = counts.mall_totals();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index m = 0; m < n_m.size(); ++m) {
    if (n_m[m] > 0)
      keep.push_back(m);
    else if (excluded)
      excluded->push_back(counts.malls[static_cast<std::size_t>(m)]);
  }
  return keep;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

/// Core E computation on a cleaned count matrix (no zero-visitor malls).
Eigen::MatrixXd exposure_from_counts(const Eigen::MatrixXd& counts) {
  const Eigen::Index k = counts.rows();
  const Eigen::VectorXd n_alpha = counts.rowwise().sum();
  const Eigen::VectorXd n_m = counts.colwise().sum();
  const double total = counts.sum();

  // r_beta(m) = (n_beta(m)/N_beta) / (n(m)/N)
  Eigen::MatrixXd r(k, counts.cols());
  for (Eigen::Index b = 0; b < k; ++b)
    for (Eigen::Index m = 0; m < counts.cols(); ++m)
      r(b, m) = (counts(b, m) / n_alpha[b]) / (n_m[m] / total);

  Eigen::MatrixXd E(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) {
      double acc = 0.0;
      for (Eigen::Index m = 0; m < counts.cols(); ++m) acc += counts(a, m) * r(b, m);
      E(a, b) = acc / n_alpha[a];
    }
  return E;
}

}  // namespace

RepresentationResult representation(const CountTable& counts) {
  RepresentationResult res;
  const auto keep = surviving_malls(counts, &res.excluded_malls);
  const Eigen::MatrixXd c = select_columns(counts.counts, keep);
  const Eigen::VectorXd n_alpha = c.rowwise().sum();
  for (Eigen::Index a = 0; a < c.rows(); ++a)
    if (n_alpha[a] <= 0)
      throw std::invalid_argument("representation: empty category " +
                                  counts.categories[static_cast<std::size_t>(a)]);
  const Eigen::VectorXd n_m = c.colwise().sum();
  const double total = c.sum();

  for (auto m : keep) res.malls.push_back(counts.malls[static_cast<std::size_t>(m)]);
  res.r.resize(c.rows(), c.cols());
  for (Eigen::Index a = 0; a < c.rows(); ++a)
    for (Eigen::Index m = 0; m < c.cols(); ++m)
      res.r(a, m) = (c(a, m) / n_alpha[a]) / (n_m[m] / total);
  return res;
}

ExposureMatrix exposure(const CountTable& counts) {
  ExposureMatrix out;
  out.categories = counts.categories;
  const auto keep = surviving_malls(counts, &out.excluded_malls);
  if (keep.empty()) throw std::invalid_argument("exposure: no malls with visitors");
  out.counts = select_columns(counts.counts, keep);
  for (auto m : keep) out.malls.push_back(counts.malls[static_cast<std::size_t>(m)]);

  out.category_totals = out.counts.rowwise().sum();
  for (Eigen::Index a = 0; a < out.category_totals.size(); ++a)
    if (out.category_totals[a] <= 0)
      throw std::invalid_argument("exposure: empty category " +
                                  counts.categories[static_cast<std::size_t>(a)]);

  out.E = exposure_from_counts(out.counts);
  return out;
}

std::vector<DeviceVisits> device_visits_from(const visits::VisitTable& visits,
                                             const std::vector<DeviceCategory>& labels,
                                             const CountTable& table) {
  std::unordered_map<std::string, std::size_t> label_of;
  for (const auto& l : labels) label_of[l.device_id] = l.category;
  std::unordered_map<std::string, std::size_t> mall_index;
  for (std::size_t j = 0; j < table.malls.size(); ++j) mall_index[table.malls[j]] = j;

  std::vector<DeviceVisits> out;
  for (const auto& [device, device_malls] : visits.by_device()) {
    auto it = label_of.find(device);
    if (it == label_of.end()) continue;
    DeviceVisits dv;
    dv.category = it->second;
    for (const auto& [mall, days] : device_malls) {
      auto mi = mall_index.find(mall);
      if (mi != mall_index.end()) dv.malls.push_back(mi->second);
    }
    if (!dv.malls.empty()) out.push_back(std::move(dv));
  }
  return out;
}

ExposureMatrix exposure_significance(const CountTable& counts,
                                     const std::vector<DeviceVisits>& devices, int resamples,
                                     std::uint64_t seed) {
  if (resamples < 100)
    throw std::invalid_argument("exposure_significance: need at least 100 resamples");
  ExposureMatrix out = exposure(counts);
  out.bootstrap_resamples = resamples;
  out.seed = seed;

  const Eigen::Index k = out.E.rows();
  const Eigen::Index n_malls = static_cast<Eigen::Index>(out.malls.size());

  // Resampling uses the same mall universe as the observed E; translate
  // original mall indices to surviving columns.
  std::unordered_map<std::size_t, Eigen::Index> col_of;
  {
    std::unordered_map<std::string, std::size_t> orig_index;
    for (std::size_t j = 0; j < counts.malls.size(); ++j) orig_index[counts.malls[j]] = j;
    for (std::size_t j = 0; j < out.malls.size(); ++j)
      col_of[orig_index[out.malls[j]]] = static_cast<Eigen::Index>(j);
  }

  // Category probabilities N_alpha / N from the observed table.
  const Eigen::VectorXd n_alpha = out.category_totals;
  const double total = n_alpha.sum();
  std::vector<double> cum(k);
  double acc = 0.0;
  for (Eigen::Index a = 0; a < k; ++a) {
    acc += n_alpha[a] / total;
    cum[static_cast<std::size_t>(a)] = acc;
  }
  cum.back() = 1.0;

  Eigen::MatrixXd count_le = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd count_ge = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd valid = Eigen::MatrixXd::Zero(k, k);

  for (int b = 0; b < resamples; ++b) {
    auto rng = numerics::make_rng(seed, static_cast<std::uint64_t>(b));
    std::uniform_real_distribution<double> u(0.0, 1.0);

    Eigen::MatrixXd resampled = Eigen::MatrixXd::Zero(k, n_malls);
    for (const auto& dv : devices) {
      const double x = u(rng);
      Eigen::Index cat = k - 1;
      for (Eigen::Index a = 0; a < k; ++a)
        if (x <= cum[static_cast<std::size_t>(a)]) {
          cat = a;
          break;
        }
      for (std::size_t m : dv.malls) {
        auto it = col_of.find(m);
        if (it != col_of.end()) resampled(cat, it->second) += 1.0;
      }
    }

    const Eigen::VectorXd rs_alpha = resampled.rowwise().sum();
    if ((rs_alpha.array() <= 0).any()) continue;  // emptied category; skip resample
    const Eigen::MatrixXd E_b = exposure_from_counts(resampled);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index c = 0; c < k; ++c) {
        valid(a, c) += 1.0;
        if (E_b(a, c) <= out.E(a, c)) count_le(a, c) += 1.0;
        if (E_b(a, c) >= out.E(a, c)) count_ge(a, c) += 1.0;
      }
  }

  out.p_values.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index c = 0; c < k; ++c) {
      const double v = valid(a, c);
      const double p_lo = (count_le(a, c) + 1.0) / (v + 1.0);
      const double p_hi = (count_ge(a, c) + 1.0) / (v + 1.0);
      out.p_values(a, c) = std::min(1.0, 2.0 * std::min(p_lo, p_hi));
    }
  return out;
}

HdiGapResult hdi_gap_analysis(const visits::VisitTable& visits,
                              const std::vector<residence::HomeAssignment>& homes,
                              const std::unordered_map<std::string, double>& mall_hdi) {
  std::unordered_map<std::string, const residence::HomeAssignment*> home_of;
  for (const auto& h : homes) home_of[h.device_id] = &h;

  HdiGapResult result;
  std::unordered_map<std::string, std::pair<double, std::size_t>> mall_gap_acc;

  for (const auto& [device, device_malls] : visits.by_device()) {
    auto hit = home_of.find(device);
    if (hit == home_of.end()) {
      ++result.excluded_devices;
      continue;
    }
    const residence::HomeAssignment& home = *hit->second;
    double gap_sum = 0.0;
    std::size_t rows = 0;
    bool missing_mall_hdi = false;
    for (const auto& [mall, days] : device_malls) {
      auto mit = mall_hdi.find(mall);
      if (mit == mall_hdi.end()) {
        missing_mall_hdi = true;
        continue;
      }
      const double gap = mit->second - home.hdi;
      gap_sum += gap * double(days.size());
      rows += days.size();
      auto& acc = mall_gap_acc[mall];
      acc.first += gap;
      acc.second += 1;  // one visitor contribution per mall
    }
    if (rows == 0) {
      if (missing_mall_hdi) ++result.excluded_devices;
      continue;
    }
    result.device_gaps.push_back(
        {device, home.comuna_id, home.hdi, gap_sum / double(rows), rows});
  }

  auto correlate = [](const std::vector<double>& x, const std::vector<double>& y) {
    Correlation c;
    c.n = x.size();
    if (x.size() < 3) {
      c.note = "fewer than 3 points";
      return c;
    }
    try {
      c.r = numerics::pearson(x, y);
      c.defined = true;
    } catch (const std::invalid_argument&) {
      c.note = "zero variance";
    }
    return c;
  };

  std::vector<double> dev_x, dev_y;
  for (const auto& g : result.device_gaps) {
    dev_x.push_back(g.home_hdi);
    dev_y.push_back(g.mean_gap);
  }
  result.device_level = correlate(dev_x, dev_y);

  std::map<std::string, std::pair<double, std::size_t>> comuna_acc;
  std::map<std::string, double> comuna_hdi;
  for (const auto& g : result.device_gaps) {
    auto& acc = comuna_acc[g.comuna_id];
    acc.first += g.mean_gap;
    acc.second += 1;
    comuna_hdi[g.comuna_id] = g.home_hdi;
  }
  std::vector<double> com_x, com_y;
  for (const auto& [comuna, acc] : comuna_acc) {
    com_x.push_back(comuna_hdi[comuna]);
    com_y.push_back(acc.first / double(acc.second));
  }
  result.comuna_level = correlate(com_x, com_y);

  std::vector<double> mall_x, mall_y;
  for (const auto& [mall, acc] : std::map<std::string, std::pair<double, std::size_t>>(
           mall_gap_acc.begin(), mall_gap_acc.end())) {
    mall_x.push_back(mall_hdi.at(mall));
    mall_y.push_back(acc.first / double(acc.second));
  }
  result.mall_level = correlate(mall_x, mall_y);

  return result;
}

}  // namespace urbanflow::mixing
