#include "urbanflow/covisit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "urbanflow/numerics/spectral.hpp"
#include "urbanflow/numerics/stats.hpp"

namespace urbanflow::covisit {

CovisitMatrix covisit_matrix(const visits::VisitTable& visits) {
  const auto sets = visits.visitor_sets();
  CovisitMatrix m;
  std::vector<const std::set<std::string>*> visitor_ptr;
  for (const auto& [mall, devices] : sets) {
    m.malls.push_back(mall);
    visitor_ptr.push_back(&devices);
    m.visitor_counts.push_back(devices.size());
  }

  const Eigen::Index n = static_cast<Eigen::Index>(m.malls.size());
  m.P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& vi = *visitor_ptr[static_cast<std::size_t>(i)];
    if (vi.empty()) {
      m.undefined_malls.push_back(m.malls[static_cast<std::size_t>(i)]);
      continue;
    }
    m.P(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& vj = *visitor_ptr[static_cast<std::size_t>(j)];
      std::size_t inter = 0;
      // Merge walk over the sorted visitor sets.
      auto a = vi.begin();
      auto b = vj.begin();
      while (a != vi.end() && b != vj.end()) {
        if (*a < *b)
          ++a;
        else if (*b < *a)
          ++b;
        else {
          ++inter;
          ++a;
          ++b;
        }
      }
      m.P(i, j) = double(inter) / double(vi.size());
      if (!vj.empty()) m.P(j, i) = double(inter) / double(vj.size());
    }
  }
  return m;
}

SimilarityMatrix similarity_matrix(const visits::VisitTable& visits,
                                   const std::vector<residence::HomeAssignment>& homes,
                                   SimilarityMode mode) {
  std::unordered_map<std::string, double> hdi_of;
  for (const auto& h : homes) hdi_of[h.device_id] = h.hdi;

  // Per-mall visitor HDI samples (unique visitors).
  std::map<std::string, std::vector<double>> samples;
  for (const auto& [device, malls] : visits.by_device()) {
    auto it = hdi_of.find(device);
    if (it == hdi_of.end()) continue;
    for (const auto& [mall, days] : malls) samples[mall].push_back(it->second);
  }

  SimilarityMatrix sm;
  sm.mode = mode;
  std::vector<const std::vector<double>*> ptr;
  for (const auto& [mall, sample] : samples) {
    if (sample.size() < 2)
      throw std::invalid_argument("similarity_matrix: mall " + mall +
                                  " has fewer than 2 visitors with HDI");
    sm.malls.push_back(mall);
    ptr.push_back(&sample);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(sm.malls.size());
  sm.S.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sm.S(i, i) = mode == SimilarityMode::similarity ? 1.0 : 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = numerics::ks_two_sample(*ptr[static_cast<std::size_t>(i)],
                                               *ptr[static_cast<std::size_t>(j)]);
      const double v = mode == SimilarityMode::similarity ? 1.0 - d : d;
      sm.S(i, j) = v;
      sm.S(j, i) = v;
    }
  }
  return sm;
}

CovisitFit fit_covisit_logit(const CovisitMatrix& P, const SimilarityMatrix& S,
                             const std::vector<ingest::MallSite>& malls,
                             const CovisitFitOptions& opts) {
  std::unordered_map<std::string, const ingest::MallSite*> mall_of;
  for (const auto& m : malls) mall_of[m.mall_id] = &m;
  std::unordered_map<std::string, Eigen::Index> s_index;
  for (std::size_t i = 0; i < S.malls.size(); ++i)
    s_index[S.malls[i]] = static_cast<Eigen::Index>(i);

  struct PairRow {
    double p, log_mj, log_s, neg_log_d;
  };
  std::vector<PairRow> rows;
  std::size_t excluded = 0;

  const Eigen::Index n = static_cast<Eigen::Index>(P.malls.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::string& from = P.malls[static_cast<std::size_t>(i)];
      const std::string& to = P.malls[static_cast<std::size_t>(j)];
      auto fi = mall_of.find(from);
      auto fj = mall_of.find(to);
      auto si = s_index.find(from);
      auto sj = s_index.find(to);
      if (fi == mall_of.end() || fj == mall_of.end() || si == s_index.end() ||
          sj == s_index.end()) {
        ++excluded;
        continue;
      }
      const double p = P.P(i, j);
      if (opts.pairs == PairSelection::thresholded && p < opts.covisit_threshold) {
        ++excluded;
        continue;
      }
      const double s = S.S(si->second, sj->second);
      if (!(s > 0.0)) {  // log undefined
        ++excluded;
        continue;
      }
      const double d = std::max(opts.distance_floor_km,
                                geo::haversine_km(fi->second->centroid, fj->second->centroid));
      rows.push_back({p, std::log(fj->second->rental_sqm), std::log(s), -std::log(d)});
    }
  }
  if (rows.size() < 5)
    throw std::invalid_argument("fit_covisit_logit: fewer than 5 usable mall pairs");

  const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
  numerics::DesignMatrix full;
  full.X.resize(nr, 4);
  full.y.resize(nr);
  full.names = {"logK", "beta", "lambda", "gamma"};
  numerics::DesignMatrix reduced;
  reduced.X.resize(nr, 3);
  reduced.y.resize(nr);
  reduced.names = {"logK", "beta", "gamma"};
  for (Eigen::Index r = 0; r < nr; ++r) {
    const PairRow& row = rows[static_cast<std::size_t>(r)];
    full.X(r, 0) = 1.0;
    full.X(r, 1) = row.log_mj;
    full.X(r, 2) = row.log_s;
    full.X(r, 3) = row.neg_log_d;
    reduced.X(r, 0) = 1.0;
    reduced.X(r, 1) = row.log_mj;
    reduced.X(r, 2) = row.neg_log_d;
    full.y[r] = row.p;
    reduced.y[r] = row.p;
  }

  CovisitFit fit;
  fit.pairs_used = rows.size();
  fit.pairs_excluded = excluded;
  fit.full = numerics::logistic_newton(full, opts.glm);
  fit.reduced = numerics::logistic_newton(reduced, opts.glm);

  auto r2_of = [&](const numerics::DesignMatrix& d, const numerics::FitReport& rep,
                   std::vector<double>& pred_out) {
    const Eigen::VectorXd mu = (1.0 + (-(d.X * rep.coef).array()).exp()).inverse();
    pred_out.assign(mu.data(), mu.data() + mu.size());
    const double mean = d.y.mean();
    double ss_res = 0.0, ss_tot = 0.0;
    for (Eigen::Index i = 0; i < d.y.size(); ++i) {
      ss_res += (d.y[i] - mu[i]) * (d.y[i] - mu[i]);
      ss_tot += (d.y[i] - mean) * (d.y[i] - mean);
    }
    return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
  };

  std::vector<double> pred_full, pred_reduced;
  fit.r2_full = r2_of(full, fit.full, pred_full);
  fit.r2_reduced = r2_of(reduced, fit.reduced, pred_reduced);
  std::vector<double> obs(full.y.data(), full.y.data() + full.y.size());
  fit.spearman_obs_pred = numerics::spearman(obs, pred_full);
  return fit;
}

ClusterResult cluster_malls(const SimilarityMatrix& S,
                            const std::unordered_map<std::string, double>& mall_mean_hdi,
                            int k, std::uint64_t seed) {
  if (S.mode != SimilarityMode::similarity)
    throw std::invalid_argument("cluster_malls: similarity mode required");
  ClusterResult result;
  result.labels = numerics::spectral_cluster(S.S, k, seed);

  std::map<int, ClusterSummary> by_label;
  for (std::size_t i = 0; i < S.malls.size(); ++i) {
    auto& c = by_label[result.labels[i]];
    c.label = result.labels[i];
    c.malls.push_back(S.malls[i]);
  }
  for (auto& [label, cluster] : by_label) {
    double acc = 0.0;
    std::size_t cnt = 0;
    for (const auto& mall : cluster.malls) {
      auto it = mall_mean_hdi.find(mall);
      if (it != mall_mean_hdi.end()) {
        acc += it->second;
        ++cnt;
      }
    }
    cluster.mean_visitor_hdi = cnt ? acc / double(cnt) : 0.0;
    result.clusters.push_back(cluster);
  }
  return result;
}

std::vector<NetworkEdge> export_network(const CovisitMatrix& P, double threshold) {
  std::vector<NetworkEdge> edges;
  const Eigen::Index n = static_cast<Eigen::Index>(P.malls.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = P.P(i, j);
      if (w >= threshold)
        edges.push_back({P.malls[static_cast<std::size_t>(i)],
                         P.malls[static_cast<std::size_t>(j)], w});
    }
  return edges;
}

std::string network_to_dot(const std::vector<NetworkEdge>& edges) {
  std::ostringstream out;
  out << "digraph covisitation {\n";
  std::set<std::string> nodes;
  for (const auto& e : edges) {
    nodes.insert(e.from);
    nodes.insert(e.to);
  }
  for (const auto& nd : nodes) out << "  \"" << nd << "\";\n";
  for (const auto& e : edges) {
    std::ostringstream w;
    w.precision(6);
    w << e.weight;
    out << "  \"" << e.from << "\" -> \"" << e.to << "\" [weight=" << w.str()
        << ", label=" << w.str() << "];\n";
  }
  out << "}\n";
  return out.str();
}

std::string network_to_json(const std::vector<NetworkEdge>& edges) {
  nlohmann::json j;
  std::set<std::string> nodes;
  for (const auto& e : edges) {
    nodes.insert(e.from);
    nodes.insert(e.to);
  }
  j["nodes"] = nodes;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : edges)
    arr.push_back({{"from", e.from}, {"to", e.to}, {"p", e.weight}});
  j["edges"] = arr;
  return j.dump(2);
}

HdiPairSample customer_mall_hdi_density(
    const visits::VisitTable& visits, const std::vector<residence::HomeAssignment>& homes,
    const std::unordered_map<std::string, double>& mall_mean_hdi) {
  std::unordered_map<std::string, double> hdi_of;
  for (const auto& h : homes) hdi_of[h.device_id] = h.hdi;

  HdiPairSample sample;
  for (const auto& [device, malls] : visits.by_device()) {
    auto it = hdi_of.find(device);
    if (it == hdi_of.end()) continue;
    for (const auto& [mall, days] : malls) {
      auto mh = mall_mean_hdi.find(mall);
      if (mh == mall_mean_hdi.end()) continue;
      for (std::size_t d = 0; d < days.size(); ++d) {  // one pair per visit row
        sample.customer_hdi.push_back(it->second);
        sample.mall_hdi.push_back(mh->second);
      }
    }
  }
  return sample;
}

}  // namespace urbanflow::covisit
