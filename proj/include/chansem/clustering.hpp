// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "chansem/core.hpp"
#include "chansem/dsp.hpp"

namespace chansem::cluster {

using dsp::Mpc;

/// Power-weighted group of multipath components within one snapshot.
struct Cluster {
  std::string id;
  double snapshot_time = 0.0;
  std::vector<Mpc> members;  // sorted by delay
  double centroid_delay = 0.0;  // power-weighted mean delay
  double total_power = 0.0;
  double rms_delay_spread = 0.0;
  double peak_power = 0.0;
};

inline Cluster make_cluster(std::string id, double snapshot_time, std::vector<Mpc> members) {
  if (members.empty()) throw InvalidArgument("cluster needs at least one member");
  std::sort(members.begin(), members.end(),
            [](const Mpc& a, const Mpc& b) { return a.delay_s < b.delay_s; });
  Cluster c;
  c.id = std::move(id);
  c.snapshot_time = snapshot_time;
  double wsum = 0.0, wdelay = 0.0, peak = 0.0;
  for (const auto& m : members) {
    wsum += m.power;
    wdelay += m.power * m.delay_s;
    peak = std::max(peak, m.power);
  }
  c.centroid_delay = wsum > 0.0 ? wdelay / wsum : members.front().delay_s;
  double wvar = 0.0;
  for (const auto& m : members) {
    const double d = m.delay_s - c.centroid_delay;
    wvar += m.power * d * d;
  }
  c.total_power = wsum;
  c.rms_delay_spread = wsum > 0.0 ? std::sqrt(wvar / wsum) : 0.0;
  c.peak_power = peak;
  c.members = std::move(members);
  return c;
}

struct KPowerMeansResult {
  std::vector<Cluster> clusters;  // sorted by centroid delay, ids "c0".."c{k-1}"
  double objective = 0.0;         // sum_i P_i (tau_i - c_{a(i)})^2
  int iterations = 0;
  std::vector<double> objective_history;  // after each update step, non-increasing
};

namespace detail {

inline double weighted_sse(const std::vector<Mpc>& mpcs, const std::vector<int>& assign,
                           const std::vector<double>& centroids) {
  double j = 0.0;
  for (std::size_t i = 0; i < mpcs.size(); ++i) {
    const double d = mpcs[i].delay_s - centroids[static_cast<std::size_t>(assign[i])];
    j += mpcs[i].power * d * d;
  }
  return j;
}

// Power-weighted k-means++ style seeding: first centroid drawn with
// probability proportional to power, later ones proportional to the
// power-weighted squared distance to the nearest chosen centroid.
inline std::vector<double> seed_centroids(const std::vector<Mpc>& mpcs, int k, Rng& rng) {
  const std::size_t n = mpcs.size();
  std::vector<double> centroids;
  centroids.reserve(static_cast<std::size_t>(k));

  auto draw = [&](const std::vector<double>& weights) -> std::size_t {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) {
      // degenerate weights: first index not already a centroid
      for (std::size_t i = 0; i < n; ++i) {
        const bool used = std::any_of(centroids.begin(), centroids.end(), [&](double c) {
          return c == mpcs[i].delay_s;
        });
        if (!used) return i;
      }
      return 0;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += weights[i];
      if (target <= acc) return i;
    }
    return n - 1;
  };

  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) weights[i] = mpcs[i].power;
  centroids.push_back(mpcs[draw(weights)].delay_s);

  while (static_cast<int>(centroids.size()) < k) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centroids) {
        const double d = mpcs[i].delay_s - c;
        best = std::min(best, d * d);
      }
      weights[i] = mpcs[i].power * best;
    }
    centroids.push_back(mpcs[draw(weights)].delay_s);
  }
  return centroids;
}

}  // namespace detail

/// Lloyd iteration of power-weighted 1-D k-means on MPC delays, finished by
/// a single-point relocation pass that accepts any exact objective
/// improvement (Lloyd alone stalls on basins no point-seeded start can
/// reach). Deterministic for a given seed: input is canonicalized by
/// (delay, power) before seeding, ties assign to the lower centroid index,
/// and empty clusters are repaired by moving the point with the largest
/// weighted distance to its centroid.
inline KPowerMeansResult k_power_means(const std::vector<Mpc>& input, int k, std::uint64_t seed) {
  if (input.empty()) throw InvalidArgument("no MPCs to cluster");
  if (k < 1 || static_cast<std::size_t>(k) > input.size())
    throw InvalidArgument("k out of range");

  std::vector<Mpc> mpcs(input);
  std::sort(mpcs.begin(), mpcs.end(), [](const Mpc& a, const Mpc& b) {
    if (a.delay_s != b.delay_s) return a.delay_s < b.delay_s;
    return a.power < b.power;
  });
  const std::size_t n = mpcs.size();
  const auto uk = static_cast<std::size_t>(k);

  Rng rng(splitmix64(seed));
  std::vector<double> centroids = detail::seed_centroids(mpcs, k, rng);
  std::vector<int> assign(n, 0);

  KPowerMeansResult result;
  constexpr int kMaxIterations = 100;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    // assignment step: nearest centroid, ties to the lower index
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < uk; ++j) {
        const double d = mpcs[i].delay_s - centroids[j];
        const double d2 = d * d;
        if (d2 < best_d) {
          best_d = d2;
          best = static_cast<int>(j);
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }

    // repair empty clusters with the globally farthest point from a
    // multi-member cluster
    std::vector<int> sizes(uk, 0);
    for (std::size_t i = 0; i < n; ++i) ++sizes[static_cast<std::size_t>(assign[i])];
    for (std::size_t j = 0; j < uk; ++j) {
      while (sizes[j] == 0) {
        double worst = -1.0;
        std::size_t worst_i = n;
        for (std::size_t i = 0; i < n; ++i) {
          const auto a = static_cast<std::size_t>(assign[i]);
          if (sizes[a] < 2) continue;
          const double d = mpcs[i].delay_s - centroids[a];
          const double w = mpcs[i].power * d * d;
          if (w > worst) {
            worst = w;
            worst_i = i;
          }
        }
        if (worst_i == n) break;  // cannot happen for k <= n, kept as a guard
        --sizes[static_cast<std::size_t>(assign[worst_i])];
        assign[worst_i] = static_cast<int>(j);
        ++sizes[j];
        centroids[j] = mpcs[worst_i].delay_s;
        changed = true;
      }
    }

    // update step: power-weighted centroid per cluster
    std::vector<double> wsum(uk, 0.0), wdelay(uk, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(assign[i]);
      wsum[j] += mpcs[i].power;
      wdelay[j] += mpcs[i].power * mpcs[i].delay_s;
    }
    for (std::size_t j = 0; j < uk; ++j)
      if (wsum[j] > 0.0) centroids[j] = wdelay[j] / wsum[j];

    result.iterations = iter + 1;
    result.objective_history.push_back(detail::weighted_sse(mpcs, assign, centroids));
    if (!changed) break;
  }

  // relocation polish: move one point at a time when the exact weighted
  // objective change is negative, until no move helps
  {
    std::vector<double> wsum(uk, 0.0), wdelay(uk, 0.0);
    std::vector<int> sizes(uk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(assign[i]);
      wsum[j] += mpcs[i].power;
      wdelay[j] += mpcs[i].power * mpcs[i].delay_s;
      ++sizes[j];
    }
    for (int sweep = 0; sweep < 100; ++sweep) {
      double best_gain = 0.0;
      std::size_t best_i = n;
      std::size_t best_j = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto a = static_cast<std::size_t>(assign[i]);
        if (sizes[a] < 2) continue;
        const double w = mpcs[i].power;
        if (!(wsum[a] > w)) continue;
        const double ca = wdelay[a] / wsum[a];
        const double da = mpcs[i].delay_s - ca;
        const double removal = w * wsum[a] / (wsum[a] - w) * da * da;
        for (std::size_t j = 0; j < uk; ++j) {
          if (j == a) continue;
          const double cb = wsum[j] > 0.0 ? wdelay[j] / wsum[j] : mpcs[i].delay_s;
          const double db = mpcs[i].delay_s - cb;
          const double addition = w * wsum[j] / (wsum[j] + w) * db * db;
          const double gain = removal - addition;
          if (gain > best_gain * (1.0 + 1e-12) + 1e-300) {
            best_gain = gain;
            best_i = i;
            best_j = j;
          }
        }
      }
      if (best_i == n) break;
      const auto a = static_cast<std::size_t>(assign[best_i]);
      const double w = mpcs[best_i].power;
      wsum[a] -= w;
      wdelay[a] -= w * mpcs[best_i].delay_s;
      --sizes[a];
      wsum[best_j] += w;
      wdelay[best_j] += w * mpcs[best_i].delay_s;
      ++sizes[best_j];
      assign[best_i] = static_cast<int>(best_j);
    }
    for (std::size_t j = 0; j < uk; ++j)
      if (wsum[j] > 0.0) centroids[j] = wdelay[j] / wsum[j];
    const double polished = detail::weighted_sse(mpcs, assign, centroids);
    if (polished < result.objective_history.back())
      result.objective_history.push_back(polished);
  }

  result.objective = result.objective_history.back();

  std::vector<std::vector<Mpc>> groups(uk);
  for (std::size_t i = 0; i < n; ++i)
    groups[static_cast<std::size_t>(assign[i])].push_back(mpcs[i]);
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t j = 0; j < uk; ++j) order.emplace_back(centroids[j], j);
  std::sort(order.begin(), order.end());
  for (std::size_t rank = 0; rank < uk; ++rank) {
    result.clusters.push_back(make_cluster("c" + std::to_string(rank),
                                           mpcs.front().snapshot_time,
                                           std::move(groups[order[rank].second])));
  }
  return result;
}

/// Best of `restarts` seeded runs by final objective.
inline KPowerMeansResult k_power_means_best(const std::vector<Mpc>& mpcs, int k,
                                            std::uint64_t seed, int restarts = 10) {
  if (restarts < 1) throw InvalidArgument("need at least one restart");
  std::optional<KPowerMeansResult> best;
  for (int r = 0; r < restarts; ++r) {
    auto result = k_power_means(mpcs, k, derive_stream(seed, static_cast<std::uint64_t>(r)));
    if (!best || result.objective < best->objective) best = std::move(result);
  }
  return *best;
}

/// Power-weighted Davies-Bouldin index; lower is better. Candidates with
/// singleton clusters are scored elsewhere (zero-spread singletons would game
/// the index).
inline double davies_bouldin(const std::vector<Cluster>& clusters) {
  const std::size_t k = clusters.size();
  if (k < 2) throw InvalidArgument("index needs at least two clusters");
  double weighted = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double sep = std::abs(clusters[i].centroid_delay - clusters[j].centroid_delay);
      const double mix = clusters[i].rms_delay_spread + clusters[j].rms_delay_spread;
      const double r = sep > 0.0 ? mix / sep : std::numeric_limits<double>::infinity();
      worst = std::max(worst, r);
    }
    weighted += clusters[i].total_power * worst;
    wsum += clusters[i].total_power;
  }
  return wsum > 0.0 ? weighted / wsum : 0.0;
}

/// Largest spread-to-separation ratio over all cluster pairs. Unweighted:
/// one diffuse cluster is enough to disqualify a grouping, no matter how
/// little power it carries.
inline double worst_pair_ratio(const std::vector<Cluster>& clusters) {
  double worst = 0.0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    for (std::size_t j = i + 1; j < clusters.size(); ++j) {
      const double sep = std::abs(clusters[i].centroid_delay - clusters[j].centroid_delay);
      const double mix = clusters[i].rms_delay_spread + clusters[j].rms_delay_spread;
      worst = std::max(worst, sep > 0.0 ? mix / sep : std::numeric_limits<double>::infinity());
    }
  }
  return worst;
}

/// Picks the cluster count in [1, min(k_max, n)] with the power-weighted
/// Davies-Bouldin index, then falls back to the largest relative objective
/// drop ("elbow") when the index gives no verdict. Two exclusions keep the
/// index meaningful: solutions containing singleton clusters are not scored
/// (their zero spread games the index), and a solution only counts as a
/// genuine grouping when every pair separation exceeds four times the
/// summed spreads. Resolution-limited snapshots, where every path is an
/// isolated point, land in the elbow and come out as one cluster per
/// distinct delay.
inline int select_k(const std::vector<Mpc>& mpcs, int k_max, std::uint64_t seed,
                    int restarts = 10) {
  if (mpcs.empty()) throw InvalidArgument("no MPCs to cluster");
  if (k_max < 1) throw InvalidArgument("k_max must be >= 1");
  const int n = static_cast<int>(mpcs.size());
  const int k_hi = std::min(k_max, n);
  if (k_hi == 1) return 1;

  // all delays identical: a single zero-spread cluster
  const auto [lo, hi] = std::minmax_element(
      mpcs.begin(), mpcs.end(), [](const Mpc& a, const Mpc& b) { return a.delay_s < b.delay_s; });
  if (lo->delay_s == hi->delay_s) return 1;

  constexpr double kAcceptableIndex = 0.25;

  std::vector<double> objective(static_cast<std::size_t>(k_hi) + 1, 0.0);
  {
    const auto one = k_power_means(mpcs, 1, seed);
    objective[1] = one.objective;
  }

  int best_db_k = 0;
  double best_db = std::numeric_limits<double>::infinity();
  for (int k = 2; k <= k_hi; ++k) {
    const auto result = k_power_means_best(mpcs, k, seed, restarts);
    objective[static_cast<std::size_t>(k)] = result.objective;
    const bool has_singleton = std::any_of(result.clusters.begin(), result.clusters.end(),
                                           [](const Cluster& c) { return c.members.size() == 1; });
    if (has_singleton) continue;
    if (worst_pair_ratio(result.clusters) >= kAcceptableIndex) continue;
    const double db = davies_bouldin(result.clusters);
    if (db < best_db) {
      best_db = db;
      best_db_k = k;
    }
  }
  if (best_db_k != 0) return best_db_k;

  // elbow fallback
  int best_k = 1;
  double best_drop = -1.0;
  for (int k = 2; k <= k_hi; ++k) {
    const double prev = objective[static_cast<std::size_t>(k - 1)];
    if (!(prev > 0.0)) break;
    const double drop = (prev - objective[static_cast<std::size_t>(k)]) / prev;
    if (drop > best_drop) {
      best_drop = drop;
      best_k = k;
    }
  }
  return best_k;
}

struct IntraClusterParams {
  double centroid_delay = 0.0;
  double total_power = 0.0;
  double rms_delay_spread = 0.0;
  double peak_power = 0.0;
  std::optional<double> decay_db_per_ns;  // absent for < 2 distinct delays
};

/// Large/small-scale summary of one cluster. The decay rate is the
/// least-squares slope of member power in dB versus delay in ns.
inline IntraClusterParams intra_cluster_params(const Cluster& cluster) {
  IntraClusterParams p;
  p.centroid_delay = cluster.centroid_delay;
  p.total_power = cluster.total_power;
  p.rms_delay_spread = cluster.rms_delay_spread;
  p.peak_power = cluster.peak_power;

  std::vector<std::pair<double, double>> points;  // (delay ns, power dB)
  for (const auto& m : cluster.members)
    if (m.power > 0.0) points.emplace_back(m.delay_s * 1e9, linear_to_db(m.power));
  bool distinct = false;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].first != points[0].first) distinct = true;
  if (points.size() >= 2 && distinct) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(points.size());
    for (const auto& [x, y] : points) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (denom > 0.0) p.decay_db_per_ns = (n * sxy - sx * sy) / denom;
  }
  return p;
}

}  // namespace chansem::cluster
