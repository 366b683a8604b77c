// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit
//
// Test-only helpers and independent oracles. These deliberately avoid the
// library's own implementations: the DFT is evaluated as a direct sum, and
// clustering/assignment optima come from exhaustive enumeration.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "chansem/clustering.hpp"
#include "chansem/dsp.hpp"

namespace testsupport {

// Direct-sum unitary inverse DFT.
inline std::vector<std::complex<double>> naive_inverse_dft(
    const std::vector<std::complex<double>>& freq) {
  const std::size_t n = freq.size();
  std::vector<std::complex<double>> time(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
      const double phase = 2.0 * M_PI * static_cast<double>(k * i % n) / static_cast<double>(n);
      sum += freq[k] * std::polar(1.0, phase);
    }
    time[i] = sum * scale;
  }
  return time;
}

// Direct-sum unitary forward DFT.
inline std::vector<std::complex<double>> naive_forward_dft(
    const std::vector<std::complex<double>>& time) {
  const std::size_t n = time.size();
  std::vector<std::complex<double>> freq(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = -2.0 * M_PI * static_cast<double>(k * i % n) / static_cast<double>(n);
      sum += time[i] * std::polar(1.0, phase);
    }
    freq[k] = sum * scale;
  }
  return freq;
}

inline double weighted_sse_of_partition(const std::vector<chansem::dsp::Mpc>& mpcs,
                                        const std::vector<int>& assign, int k) {
  std::vector<double> wsum(static_cast<std::size_t>(k), 0.0);
  std::vector<double> wdelay(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < mpcs.size(); ++i) {
    wsum[static_cast<std::size_t>(assign[i])] += mpcs[i].power;
    wdelay[static_cast<std::size_t>(assign[i])] += mpcs[i].power * mpcs[i].delay_s;
  }
  std::vector<double> centroid(static_cast<std::size_t>(k), 0.0);
  for (int j = 0; j < k; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    if (!(wsum[uj] > 0.0)) return std::numeric_limits<double>::infinity();
    centroid[uj] = wdelay[uj] / wsum[uj];
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < mpcs.size(); ++i) {
    const double d = mpcs[i].delay_s - centroid[static_cast<std::size_t>(assign[i])];
    sse += mpcs[i].power * d * d;
  }
  return sse;
}

// Global minimum of the power-weighted SSE over every surjective assignment
// of points to k clusters. Exponential; keep n small.
inline double exhaustive_min_sse(const std::vector<chansem::dsp::Mpc>& mpcs, int k) {
  const std::size_t n = mpcs.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> assign(n, 0);
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::uint64_t>(k);
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    std::vector<bool> used(static_cast<std::size_t>(k), false);
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = static_cast<int>(c % static_cast<std::uint64_t>(k));
      used[static_cast<std::size_t>(assign[i])] = true;
      c /= static_cast<std::uint64_t>(k);
    }
    if (!std::all_of(used.begin(), used.end(), [](bool b) { return b; })) continue;
    best = std::min(best, weighted_sse_of_partition(mpcs, assign, k));
  }
  return best;
}

// Same minimum restricted to partitions that are contiguous in sorted delay
// order; agreement with the exhaustive search is itself asserted in tests.
inline double contiguous_min_sse(std::vector<chansem::dsp::Mpc> mpcs, int k) {
  std::sort(mpcs.begin(), mpcs.end(),
            [](const auto& a, const auto& b) { return a.delay_s < b.delay_s; });
  const int n = static_cast<int>(mpcs.size());
  double best = std::numeric_limits<double>::infinity();
  // choose k-1 cut positions in [1, n-1]
  std::vector<int> cuts(static_cast<std::size_t>(k - 1));
  std::function<void(int, int)> recurse = [&](int idx, int from) {
    if (idx == k - 1) {
      std::vector<int> assign(static_cast<std::size_t>(n));
      int cluster = 0;
      for (int i = 0; i < n; ++i) {
        while (cluster < k - 1 && i >= cuts[static_cast<std::size_t>(cluster)]) ++cluster;
        assign[static_cast<std::size_t>(i)] = cluster;
      }
      best = std::min(best, weighted_sse_of_partition(mpcs, assign, k));
      return;
    }
    for (int c = from; c <= n - (k - 1 - idx); ++c) {
      cuts[static_cast<std::size_t>(idx)] = c;
      recurse(idx + 1, c + 1);
    }
  };
  if (k == 1) return weighted_sse_of_partition(mpcs, std::vector<int>(mpcs.size(), 0), 1);
  recurse(0, 1);
  return best;
}

// Minimum-total-distance one-to-one assignment of tracks to detections with
// a gate, maximizing match count first. Exhaustive over permutations of the
// smaller side; fine for <= 6x6.
struct AssignmentOracle {
  std::size_t matches = 0;
  double total_distance = 0.0;
};

inline AssignmentOracle optimal_assignment(const std::vector<double>& tracks,
                                           const std::vector<double>& detections, double gate) {
  const std::size_t nt = tracks.size();
  const std::size_t nd = detections.size();
  std::vector<int> choice(nt, -1);
  AssignmentOracle best;

  std::function<void(std::size_t, std::size_t, double, std::vector<bool>&)> recurse =
      [&](std::size_t ti, std::size_t matched, double cost, std::vector<bool>& used) {
        if (ti == nt) {
          if (matched > best.matches ||
              (matched == best.matches && cost < best.total_distance)) {
            best.matches = matched;
            best.total_distance = cost;
          }
          return;
        }
        recurse(ti + 1, matched, cost, used);  // leave track unmatched
        for (std::size_t di = 0; di < nd; ++di) {
          if (used[di]) continue;
          const double d = std::abs(tracks[ti] - detections[di]);
          if (d > gate) continue;
          used[di] = true;
          recurse(ti + 1, matched + 1, cost + d, used);
          used[di] = false;
        }
      };
  std::vector<bool> used(nd, false);
  best.total_distance = std::numeric_limits<double>::infinity();
  recurse(0, 0, 0.0, used);
  if (best.matches == 0) best.total_distance = 0.0;
  (void)choice;
  return best;
}

inline std::filesystem::path make_temp_dir(const std::string& tag) {
  static std::mt19937_64 rng{std::random_device{}()};
  const auto base = std::filesystem::temp_directory_path();
  for (int attempt = 0; attempt < 64; ++attempt) {
    auto dir = base / ("chansem-" + tag + "-" + std::to_string(rng()));
    std::error_code ec;
    if (std::filesystem::create_directories(dir, ec)) return dir;
  }
  throw std::runtime_error("cannot create temp dir");
}

inline std::string repo_path(const std::string& rel) {
  return std::string(CHANSEM_REPO_DIR) + "/" + rel;
}

}  // namespace testsupport
