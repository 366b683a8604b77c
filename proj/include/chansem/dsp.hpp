// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "chansem/core.hpp"
#include "chansem/simulate.hpp"

namespace chansem::dsp {

/// Channel impulse response on the uniform delay grid tau_n = n / bandwidth.
struct Cir {
  double snapshot_time = 0.0;
  double delay_step_s = 0.0;  // exactly 1 / bandwidth
  std::vector<std::complex<double>> taps;
};

/// Power per delay bin: |tap|^2, same grid as the Cir it came from.
struct Pdp {
  double snapshot_time = 0.0;
  double delay_step_s = 0.0;
  std::vector<double> bins;
};

/// One extracted multipath component.
struct Mpc {
  double delay_s = 0.0;
  double amplitude = 0.0;  // linear, tap magnitude under the unitary transform
  double power = 0.0;      // amplitude^2
  double snapshot_time = 0.0;
};

namespace detail {

// FFTW's planner is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Unitary inverse DFT of the tone samples: h_n = sum_k H_k e^{+j2pi kn/N} / sqrt(N).
/// Energy is preserved (Parseval), and a tone ramp e^{-j2pi k m/N} lands on
/// delay bin m exactly.
inline Cir to_cir(const sim::FrequencyResponse& fr) {
  const std::size_t n = fr.samples.size();
  if (n < 2) throw InvalidArgument("need at least 2 tones");
  if (!(fr.bandwidth_hz > 0.0)) throw InvalidArgument("bandwidth must be positive");
  for (const auto& s : fr.samples)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw InvalidArgument("non-finite frequency sample");

  Cir cir;
  cir.snapshot_time = fr.snapshot_time;
  cir.delay_step_s = 1.0 / fr.bandwidth_hz;
  cir.taps.assign(n, {0.0, 0.0});

  std::vector<std::complex<double>> in(fr.samples);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(cir.taps.data()), FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& t : cir.taps) t *= scale;
  return cir;
}

inline Pdp to_pdp(const Cir& cir) {
  Pdp pdp;
  pdp.snapshot_time = cir.snapshot_time;
  pdp.delay_step_s = cir.delay_step_s;
  pdp.bins.reserve(cir.taps.size());
  for (const auto& t : cir.taps) pdp.bins.push_back(std::norm(t));
  return pdp;
}

/// Median bin power times a dynamic-range margin. The median is robust to a
/// handful of strong paths occupying few bins.
inline double estimate_noise_floor(const Pdp& pdp, double margin_db = 6.0) {
  if (pdp.bins.size() < 8) throw InvalidArgument("too few bins for a floor estimate");
  std::vector<double> sorted(pdp.bins);
  const std::size_t n = sorted.size();
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  double median = sorted[n / 2];
  if (n % 2 == 0) {
    std::nth_element(sorted.begin(), sorted.begin() + (n / 2 - 1), sorted.begin() + n / 2);
    median = 0.5 * (median + sorted[n / 2 - 1]);
  }
  return median * db_to_linear(margin_db);
}

struct ExtractOptions {
  bool interpolate = true;    // 3-point parabolic refinement on log power
  bool mask_leakage = true;   // drop maxima explainable as a stronger peak's leakage
  int mask_window_bins = 12;  // how far a strong peak shadows its surroundings
};

/// Picks PDP local maxima strictly above `floor` as discrete multipath
/// components, sorted by delay. Amplitudes are taken at the peak bin; the
/// delay is refined between bins unless interpolation is disabled or a
/// neighbor is empty.
///
/// An off-grid path under the rectangular window leaks a 1/distance
/// amplitude tail; noise riding on that tail forms local maxima that no
/// global floor can separate from weak true paths. With `mask_leakage` a
/// candidate near a stronger peak must exceed that peak's leakage model
/// (amplitude ratio off_grid_fraction / bin_distance) by a factor of two.
inline std::vector<Mpc> extract_mpcs(const Pdp& pdp, const Cir& cir, double floor,
                                     const ExtractOptions& opts = {}) {
  if (!(floor > 0.0)) throw InvalidArgument("noise floor must be positive");
  if (pdp.bins.size() != cir.taps.size())
    throw InvalidArgument("PDP/CIR bin count mismatch");

  struct Candidate {
    std::size_t bin;
    double refined_bin;
    double amplitude;
  };
  std::vector<Candidate> candidates;
  const std::size_t n = pdp.bins.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double p = pdp.bins[i];
    if (!(p > floor)) continue;
    const bool left_ok = (i == 0) || p > pdp.bins[i - 1];
    const bool right_ok = (i + 1 == n) || p >= pdp.bins[i + 1];
    if (!left_ok || !right_ok) continue;

    double bin = static_cast<double>(i);
    // neighbors at roundoff level mean an on-grid path; interpolating on
    // them would pull the estimate off the exact bin
    const double interp_floor = p * 1e-12;
    if (opts.interpolate && i > 0 && i + 1 < n && pdp.bins[i - 1] > interp_floor &&
        pdp.bins[i + 1] > interp_floor) {
      const double l = std::log10(pdp.bins[i - 1]);
      const double c = std::log10(p);
      const double r = std::log10(pdp.bins[i + 1]);
      const double denom = l - 2.0 * c + r;
      if (denom < 0.0) {
        const double offset = 0.5 * (l - r) / denom;
        bin += std::clamp(offset, -0.5, 0.5);
      }
    }
    candidates.push_back({i, bin, std::abs(cir.taps[i])});
  }

  std::vector<bool> keep(candidates.size(), true);
  if (opts.mask_leakage) {
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (candidates[a].amplitude != candidates[b].amplitude)
        return candidates[a].amplitude > candidates[b].amplitude;
      return candidates[a].bin < candidates[b].bin;
    });
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      const auto& weak = candidates[order[oi]];
      for (std::size_t oj = 0; oj < oi && keep[order[oi]]; ++oj) {
        if (!keep[order[oj]]) continue;
        const auto& strong = candidates[order[oj]];
        const double dist = std::abs(static_cast<double>(weak.bin) -
                                     static_cast<double>(strong.bin));
        if (dist < 1.0 || dist > opts.mask_window_bins) continue;
        // measured fraction off grid; floored to cover interpolation error
        double frac = std::abs(strong.refined_bin - static_cast<double>(strong.bin));
        frac = std::max(frac, 0.15);
        const double leak = strong.amplitude * frac / std::max(dist - 0.5, 0.5);
        if (weak.amplitude < 2.0 * leak) keep[order[oi]] = false;
      }
    }
  }

  std::vector<Mpc> mpcs;
  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    if (!keep[ci]) continue;
    Mpc m;
    m.delay_s = candidates[ci].refined_bin * pdp.delay_step_s;
    m.amplitude = candidates[ci].amplitude;
    m.power = m.amplitude * m.amplitude;
    m.snapshot_time = pdp.snapshot_time;
    mpcs.push_back(m);
  }
  std::sort(mpcs.begin(), mpcs.end(),
            [](const Mpc& a, const Mpc& b) { return a.delay_s < b.delay_s; });
  return mpcs;
}

}  // namespace chansem::dsp
