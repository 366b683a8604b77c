// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "chansem/dsp.hpp"
#include "test_support.hpp"

using namespace chansem;
using namespace chansem::dsp;

namespace {

sim::FrequencyResponse make_response(std::vector<std::complex<double>> samples,
                                     double bandwidth = 1e9) {
  sim::FrequencyResponse fr;
  fr.snapshot_time = 0.0;
  fr.bandwidth_hz = bandwidth;
  fr.samples = std::move(samples);
  return fr;
}

// Tone ramp of a single path: H_k = a * exp(-j 2 pi k df tau), df = B/N.
sim::FrequencyResponse single_path(std::size_t n, double bandwidth, double delay, double amp) {
  std::vector<std::complex<double>> samples(n);
  const double df = bandwidth / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k)
    samples[k] = std::polar(amp, -2.0 * M_PI * static_cast<double>(k) * df * delay);
  return make_response(std::move(samples), bandwidth);
}

double total_power(const std::vector<std::complex<double>>& v) {
  double p = 0.0;
  for (const auto& s : v) p += std::norm(s);
  return p;
}

}  // namespace

TEST_CASE("constant spectrum collapses to a single tap at delay zero", "[dsp]") {
  const auto fr = make_response(std::vector<std::complex<double>>(1000, {1.0, 0.0}));
  const auto cir = to_cir(fr);
  CHECK_THAT(std::abs(cir.taps[0]), Catch::Matchers::WithinRel(std::sqrt(1000.0), 1e-12));
  for (std::size_t i = 1; i < cir.taps.size(); ++i)
    CHECK(std::abs(cir.taps[i]) <= 1e-12);
}

TEST_CASE("tone ramp lands on the on-grid delay bin", "[dsp]") {
  // 5 ns at B = 1 GHz, N = 1000: bin 5 exactly
  const auto fr = single_path(1000, 1e9, 5e-9, 1.0);
  const auto cir = to_cir(fr);
  CHECK(cir.delay_step_s == 1e-9);
  CHECK_THAT(std::abs(cir.taps[5]), Catch::Matchers::WithinRel(std::sqrt(1000.0), 1e-10));
  for (std::size_t i = 0; i < cir.taps.size(); ++i) {
    if (i == 5) continue;
    CHECK(std::abs(cir.taps[i]) <= 1e-9);
  }
}

TEST_CASE("two-path response matches the direct transform sum", "[dsp]") {
  const std::size_t n = 100;
  const double bw = 1e9;
  auto fr = single_path(n, bw, 20e-9, 1.0);
  const auto second = single_path(n, bw, 40e-9, 0.5);
  for (std::size_t k = 0; k < n; ++k) fr.samples[k] += second.samples[k];

  const auto cir = to_cir(fr);
  const auto oracle = testsupport::naive_inverse_dft(fr.samples);
  for (std::size_t i = 0; i < n; ++i)
    CHECK_THAT(std::abs(cir.taps[i] - oracle[i]), Catch::Matchers::WithinAbs(0.0, 1e-10));

  CHECK_THAT(std::abs(cir.taps[20]), Catch::Matchers::WithinRel(1.0 * std::sqrt(100.0), 1e-10));
  CHECK_THAT(std::abs(cir.taps[40]), Catch::Matchers::WithinRel(0.5 * std::sqrt(100.0), 1e-10));
  CHECK_THAT(std::abs(cir.taps[20]) / std::abs(cir.taps[40]),
             Catch::Matchers::WithinRel(2.0, 1e-9));
}

TEST_CASE("transform is unitary and invertible on random responses", "[dsp]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 16 + rng() % 240;
    std::vector<std::complex<double>> samples(n);
    for (auto& s : samples) s = {dist(rng), dist(rng)};
    const auto fr = make_response(samples, 0.5e9 + static_cast<double>(rng() % 1000) * 1e6);

    const auto cir = to_cir(fr);
    const double in_power = total_power(fr.samples);
    const double out_power = total_power(cir.taps);
    CHECK_THAT(out_power, Catch::Matchers::WithinRel(in_power, 1e-10));

    // independent round trip: forward direct sum recovers the input
    const auto back = testsupport::naive_forward_dft(cir.taps);
    for (std::size_t k = 0; k < n; ++k)
      CHECK_THAT(std::abs(back[k] - fr.samples[k]),
                 Catch::Matchers::WithinAbs(0.0, 1e-10 * std::sqrt(in_power)));
  }
}

TEST_CASE("non-finite samples are rejected", "[dsp]") {
  auto fr = make_response(std::vector<std::complex<double>>(16, {1.0, 0.0}));
  fr.samples[3] = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  CHECK_THROWS_AS(to_cir(fr), InvalidArgument);
}

TEST_CASE("PDP bins equal squared tap magnitudes exactly", "[dsp]") {
  Cir cir;
  cir.delay_step_s = 1e-9;
  cir.taps = {{1.0, 0.0}, {3.0, 4.0}, {0.0, 0.0}, {-0.5, 0.25}};
  const auto pdp = to_pdp(cir);
  CHECK(pdp.bins[0] == 1.0);
  CHECK(pdp.bins[1] == 25.0);
  CHECK(pdp.bins[2] == 0.0);
  for (std::size_t i = 0; i < cir.taps.size(); ++i) CHECK(pdp.bins[i] == std::norm(cir.taps[i]));
}

TEST_CASE("noise floor is the median times the margin", "[dsp]") {
  Pdp pdp;
  pdp.delay_step_s = 1e-9;

  SECTION("uniform bins") {
    pdp.bins.assign(64, 0.25);
    CHECK_THAT(estimate_noise_floor(pdp, 6.0),
               Catch::Matchers::WithinRel(0.25 * db_to_linear(6.0), 1e-12));
  }
  SECTION("a huge spike does not move the floor") {
    pdp.bins.assign(64, 0.25);
    pdp.bins[10] = 1e9;
    CHECK_THAT(estimate_noise_floor(pdp, 6.0),
               Catch::Matchers::WithinRel(0.25 * db_to_linear(6.0), 1e-12));
  }
}

TEST_CASE("noise floor tracks the injected noise power", "[dsp]") {
  sim::Scene scene;
  scene.duration_s = 0.0;
  scene.snapshot_rate_hz = 1.0;
  scene.noise_floor_db = -20.0;
  scene.rng_seed = 5;
  scene.sounding.n_tones = 4096;
  scene.platform.waypoints = {{0.0, 0.0, 0.0}};
  const auto snap = sim::synthesize_snapshot(scene, 0.0);
  const auto pdp = to_pdp(to_cir(snap.response));

  const double truth = db_to_linear(-20.0);
  const double floor = estimate_noise_floor(pdp);  // default 6 dB margin
  const double median = floor / db_to_linear(6.0);
  CHECK(floor >= median);
  CHECK(floor <= 10.0 * median);
  // the median of exponential bin powers is ln(2) of the true mean
  CHECK_THAT(median, Catch::Matchers::WithinRel(truth * std::log(2.0), 0.10));
}

TEST_CASE("all bins below the floor extract nothing", "[dsp]") {
  Pdp pdp;
  pdp.delay_step_s = 1e-9;
  pdp.bins.assign(32, 0.1);
  Cir cir;
  cir.delay_step_s = 1e-9;
  cir.taps.assign(32, {0.3, 0.1});
  CHECK(extract_mpcs(pdp, cir, 1.0).empty());
}

TEST_CASE("a single on-grid path extracts at the exact delay", "[dsp]") {
  const auto fr = single_path(256, 1e9, 17e-9, 0.8);
  const auto cir = to_cir(fr);
  const auto pdp = to_pdp(cir);
  const auto mpcs = extract_mpcs(pdp, cir, 1e-6);
  REQUIRE(mpcs.size() == 1);
  CHECK_THAT(std::abs(mpcs[0].delay_s - 17e-9), Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK(mpcs[0].power == mpcs[0].amplitude * mpcs[0].amplitude);
  CHECK(mpcs[0].snapshot_time == pdp.snapshot_time);
}

TEST_CASE("off-grid delays are recovered to a fraction of a bin", "[dsp]") {
  // the log-power parabola has its worst bias around a third of a bin off
  // grid; a tenth of a bin typical, a quarter worst-case
  double worst = 0.0, sum = 0.0;
  int count = 0;
  for (double frac = 0.05; frac < 1.0; frac += 0.1) {
    const double delay_ns = 40.0 + frac;
    const auto fr = single_path(512, 1e9, delay_ns * 1e-9, 1.0);
    const auto cir = to_cir(fr);
    const auto pdp = to_pdp(cir);
    const auto mpcs = extract_mpcs(pdp, cir, 1e-4);
    REQUIRE_FALSE(mpcs.empty());
    const auto strongest =
        std::max_element(mpcs.begin(), mpcs.end(),
                         [](const Mpc& a, const Mpc& b) { return a.power < b.power; });
    const double err = std::abs(strongest->delay_s * 1e9 - delay_ns);
    worst = std::max(worst, err);
    sum += err;
    ++count;
  }
  CHECK(worst <= 0.25);
  CHECK(sum / count <= 0.15);
}

TEST_CASE("disabling interpolation snaps to the nearest bin", "[dsp]") {
  const auto fr = single_path(512, 1e9, 40.37e-9, 1.0);
  const auto cir = to_cir(fr);
  const auto pdp = to_pdp(cir);
  const auto mpcs = extract_mpcs(pdp, cir, 1e-4, {false});
  REQUIRE_FALSE(mpcs.empty());
  const auto strongest =
      std::max_element(mpcs.begin(), mpcs.end(),
                       [](const Mpc& a, const Mpc& b) { return a.power < b.power; });
  CHECK_THAT(strongest->delay_s, Catch::Matchers::WithinAbs(40e-9, 1e-15));
}

TEST_CASE("leakage bumps near a strong peak are masked", "[dsp]") {
  // strong path half a bin off grid, plus a hand-planted bump on its tail
  auto fr = single_path(256, 1e9, 60.5e-9, 1.0);
  auto cir = to_cir(fr);
  // bump five bins out, at tail level: a real tail ripple, not a path
  cir.taps[66] += std::polar(0.8 * std::abs(cir.taps[66]), 1.0);
  const auto pdp = to_pdp(cir);

  const auto masked = extract_mpcs(pdp, cir, 1e-4);
  CHECK(masked.size() == 1);
  CHECK_THAT(masked[0].delay_s * 1e9, Catch::Matchers::WithinAbs(60.5, 0.2));

  ExtractOptions raw;
  raw.mask_leakage = false;
  const auto unmasked = extract_mpcs(pdp, cir, 1e-4, raw);
  CHECK(unmasked.size() > masked.size());
}

TEST_CASE("a true path above the leakage model survives the mask", "[dsp]") {
  auto fr = single_path(256, 1e9, 60.5e-9, 1.0);
  const auto second = single_path(256, 1e9, 66.0e-9, 0.35);
  for (std::size_t k = 0; k < fr.samples.size(); ++k) fr.samples[k] += second.samples[k];
  const auto cir = to_cir(fr);
  const auto pdp = to_pdp(cir);
  const auto mpcs = extract_mpcs(pdp, cir, 1e-4);
  REQUIRE(mpcs.size() == 2);
  CHECK_THAT(mpcs[0].delay_s * 1e9, Catch::Matchers::WithinAbs(60.5, 0.3));
  CHECK_THAT(mpcs[1].delay_s * 1e9, Catch::Matchers::WithinAbs(66.0, 0.3));
}

TEST_CASE("raising the floor never increases the extraction count", "[dsp]") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> dist(0.0, 0.05);
  auto fr = single_path(128, 1e9, 30e-9, 1.0);
  const auto second = single_path(128, 1e9, 60.4e-9, 0.4);
  for (std::size_t k = 0; k < fr.samples.size(); ++k)
    fr.samples[k] += second.samples[k] + std::complex<double>(dist(rng), dist(rng));
  const auto cir = to_cir(fr);
  const auto pdp = to_pdp(cir);

  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double floor = 1e-4; floor < 1e3; floor *= 4.0) {
    const auto count = extract_mpcs(pdp, cir, floor).size();
    CHECK(count <= prev);
    prev = count;
    for (const auto& m : extract_mpcs(pdp, cir, floor)) {
      CHECK(m.delay_s >= 0.0);
      CHECK(m.delay_s <= static_cast<double>(pdp.bins.size() - 1) * pdp.delay_step_s);
    }
  }
}
