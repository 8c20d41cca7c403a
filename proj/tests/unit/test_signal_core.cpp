#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "doctest.h"

#include "esvit/dataset_io.hpp"
#include "esvit/error.hpp"
#include "esvit/signal_core.hpp"

using namespace esvit;

namespace {

constexpr double kPi = std::numbers::pi;

TimeSeries series(std::vector<double> x, double fs) { return TimeSeries{std::move(x), fs, "test"}; }

TimeSeries sine(double freq, double fs, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * freq * static_cast<double>(i) / fs);
  return series(std::move(x), fs);
}

double rms(const std::vector<double>& x, std::size_t from = 0, std::size_t to = 0) {
  if (to == 0) to = x.size();
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(to - from));
}

double db(double mag) { return 20.0 * std::log10(mag); }

// Analog Butterworth band-pass magnitude at the pre-warped digital frequency.
double butterworth_oracle_db(double f, double lo, double hi, int n, double fs) {
  auto warp = [fs](double hz) { return 2.0 * fs * std::tan(kPi * hz / fs); };
  const double w = warp(f), wl = warp(lo), wh = warp(hi);
  const double w0sq = wl * wh;
  const double b = wh - wl;
  const double x = (w * w - w0sq) / (w * b);
  return 10.0 * std::log10(1.0 / (1.0 + std::pow(x * x, n)));
}

}  // namespace

TEST_CASE("baseline removal subtracts the mean of the first window") {
  SUBCASE("constant signal becomes zero") {
    const TimeSeries out = remove_baseline(series(std::vector<double>(1280, 3.0), 128.0), {5.0});
    for (double v : out.samples) CHECK(v == 0.0);
  }
  SUBCASE("window length at 128 Hz") { CHECK(baseline_window_samples({5.0}, 128.0) == 640); }
  SUBCASE("ramp with a 4 s window at 1 Hz") {
    std::vector<double> ramp(10);
    std::iota(ramp.begin(), ramp.end(), 0.0);
    const TimeSeries out = remove_baseline(series(ramp, 1.0), {4.0});
    for (std::size_t i = 0; i < 10; ++i) CHECK(out.samples[i] == doctest::Approx(static_cast<double>(i) - 1.5));
  }
  SUBCASE("idempotent once the window mean is zero") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(2.0, 1.0);
    std::vector<double> x(1000);
    for (double& v : x) v = nd(rng);
    const TimeSeries once = remove_baseline(series(x, 100.0), {2.0});
    double m = 0.0;
    for (std::size_t i = 0; i < 200; ++i) m += once.samples[i];
    CHECK(std::abs(m / 200.0) < 1e-9);
    const TimeSeries twice = remove_baseline(once, {2.0});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(twice.samples[i] == doctest::Approx(once.samples[i]).epsilon(1e-12));
  }
  SUBCASE("discarding the window shortens the signal") {
    const TimeSeries out = remove_baseline(series(std::vector<double>(1000, 1.0), 100.0), {2.0, true});
    CHECK(out.size() == 800);
  }
  SUBCASE("window longer than the signal is rejected") {
    CHECK_THROWS_AS(remove_baseline(series(std::vector<double>(100, 1.0), 10.0), {20.0}), Error);
  }
  SUBCASE("non-finite samples are rejected") {
    CHECK_THROWS_AS(remove_baseline(series({1.0, NAN, 2.0}, 1.0), {1.0}), Error);
    CHECK_THROWS_AS(remove_baseline(series({1.0, INFINITY}, 1.0), {1.0}), Error);
  }
}

TEST_CASE("band-pass design matches the analytic Butterworth response") {
  const BandpassSpec spec;
  const double fs = 128.0;
  const FilterCoefficients c = design_bandpass(spec, fs);
  CHECK(c.sections.size() == 2);
  CHECK(is_stable(c));

  CHECK(db(magnitude_response(c, 0.5, fs)) >= -3.5);
  CHECK(db(magnitude_response(c, 0.5, fs)) <= -2.5);
  CHECK(db(magnitude_response(c, 15.0, fs)) >= -3.5);
  CHECK(db(magnitude_response(c, 15.0, fs)) <= -2.5);
  CHECK(db(magnitude_response(c, 5.0, fs)) >= -0.5);

  for (double f : {0.05, 0.2, 0.5, 1.0, 2.0, 3.0, 8.0, 12.0, 15.0, 20.0, 30.0, 45.0, 60.0}) {
    CAPTURE(f);
    CHECK(std::abs(db(magnitude_response(c, f, fs)) - butterworth_oracle_db(f, 0.5, 15.0, 2, fs)) < 1e-6);
  }
}

TEST_CASE("band-pass order semantics") {
  BandpassSpec total;
  total.order = 2;
  total.semantics = OrderSemantics::kTotal;
  CHECK(total.prototype_order() == 1);
  CHECK(design_bandpass(total, 128.0).sections.size() == 1);
  BandpassSpec three;
  three.order = 3;
  const FilterCoefficients c = design_bandpass(three, 128.0);
  CHECK(c.sections.size() == 3);
  CHECK(is_stable(c));
  for (double f : {0.3, 2.0, 14.0, 25.0}) {
    CHECK(std::abs(db(magnitude_response(c, f, 128.0)) - butterworth_oracle_db(f, 0.5, 15.0, 3, 128.0)) < 1e-6);
  }
}

TEST_CASE("band-pass design rejects edges at or above Nyquist") {
  BandpassSpec spec;
  spec.high_hz = 70.0;
  CHECK_THROWS_AS(design_bandpass(spec, 128.0), Error);
  spec.high_hz = 64.0;
  CHECK_THROWS_AS(design_bandpass(spec, 128.0), Error);
  spec.high_hz = 10.0;
  spec.low_hz = 12.0;
  CHECK_THROWS_AS(design_bandpass(spec, 128.0), Error);
}

TEST_CASE("zero-phase filtering") {
  const double fs = 128.0;
  const FilterCoefficients c = design_bandpass({}, fs);

  SUBCASE("zero in, zero out") {
    const TimeSeries out = apply_filter(series(std::vector<double>(500, 0.0), fs), c);
    for (double v : out.samples) CHECK(v == 0.0);
  }
  SUBCASE("50 Hz is suppressed") {
    const TimeSeries in = sine(50.0, fs, 1280);
    const TimeSeries out = apply_filter(in, c);
    CHECK(out.size() == in.size());
    // Edge transients excluded.
    const std::vector<double> mid(out.samples.begin() + 320, out.samples.begin() + 960);
    CHECK(rms(mid) <= 0.05 * rms(in.samples));
  }
  SUBCASE("DC is removed") {
    const TimeSeries out = apply_filter(series(std::vector<double>(1280, 2.0), fs), c);
    const double mean = std::accumulate(out.samples.begin(), out.samples.end(), 0.0) / 1280.0;
    CHECK(std::abs(mean) <= 0.01 * 2.0);
  }
  SUBCASE("passband sinusoid keeps its phase") {
    for (double f : {2.0, 5.0, 10.0}) {
      const TimeSeries in = sine(f, fs, 1280);
      const TimeSeries out = apply_filter(in, c);
      int best = 0;
      double best_v = -1e300;
      for (int lag = -10; lag <= 10; ++lag) {
        double s = 0.0;
        for (std::size_t i = 200; i < 1080; ++i) s += in.samples[i] * out.samples[static_cast<std::size_t>(static_cast<int>(i) + lag)];
        if (s > best_v) {
          best_v = s;
          best = lag;
        }
      }
      CAPTURE(f);
      CHECK(std::abs(best) <= 1);
    }
  }
  SUBCASE("impulse response decays") {
    std::vector<double> x(1280, 0.0);
    x[640] = 1.0;
    const TimeSeries out = apply_filter(series(x, fs), c);
    const double peak = *std::max_element(out.samples.begin(), out.samples.end(),
                                          [](double a, double b) { return std::abs(a) < std::abs(b); });
    std::vector<double> causal(1280, 0.0);
    causal[0] = 1.0;
    const std::vector<double> h = filter_forward(c, causal);
    CHECK(rms(h, 1152, 1280) < 1e-6 * std::abs(peak));
  }
  SUBCASE("empty signals are rejected") { CHECK_THROWS_AS(apply_filter(series({}, fs), c), Error); }
  SUBCASE("short signals still filter") {
    const TimeSeries out = apply_filter(series({1.0, -1.0, 0.5}, fs), c);
    CHECK(out.size() == 3);
  }
}

TEST_CASE("R-peak detection") {
  SUBCASE("impulse train") {
    std::vector<double> x(1000, 0.0);
    for (std::size_t i : {100, 400, 700}) x[i] = 1.0;
    CHECK(detect_r_peaks(series(x, 128.0), 0.5, 51).indices == std::vector<std::size_t>{100, 400, 700});
  }
  SUBCASE("threshold drops small peaks") {
    std::vector<double> x(300, 0.0);
    x[50] = 1.0;
    x[200] = 0.4;
    CHECK(detect_r_peaks(series(x, 128.0), 0.5, 10).indices == std::vector<std::size_t>{50});
  }
  SUBCASE("constant signal has no peaks") {
    CHECK(detect_r_peaks(series(std::vector<double>(100, 2.0), 128.0), 0.5, 10).indices.empty());
  }
  SUBCASE("min distance keeps the taller peak") {
    std::vector<double> x(100, 0.0);
    x[40] = 0.8;
    x[45] = 1.0;
    x[80] = 0.9;
    CHECK(detect_r_peaks(series(x, 128.0), 0.5, 10).indices == std::vector<std::size_t>{45, 80});
  }
  SUBCASE("plateaus report their leftmost index") {
    std::vector<double> x(50, 0.0);
    x[20] = x[21] = x[22] = 1.0;
    CHECK(detect_r_peaks(series(x, 128.0), 0.5, 5).indices == std::vector<std::size_t>{20});
  }
  SUBCASE("invariant under positive scaling") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    std::vector<double> x(2000), y(2000);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = nd(rng);
      y[i] = 7.3 * x[i];
    }
    CHECK(detect_r_peaks(series(x, 128.0), 0.5, 20).indices == detect_r_peaks(series(y, 128.0), 0.5, 20).indices);
  }
  SUBCASE("peaks are local maxima above threshold and spaced") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<double> x(3000);
    for (double& v : x) v = nd(rng);
    const double mx = *std::max_element(x.begin(), x.end());
    const auto idx = detect_r_peaks(series(x, 128.0), 0.5, 30).indices;
    REQUIRE(!idx.empty());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      CHECK(x[idx[k]] >= 0.5 * mx);
      if (idx[k] > 0) CHECK(x[idx[k]] > x[idx[k] - 1]);
      if (k > 0) CHECK(idx[k] - idx[k - 1] >= 30);
    }
  }
  SUBCASE("default minimum distance") { CHECK(default_min_peak_distance(128.0) == 51); }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(detect_r_peaks(series({0.0, 1.0, 0.0}, 1.0), 0.0, 1), Error);
    CHECK_THROWS_AS(detect_r_peaks(series({0.0, 1.0, 0.0}, 1.0), 1.5, 1), Error);
    CHECK_THROWS_AS(detect_r_peaks(series({0.0, 1.0, 0.0}, 1.0), 0.5, 0), Error);
  }
}

TEST_CASE("synthetic ECG at 60 bpm yields 38 to 40 detected beats") {
  SyntheticEcgSpec spec;
  spec.duration_s = 39.0;
  const SyntheticEcg ecg = generate_synthetic_ecg(spec);
  const TimeSeries filtered = apply_filter(remove_baseline(ecg.series, {}), design_bandpass({}, 128.0));
  const PeakList peaks = detect_r_peaks(filtered, 0.5, default_min_peak_distance(128.0));
  CHECK(peaks.indices.size() >= 38);
  CHECK(peaks.indices.size() <= 40);
}

TEST_CASE("segmentation around peaks") {
  const TimeSeries ts = series(std::vector<double>(1000, 0.0), 128.0);
  SUBCASE("window arithmetic") {
    std::vector<double> x(1000);
    std::iota(x.begin(), x.end(), 0.0);
    const auto r = segment_around_peaks(series(x, 128.0), {{150}});
    REQUIRE(r.segments.size() == 1);
    CHECK(r.segments[0].samples.size() == 200);
    CHECK(r.segments[0].samples.front() == 50.0);
    CHECK(r.segments[0].samples.back() == 249.0);
    CHECK(r.segments[0].center_index == 150);
  }
  SUBCASE("boundary peaks are skipped and reported") {
    const auto r = segment_around_peaks(ts, {{40, 500, 950}});
    CHECK(r.segments.size() == 1);
    CHECK(r.skipped_peaks == std::vector<std::size_t>{40, 950});
  }
  SUBCASE("edges of the admissible range") {
    const auto r = segment_around_peaks(ts, {{100, 900}});
    CHECK(r.segments.size() == 2);
    const auto s = segment_around_peaks(ts, {{99, 901}});
    CHECK(s.segments.empty());
    CHECK(s.skipped_peaks.size() == 2);
  }
  SUBCASE("three interior peaks") {
    const auto r = segment_around_peaks(ts, {{200, 500, 800}});
    CHECK(r.segments.size() == 3);
    for (const Segment& s : r.segments) CHECK(s.samples.size() == 200);
  }
  SUBCASE("conservation on random peak sets") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < 1000; i += 1 + rng() % 150) idx.push_back(i);
      const auto r = segment_around_peaks(ts, {idx}, 100, 100);
      CHECK(r.segments.size() + r.skipped_peaks.size() == idx.size());
    }
  }
  SUBCASE("segments carry the parent provenance") {
    const auto r = segment_around_peaks(ts, {{500}});
    const TimeSeries seg = segment_series(r.segments[0], ts);
    CHECK(seg.source == "test");
    CHECK(seg.sampling_rate_hz == 128.0);
  }
}
