#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <sstream>

#include "tmspin/signal.hpp"

using namespace tmspin;

namespace {

// emission at optical offset f: exp(-i 2 pi f t) times an envelope
template <typename Env>
SignalTrace tone_field(double f, double t0, double dt, std::size_t n, Env env) {
  SignalTrace s{t0, dt, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = s.time(i);
    s.samples.push_back(env(t) * std::polar(1.0, -kTwoPi * f * t));
  }
  return s;
}

Trajectory with_emission(const SignalTrace& s) {
  Trajectory t;
  t.emission.push_back({s.t0, s.dt_sample, s.samples});
  return t;
}

IntensityTrace cosine(double f, double amp, double dt, std::size_t n) {
  IntensityTrace i{0.0, dt, {}};
  for (std::size_t k = 0; k < n; ++k) i.values.push_back(amp * std::cos(kTwoPi * f * i.time(k) + 0.3));
  return i;
}

}  // namespace

TEST_CASE("emitted_field is the weighted sum of the atom fields") {
  const auto a = tone_field(3.0, 0.0, 0.01, 500, [](double) { return Complex(0.2, 0.1); });
  const auto b = tone_field(-7.0, 0.0, 0.01, 500, [](double t) { return Complex(std::exp(-t), 0.0); });
  const Trajectory ta = with_emission(a), tb = with_emission(b);
  const SignalTrace sum = emitted_field({{0.25, &ta}, {1.5, &tb}});
  REQUIRE(sum.samples.size() == 500);
  for (std::size_t i = 0; i < 500; ++i)
    CHECK(std::abs(sum.samples[i] - (0.25 * a.samples[i] + 1.5 * b.samples[i])) < 1e-15);

  const SignalTrace zero = emitted_field({{1.0, &ta}, {-1.0, &ta}});
  for (const auto& z : zero.samples) CHECK(std::abs(z) == 0.0);

  const Trajectory shifted = with_emission(tone_field(3.0, 0.5, 0.01, 500, [](double) { return 1.0; }));
  CHECK_THROWS_AS(emitted_field({{1.0, &ta}, {1.0, &shifted}}), InvalidInput);
  CHECK_THROWS_AS(emitted_field({{1.0, &ta}}, 1), InvalidInput);
}

TEST_CASE("heterodyne: no field gives no signal, a detuned field beats at the detuning") {
  const Tone lo{0.0, 100.0, 0.0};
  const SignalTrace none = tone_field(0.0, 0.0, 0.005, 4000, [](double) { return Complex(0.0); });
  for (double v : heterodyne(none, lo).values) CHECK(std::abs(v) < 1e-9);

  const double a = 0.01;
  const SignalTrace e = tone_field(41.0, 0.0, 0.005, 10000, [&](double) { return Complex(a); });
  const IntensityTrace i = heterodyne(e, lo);
  // LO x field cross term: 2 A a cos(2 pi 41 t)
  CHECK(echo_amplitude(i, 25.0, 41.0, 10.0) == doctest::Approx(2.0 * 100.0 * a).epsilon(1e-3));
  CHECK(echo_amplitude(i, 25.0, 30.0, 10.0) < 1e-3 * 2.0 * 100.0 * a);
}

TEST_CASE("heterodyne amplitude is linear in a small field") {
  const Tone lo{0.0, 100.0, 0.0};
  auto env = [](double t) { return Complex(std::exp(-std::pow((t - 25.0) / 3.0, 2))); };
  const SignalTrace e1 = tone_field(41.0, 0.0, 0.005, 10000, env);
  SignalTrace e2 = e1;
  for (auto& s : e2.samples) s *= 2.0;
  const double a1 = echo_amplitude(heterodyne(e1, lo), 25.0, 41.0, 10.0);
  const double a2 = echo_amplitude(heterodyne(e2, lo), 25.0, 41.0, 10.0);
  CHECK(a2 / a1 == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("spectrum: single tone peak within one bin") {
  const double dt = 0.005;
  const auto n = static_cast<std::size_t>(50.0 / dt);  // 50 us span, 0.02 MHz bins
  const Spectrum s = spectrum(cosine(41.0, 1.0, dt, n));
  CHECK(s.resolution() == doctest::Approx(0.02));
  CHECK(std::abs(peak_frequency(s) - 41.0) <= 0.02);
  CHECK(s.freqs.back() == doctest::Approx(0.5 / dt));
}

TEST_CASE("spectrum: Parseval with the rectangular window") {
  IntensityTrace i = cosine(13.3, 2.0, 0.01, 1000);
  add_noise(i, 0.5, 7);
  const Spectrum s = spectrum(i, WindowKind::rect);
  const double time_energy = std::inner_product(i.values.begin(), i.values.end(), i.values.begin(), 0.0);
  const double freq_energy = std::inner_product(s.magnitudes.begin(), s.magnitudes.end(), s.magnitudes.begin(), 0.0);
  CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-10));
}

TEST_CASE("spectrum resolves two tones") {
  IntensityTrace i = cosine(17.0, 1.0, 0.005, 20000);
  const IntensityTrace j = cosine(41.0, 0.5, 0.005, 20000);
  for (std::size_t k = 0; k < i.values.size(); ++k) i.values[k] += j.values[k];
  const Spectrum s = spectrum(i);
  CHECK(std::abs(peak_frequency(s) - 17.0) <= s.resolution());
  CHECK(std::abs(peak_frequency(s, 30.0) - 41.0) <= s.resolution());
  CHECK_THROWS_AS(peak_frequency(s, 1e6), InvalidInput);
  CHECK_THROWS_AS(spectrum(IntensityTrace{0.0, 0.1, {1.0}}), InvalidInput);
}

TEST_CASE("gating: argument errors") {
  const IntensityTrace i = cosine(41.0, 1.0, 0.01, 1000);  // 0 .. 9.99 us
  CHECK_THROWS_AS(gated_component(i, 5.0, 41.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(gated_component(i, 5.0, 41.0, -1.0), InvalidInput);
  CHECK_THROWS_AS(gated_component(i, 9.0, 41.0, 4.0), InvalidInput);
  CHECK_THROWS_AS(gated_component(i, 1.0, 41.0, 4.0), InvalidInput);
  CHECK_NOTHROW(gated_component(i, 5.0, 41.0, 9.0));
}

TEST_CASE("gated amplitude localizes an echo") {
  const Tone lo{0.0, 100.0, 0.0};
  const double center = 73.0;
  auto env = [&](double t) { return Complex(1e-3 * std::exp(-std::pow((t - center) / 4.0, 2))); };
  const IntensityTrace i = heterodyne(tone_field(41.0, 50.0, 0.005, 10000, env), lo);
  double best_t = 0.0, best = -1.0;
  for (double c = 60.0; c <= 86.0; c += 0.25) {
    const double a = echo_amplitude(i, c, 41.0, 10.0);
    if (a > best) best = a, best_t = c;
  }
  CHECK(best_t == doctest::Approx(center));
  CHECK(echo_amplitude(i, center, 41.0, 10.0) > 5.0 * echo_amplitude(i, center + 15.0, 41.0, 10.0));
}

TEST_CASE("gated field component picks the optical offset") {
  const SignalTrace e = tone_field(-4.5, 0.0, 0.01, 2000, [](double) { return Complex(0.0, 0.3); });
  CHECK(std::abs(gated_field_component(e, 10.0, -4.5, 8.0) - Complex(0.0, 0.3)) < 1e-12);
  CHECK(std::abs(gated_field_component(e, 10.0, 4.5, 8.0)) < 1e-3);
}

TEST_CASE("add_noise: seeded and calibrated") {
  IntensityTrace a{0.0, 0.01, std::vector<double>(20000, 0.0)};
  IntensityTrace b = a;
  add_noise(a, 0.7, 42);
  add_noise(b, 0.7, 42);
  CHECK(a.values == b.values);
  double ss = 0.0;
  for (double v : a.values) ss += v * v;
  CHECK(std::sqrt(ss / a.values.size()) == doctest::Approx(0.7).epsilon(0.03));
  IntensityTrace c{0.0, 0.01, std::vector<double>(20000, 0.0)};
  add_noise(c, 0.7, 43);
  CHECK(c.values != a.values);
  CHECK_THROWS_AS(add_noise(c, -0.1, 1), InvalidInput);
}

TEST_CASE("CSV writers carry headers") {
  std::ostringstream t, f, in;
  write_trace_csv(t, tone_field(1.0, 0.0, 0.5, 3, [](double) { return Complex(1.0); }));
  write_spectrum_csv(f, spectrum(cosine(1.0, 1.0, 0.1, 16)));
  write_intensity_csv(in, cosine(1.0, 1.0, 0.1, 4));
  CHECK(t.str().rfind("t_us,re,im\n", 0) == 0);
  CHECK(f.str().rfind("f_MHz,mag\n", 0) == 0);
  CHECK(in.str().rfind("t_us,intensity\n", 0) == 0);
  const std::string ts = t.str();
  CHECK(std::count(ts.begin(), ts.end(), '\n') == 4);
}
