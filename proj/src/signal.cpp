#include "tmspin/signal.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <unsupported/Eigen/FFT>

namespace tmspin {

void EmissionAccumulator::add(double weight, const EmissionRecord& rec) {
  if (trace_.samples.empty()) {
    trace_.t0 = rec.t0;
    trace_.dt_sample = rec.dt;
    trace_.samples.assign(rec.samples.size(), Complex(0.0));
  } else if (rec.t0 != trace_.t0 || rec.dt != trace_.dt_sample || rec.samples.size() != trace_.samples.size()) {
    throw InvalidInput("emission records sampled on different grids");
  }
  for (std::size_t i = 0; i < rec.samples.size(); ++i) trace_.samples[i] += weight * rec.samples[i];
}

void EmissionAccumulator::add(const EmissionAccumulator& other) {
  if (other.empty()) return;
  add(1.0, EmissionRecord{other.trace_.t0, other.trace_.dt_sample, other.trace_.samples});
}

SignalTrace emitted_field(const std::vector<WeightedTrajectory>& trajectories, std::size_t window) {
  EmissionAccumulator acc;
  for (const auto& wt : trajectories) {
    if (!wt.trajectory || window >= wt.trajectory->emission.size())
      throw InvalidInput("trajectory lacks detection window " + std::to_string(window));
    acc.add(wt.weight, wt.trajectory->emission[window]);
  }
  return acc.trace();
}

IntensityTrace heterodyne(const SignalTrace& e, const Tone& probe) {
  IntensityTrace out;
  out.t0 = e.t0;
  out.dt_sample = e.dt_sample;
  out.values.resize(e.samples.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < e.samples.size(); ++i) {
    const Complex ep = std::polar(probe.rabi, -(kTwoPi * probe.offset * e.time(i) + probe.phase));
    out.values[i] = std::norm(ep + e.samples[i]);
    mean += out.values[i];
  }
  if (!out.values.empty()) mean /= static_cast<double>(out.values.size());
  for (double& v : out.values) v -= mean;
  return out;
}

namespace {

bool smooth(std::size_t n) {
  for (std::size_t p : {2, 3, 5, 7})
    while (n % p == 0) n /= p;
  return n == 1;
}

double window_value(WindowKind w, std::size_t i, std::size_t n) {
  if (w == WindowKind::rect || n < 2) return 1.0;
  return 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1));
}

}  // namespace

Spectrum spectrum(const IntensityTrace& in, WindowKind window) {
  if (in.values.size() < 2) throw InvalidInput("spectrum needs at least 2 samples");
  // trailing samples are dropped down to a 7-smooth length so the FFT stays fast
  std::size_t n = in.values.size();
  while (!smooth(n)) --n;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = in.values[i] * window_value(window, i, n);
  Eigen::FFT<double> fft;
  std::vector<Complex> xf;
  fft.fwd(xf, x);
  Spectrum s;
  s.window = window;
  const std::size_t half = n / 2;
  const double df = 1.0 / (static_cast<double>(n) * in.dt_sample);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k <= half; ++k) {
    const bool single = k == 0 || (n % 2 == 0 && k == half);
    s.freqs.push_back(static_cast<double>(k) * df);
    s.magnitudes.push_back(std::abs(xf[k]) * norm * (single ? 1.0 : std::sqrt(2.0)));
  }
  return s;
}

double peak_frequency(const Spectrum& s, double f_min) {
  std::size_t best = s.freqs.size();
  for (std::size_t k = 0; k < s.freqs.size(); ++k)
    if (s.freqs[k] >= f_min && (best == s.freqs.size() || s.magnitudes[k] > s.magnitudes[best])) best = k;
  if (best == s.freqs.size()) throw InvalidInput("no spectral bin above the requested frequency");
  return s.freqs[best];
}

namespace {

template <typename Sample, typename Value>
Complex gate_sum(const std::vector<Sample>& v, double t0, double dt, double center, double freq, double gate,
                 Value value) {
  if (!(gate > 0.0)) throw InvalidInput("gate must be > 0");
  const double lo = center - 0.5 * gate, hi = center + 0.5 * gate;
  const double t_last = t0 + dt * static_cast<double>(v.size() - 1);
  if (v.empty() || lo < t0 - 1e-9 || hi > t_last + 1e-9)
    throw InvalidInput("gate [" + std::to_string(lo) + ", " + std::to_string(hi) + "] us lies outside the trace");
  const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((lo - t0) / dt - 1e-9)));
  const auto last = std::min(v.size() - 1, static_cast<std::size_t>(std::floor((hi - t0) / dt + 1e-9)));
  Complex acc = 0.0;
  double wsum = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    const double t = t0 + static_cast<double>(i) * dt;
    const double w = 0.5 + 0.5 * std::cos(kTwoPi * (t - center) / gate);
    acc += w * value(v[i]) * std::polar(1.0, -kTwoPi * freq * t);
    wsum += w;
  }
  if (wsum <= 0.0) throw InvalidInput("gate contains no samples");
  return acc / wsum;
}

}  // namespace

Complex gated_component(const IntensityTrace& i, double center, double beat, double gate) {
  return 2.0 * gate_sum(i.values, i.t0, i.dt_sample, center, beat, gate, [](double x) { return Complex(x); });
}

double echo_amplitude(const IntensityTrace& i, double expected_time, double expected_beat, double gate) {
  return std::abs(gated_component(i, expected_time, expected_beat, gate));
}

Complex gated_field_component(const SignalTrace& e, double center, double offset, double gate) {
  // emission at offset f varies as exp(-i 2 pi f t)
  return gate_sum(e.samples, e.t0, e.dt_sample, center, -offset, gate, [](const Complex& x) { return x; });
}

void add_noise(IntensityTrace& i, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidInput("noise amplitude must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  for (double& v : i.values) v += nd(rng);
}

void write_trace_csv(std::ostream& os, const SignalTrace& e) {
  os << "t_us,re,im\n";
  os.precision(17);
  for (std::size_t i = 0; i < e.samples.size(); ++i)
    os << e.time(i) << ',' << e.samples[i].real() << ',' << e.samples[i].imag() << '\n';
}

void write_intensity_csv(std::ostream& os, const IntensityTrace& in) {
  os << "t_us,intensity\n";
  os.precision(17);
  for (std::size_t i = 0; i < in.values.size(); ++i) os << in.time(i) << ',' << in.values[i] << '\n';
}

void write_spectrum_csv(std::ostream& os, const Spectrum& s) {
  os << "f_MHz,mag\n";
  os.precision(17);
  for (std::size_t k = 0; k < s.freqs.size(); ++k) os << s.freqs[k] << ',' << s.magnitudes[k] << '\n';
}

}  // namespace tmspin
