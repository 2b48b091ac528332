#ifndef TMSPIN_SIGNAL_HPP
#define TMSPIN_SIGNAL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmspin/propagator.hpp"

namespace tmspin {

struct SignalTrace {
  double t0 = 0.0;
  double dt_sample = 0.0;
  std::vector<Complex> samples;

  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt_sample; }
  double span() const { return dt_sample * static_cast<double>(samples.size()); }
};

struct IntensityTrace {
  double t0 = 0.0;
  double dt_sample = 0.0;
  std::vector<double> values;

  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt_sample; }
};

enum class WindowKind { rect, hann };

struct Spectrum {
  std::vector<double> freqs;       // MHz, 0 .. Nyquist
  std::vector<double> magnitudes;  // one-sided, sum of squares = time-domain sum of squares
  WindowKind window = WindowKind::rect;

  double resolution() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

/// Weighted coherent sum of per-atom emission records for one detection window.
class EmissionAccumulator {
 public:
  void add(double weight, const EmissionRecord& rec);
  void add(const EmissionAccumulator& other);
  bool empty() const { return trace_.samples.empty(); }
  const SignalTrace& trace() const { return trace_; }

 private:
  SignalTrace trace_;
};

struct WeightedTrajectory {
  double weight = 1.0;
  const Trajectory* trajectory = nullptr;
};

SignalTrace emitted_field(const std::vector<WeightedTrajectory>& trajectories, std::size_t window = 0);

IntensityTrace heterodyne(const SignalTrace& e, const Tone& probe);

Spectrum spectrum(const IntensityTrace& i, WindowKind window = WindowKind::hann);

/// Spectrum peak above `f_min` (MHz).
double peak_frequency(const Spectrum& s, double f_min = 0.0);

/// Hann-gated Fourier component of `i` at `beat`, scaled so a sinusoid of
/// amplitude A gives |component| = A.
Complex gated_component(const IntensityTrace& i, double center, double beat, double gate);
double echo_amplitude(const IntensityTrace& i, double expected_time, double expected_beat, double gate);

/// Same gate applied to the complex field at a given emission offset.
Complex gated_field_component(const SignalTrace& e, double center, double offset, double gate);

void add_noise(IntensityTrace& i, double sigma, std::uint64_t seed);

void write_trace_csv(std::ostream& os, const SignalTrace& e);
void write_intensity_csv(std::ostream& os, const IntensityTrace& i);
void write_spectrum_csv(std::ostream& os, const Spectrum& s);

}  // namespace tmspin

#endif
