#ifndef TMSPIN_PROTOCOLS_HPP
#define TMSPIN_PROTOCOLS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmspin/analysis.hpp"
#include "tmspin/signal.hpp"

namespace tmspin {

// ---------------------------------------------------------------- hole burning

enum class Lineshape { gaussian, lorentzian };
enum class Polarity { hole, antihole };

const char* to_string(Lineshape l);
Lineshape lineshape_from_string(const std::string& s);
const char* to_string(Polarity p);

struct HoleburnConfig {
  double window = 0.01;                  // MHz half-width of the burn
  double readout_chirp_rate = 3.5e10;    // Hz/s; resolution sqrt(rate)
  Lineshape lineshape = Lineshape::gaussian;
  double saturation = 1.0;               // pump rate in units of 1/T1 per unit dipole^2
  double readout_delay = 10.0;           // us between burn and readout
  double step = 0.005;                   // MHz, readout grid
  double margin = 5.0;                   // MHz beyond the outermost feature
  double spin_node_spacing = 0.0;        // MHz; 0 picks a fraction of the resolution
  double feature_threshold = 1e-3;       // relative to the strongest feature
};

struct Feature {
  double center = 0.0;  // MHz
  double width = 0.0;   // MHz FWHM
  Polarity polarity = Polarity::hole;
  double depth = 0.0;   // signed transmission change at the extremum
};

struct HoleburnResult {
  double b_field = 0.0;
  double delta_g = 0.0;
  double delta_e = 0.0;
  std::vector<double> detuning;
  std::vector<double> transmission_change;
  std::vector<Feature> features;
};

double readout_resolution(double chirp_rate_hz_per_s);

/// Rate-equation burn of the spectral classes followed by a chirped absorption readout.
HoleburnResult hole_burning_scan(double b_field, const ZeemanParams& zp, const LevelSystem& sys,
                                 const HoleburnConfig& cfg = {});

struct WidthSeries {
  std::vector<Point> antihole;  // (B, FWHM at +delta_g)
  std::vector<Point> hole;      // (B, FWHM at +delta_e)
};

WidthSeries widths_vs_field(const std::vector<HoleburnResult>& scans);

// ---------------------------------------------------------------- echo sweeps

/// Grid ensemble used by the echo protocols: midpoint optical grid, one spin
/// deviation on a fine uniform grid, the other tied to it.
EnsembleConfig echo_ensemble(double spin_width_g, double spin_width_e, bool on_excited = false);

struct EchoReadoutOptions {
  double lo_amplitude = 100.0;  // probe field at the detector, in emitted-field units
  double gate = 0.0;            // us; 0 uses the excitation duration
  double timing_scan = 4.0;     // us either side of 2T searched for the gate maximum
  double timing_step = 0.25;    // us
  double beat_floor = 1.0;      // MHz; the beat search starts here, above the slow probe baseline
  double noise_rms = 0.0;       // additive noise on the intensity record
  std::uint64_t noise_seed = 1;
};

struct ParallelOptions {
  int threads = 1;
  std::size_t chunk = 32;  // atoms per work unit; fixes the summation order
};

struct RamanSweepOptions {
  RamanOptions sequence;
  EchoReadoutOptions readout;
  ParallelOptions parallel;
  RunOptions run;
};

struct ExcitedSweepOptions {
  ExcitedEchoOptions sequence;
  EchoReadoutOptions readout;
  ParallelOptions parallel;
  RunOptions run;
};

struct EchoRow {
  double t_delay = 0.0;
  double amplitude = 0.0;
  double beat = 0.0;       // spectral peak of the detection record, MHz
  double peak_time = 0.0;  // gate maximum, us
  Complex component;       // gated complex component at 2T
};

struct EchoSweepResult {
  std::string protocol;
  double delta_g = 0.0;
  double delta_e = 0.0;
  double expected_beat = 0.0;
  double beat_resolution = 0.0;
  std::size_t n_atoms = 0;
  std::vector<EchoRow> rows;
  std::vector<Diagnostic> diagnostics;
  IntegrityReport integrity;
  std::vector<SignalTrace> fields;  // ensemble emission per delay

  std::vector<Point> decay_points() const;
};

EchoSweepResult raman_echo_sweep(const LevelSystem& sys, const EnsembleConfig& ens, const std::vector<double>& t_delays,
                                 const RamanSweepOptions& opts = {});

EchoSweepResult excited_state_echo(const LevelSystem& sys, const EnsembleConfig& ens,
                                   const std::vector<double>& t_delays, const ExcitedSweepOptions& opts = {});

struct PhotonEchoControl {
  bool detuned = true;
  double raman_amplitude = 0.0;   // |spin pathway|
  double contamination = 0.0;     // |full - spin pathway|
  Complex full;
  Complex spin_only;
  IntegrityReport integrity;
};

/// Runs the sequence twice: as is, and with the optical coherences removed right
/// after the excitation. The evolution after the excitation is linear in the state,
/// so the coherent difference is exactly the optical (photon-echo) pathway.
PhotonEchoControl photon_echo_control(const LevelSystem& sys, const EnsembleConfig& ens, double t_delay,
                                      bool detuned, const RamanSweepOptions& opts = {});

/// Ensemble for the control: the optical grid must not revive before 2T and the
/// spin grid only needs to outlast it.
EnsembleConfig control_ensemble(double spin_width_g, double spin_width_e);

/// Sequence for the control. A 2pi bright-state rephasing pulse much stronger than the
/// optical spread leaves the optical coherence unconjugated, and square edges leak
/// ~rabi/delta_e onto the e1 legs when detuned; 0.3 MHz balances both.
RamanOptions control_sequence();

struct SplittingRow {
  double delta_g = 0.0;
  double b_field = 0.0;
  double t2 = 0.0;
  double t2_stderr = 0.0;
  std::vector<Diagnostic> warnings;
  EchoSweepResult sweep;
};

/// Per splitting: field from the ground slope, delta_e and spin widths from the
/// Zeeman laws, then sweep + fit. T2 and the other lifetimes come from `sys`.
std::vector<SplittingRow> t2_vs_splitting(const LevelSystem& sys, const ZeemanParams& zp,
                                          const std::vector<double>& delta_gs, const EnsembleConfig& ens,
                                          const std::vector<double>& t_delays, const RamanSweepOptions& opts = {});

// ---------------------------------------------------------------- output

void write_holeburn_csv(std::ostream& os, const std::vector<HoleburnResult>& scans);
void write_features_csv(std::ostream& os, const std::vector<HoleburnResult>& scans);
/// One row per field; a missing family is written as nan.
void write_widths_csv(std::ostream& os, const std::vector<HoleburnResult>& scans);
void write_sweep_csv(std::ostream& os, const EchoSweepResult& r);
void write_fit_csv(std::ostream& os, const FitResult& f);
void write_splitting_csv(std::ostream& os, const std::vector<SplittingRow>& rows);

/// Flat `key = value` manifest; numbers are written with round-trip precision,
/// diagnostics and notes as `#` comments.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void add_diagnostic(const Diagnostic& d);
  void note(const std::string& text);  // written as a comment
  void write(std::ostream& os) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<std::string> comments_;
};

std::string format_double(double v);

}  // namespace tmspin

#endif
