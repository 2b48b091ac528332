#ifndef TMSPIN_PULSEKIT_HPP
#define TMSPIN_PULSEKIT_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tmspin/physmodel.hpp"

namespace tmspin {

using ToneSpec = Tone;

struct Chirp {
  double center = 0.0;          // MHz, reached at the pulse midpoint
  double rate_hz_per_s = 0.0;   // stored as given
  double rabi = 0.0;            // MHz

  double rate_mhz_per_us() const { return rate_hz_per_s * 1e-12; }
};

struct Pulse {
  double start = 0.0;     // us
  double duration = 0.0;  // us
  std::variant<std::vector<Tone>, Chirp> shape;

  double end() const { return start + duration; }
  bool is_chirp() const { return std::holds_alternative<Chirp>(shape); }
  const std::vector<Tone>& tones() const { return std::get<std::vector<Tone>>(shape); }
  const Chirp& chirp() const { return std::get<Chirp>(shape); }

  /// Lowest and highest instantaneous offset reached during the pulse.
  std::pair<double, double> offset_extent() const;
  /// Equivalent tone list at absolute time t (a chirp becomes one tone with accumulated phase).
  std::vector<Tone> tones_at(double t) const;
  /// Largest single-leg Rabi frequency among the tones (after any chirp conversion).
  double max_rabi() const;
};

struct DetectionWindow {
  double start = 0.0;
  double duration = 0.0;
  double end() const { return start + duration; }
};

struct Sequence {
  std::vector<Pulse> pulses;
  std::vector<DetectionWindow> detection_windows;
  double bandwidth_limit = 100.0;  // MHz

  double end_time() const;
};

struct HardwareLimits {
  double max_offset_span = 100.0;  // MHz
};

enum class DiagLevel { error, warn };

struct Diagnostic {
  DiagLevel level = DiagLevel::error;
  std::string code;
  std::string message;

  std::string format() const;  // "LEVEL code message"
};

/// Syntax error in a sequence document.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Structurally invalid sequence (overlap, non-positive duration, ...).
class SequenceError : public std::runtime_error {
 public:
  SequenceError(std::vector<int> pulse_indices, const std::string& what);
  const std::vector<int>& pulse_indices() const { return indices_; }

 private:
  std::vector<int> indices_;
};

/// Parses and, when `check` is set, throws SequenceError on structural problems.
Sequence parse_sequence(const std::string& text, bool check = true);
std::string serialize_sequence(const Sequence& seq);

/// Structural problems only (order, overlap, durations, tone lists).
std::vector<Diagnostic> structural_diagnostics(const Sequence& seq);
std::vector<Diagnostic> validate(const Sequence& seq, const HardwareLimits& hw);

bool operator==(const Tone& a, const Tone& b);
bool operator==(const Chirp& a, const Chirp& b);
bool operator==(const Pulse& a, const Pulse& b);
bool operator==(const DetectionWindow& a, const DetectionWindow& b);
bool operator==(const Sequence& a, const Sequence& b);

/// Leg-balanced two-tone Lambda pulse: the weak-leg tone carries rabi / sqrt(R).
std::vector<Tone> balanced_pair(const LevelSystem& sys, double strong_offset, double weak_offset,
                                double rabi, bool weak_is_first);

/// Rabi frequency of the bright superposition driven by a resonant tone pair.
double bright_rabi(const LevelSystem& sys, const std::vector<Tone>& pair, bool weak_is_first);

struct RamanOptions {
  bool detuned_rephasing = true;
  double rephasing_area = std::numbers::pi;  // two-photon area, pi swaps g1 <-> g2
  double probe_rabi = 1e-3;                  // MHz
  double probe_duration = 120.0;             // us, centred on 2T
  double excitation_duration = 10.0;         // us
  double excitation_area = std::numbers::pi;  // bright-state rotation, pi maximises the coherence
  double rephasing_rabi = 1.0;               // strong-leg MHz
  double rephasing_phase = 0.0;              // rad, on the second tone
  bool include_pump = true;
  int pump_pulses = 3;
  double pump_window = 0.5;  // MHz half-width
  double pump_rabi = 0.05;
  double bandwidth_limit = 100.0;
  double detection_span = 0.0;  // 0: detect over the whole probe, else 2T +- span/2
};

/// Pump chirps, bichromatic excitation centred on t = 0, rephasing centred on
/// t = t_delay, probe centred on 2 t_delay.
Sequence standard_raman_sequence(const LevelSystem& sys, double t_delay, const RamanOptions& opts = {});

struct ExcitedEchoOptions {
  double rephasing_area = std::numbers::pi;
  double probe_rabi = 1e-3;
  double probe_duration = 120.0;
  double excitation_duration = 10.0;
  double excitation_area = std::numbers::pi;  // bright-state rotation, pi maximises the coherence
  double rephasing_rabi = 1.0;
  bool include_pump = true;
  int pump_pulses = 3;
  double pump_window = 0.5;
  double pump_rabi = 0.05;
  double bandwidth_limit = 100.0;
  double detection_span = 0.0;
};

/// V-type variant addressing the excited-sublevel coherence (tones 0 and Delta_e from g1).
Sequence excited_echo_sequence(const LevelSystem& sys, double t_delay, const ExcitedEchoOptions& opts = {});

/// Pump chirps over [-window, window] followed by a readout chirp across all features.
Sequence standard_holeburn_sequence(const LevelSystem& sys, double window, double readout_chirp_rate,
                                    double margin = 5.0);

inline constexpr double kPumpChirpDuration = 100.0;  // us

}  // namespace tmspin

#endif
