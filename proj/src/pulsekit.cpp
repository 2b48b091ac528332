#include "tmspin/pulsekit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace tmspin {

std::pair<double, double> Pulse::offset_extent() const {
  if (is_chirp()) {
    const Chirp& c = chirp();
    const double half = 0.5 * std::abs(c.rate_mhz_per_us()) * duration;
    return {c.center - half, c.center + half};
  }
  double lo = tones().front().offset, hi = lo;
  for (const Tone& t : tones()) {
    lo = std::min(lo, t.offset);
    hi = std::max(hi, t.offset);
  }
  return {lo, hi};
}

std::vector<Tone> Pulse::tones_at(double t) const {
  if (!is_chirp()) return tones();
  const Chirp& c = chirp();
  const double tau = t - (start + 0.5 * duration);
  const double cycles = c.center * t + 0.5 * c.rate_mhz_per_us() * tau * tau;
  return {Tone{0.0, c.rabi, kTwoPi * cycles}};
}

double Pulse::max_rabi() const {
  if (is_chirp()) return chirp().rabi;
  double m = 0.0;
  for (const Tone& t : tones()) m = std::max(m, t.rabi);
  return m;
}

double Sequence::end_time() const {
  double e = 0.0;
  for (const Pulse& p : pulses) e = std::max(e, p.end());
  for (const DetectionWindow& w : detection_windows) e = std::max(e, w.end());
  return e;
}

std::string Diagnostic::format() const {
  return std::string(level == DiagLevel::error ? "ERROR" : "WARN") + " " + code + " " + message;
}

ParseError::ParseError(int line, int column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

SequenceError::SequenceError(std::vector<int> pulse_indices, const std::string& what)
    : std::runtime_error(what), indices_(std::move(pulse_indices)) {}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// one decimal, for messages
std::string fmt_mhz(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 1);
  return std::string(buf, res.ptr);
}

struct Token {
  std::string text;
  int column;  // 1-based
};

std::vector<Token> split_ws(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    const std::size_t j = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.push_back({line.substr(j, i - j), static_cast<int>(j) + 1});
  }
  return out;
}

double parse_number(const std::string& s, int line, int column, const char* what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ParseError(line, column, std::string("expected ") + what + ", got '" + s + "'");
  return v;
}

void expect_count(const std::vector<Token>& tok, std::size_t n, int line, const std::string& form) {
  if (tok.size() != n) {
    const int col = tok.size() > n ? tok[n].column : tok.back().column + static_cast<int>(tok.back().text.size());
    throw ParseError(line, col, "expected '" + form + "'");
  }
}

std::string pulse_name(int i) { return "pulse " + std::to_string(i); }

}  // namespace

Sequence parse_sequence(const std::string& text, bool check) {
  Sequence seq;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  bool header = false;
  bool seen_bandwidth = false;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (!header) {
      if (tok.size() != 2 || tok[0].text != "seq" || tok[1].text != "v1")
        throw ParseError(lineno, tok[0].column, "expected header 'seq v1'");
      header = true;
      continue;
    }
    const std::string& kw = tok[0].text;
    if (kw == "bandwidth") {
      expect_count(tok, 2, lineno, "bandwidth <MHz>");
      if (seen_bandwidth) throw ParseError(lineno, tok[0].column, "duplicate bandwidth directive");
      seq.bandwidth_limit = parse_number(tok[1].text, lineno, tok[1].column, "bandwidth in MHz");
      if (!(seq.bandwidth_limit > 0.0)) throw ParseError(lineno, tok[1].column, "bandwidth must be > 0");
      seen_bandwidth = true;
    } else if (kw == "detect") {
      expect_count(tok, 3, lineno, "detect <start_us> <dur_us>");
      DetectionWindow w;
      w.start = parse_number(tok[1].text, lineno, tok[1].column, "start time");
      w.duration = parse_number(tok[2].text, lineno, tok[2].column, "duration");
      seq.detection_windows.push_back(w);
    } else if (kw == "pulse") {
      if (tok.size() < 4) expect_count(tok, 5, lineno, "pulse <start_us> <dur_us> tones|chirp ...");
      Pulse p;
      p.start = parse_number(tok[1].text, lineno, tok[1].column, "start time");
      p.duration = parse_number(tok[2].text, lineno, tok[2].column, "duration");
      if (tok[3].text == "tones") {
        expect_count(tok, 5, lineno, "pulse <start> <dur> tones <off:rabi:phase>[,...]");
        std::vector<Tone> tones;
        const std::string& list = tok[4].text;
        std::size_t pos = 0;
        while (true) {
          const std::size_t comma = list.find(',', pos);
          const std::string item = list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
          const int col = tok[4].column + static_cast<int>(pos);
          const std::size_t c1 = item.find(':');
          const std::size_t c2 = c1 == std::string::npos ? c1 : item.find(':', c1 + 1);
          if (c1 == std::string::npos || c2 == std::string::npos || item.find(':', c2 + 1) != std::string::npos)
            throw ParseError(lineno, col, "tone must be 'offset:rabi:phase', got '" + item + "'");
          Tone t;
          t.offset = parse_number(item.substr(0, c1), lineno, col, "tone offset");
          t.rabi = parse_number(item.substr(c1 + 1, c2 - c1 - 1), lineno, col + static_cast<int>(c1) + 1, "tone rabi");
          t.phase = parse_number(item.substr(c2 + 1), lineno, col + static_cast<int>(c2) + 1, "tone phase");
          tones.push_back(t);
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
        p.shape = std::move(tones);
      } else if (tok[3].text == "chirp") {
        expect_count(tok, 7, lineno, "pulse <start> <dur> chirp <center_MHz> <rate_Hz_per_s> <rabi_MHz>");
        Chirp c;
        c.center = parse_number(tok[4].text, lineno, tok[4].column, "chirp center");
        c.rate_hz_per_s = parse_number(tok[5].text, lineno, tok[5].column, "chirp rate");
        c.rabi = parse_number(tok[6].text, lineno, tok[6].column, "chirp rabi");
        p.shape = c;
      } else {
        throw ParseError(lineno, tok[3].column, "unknown pulse shape '" + tok[3].text + "'");
      }
      seq.pulses.push_back(std::move(p));
    } else {
      throw ParseError(lineno, tok[0].column, "unknown directive '" + kw + "'");
    }
  }
  if (!header) throw ParseError(lineno + 1, 1, "missing header 'seq v1'");
  if (check) {
    for (const Diagnostic& d : structural_diagnostics(seq)) {
      if (d.level != DiagLevel::error) continue;
      std::vector<int> idx;
      std::istringstream ms(d.message);
      std::string w;
      while (ms >> w)
        if (w == "pulse" && ms >> w) idx.push_back(std::atoi(w.c_str()));
      throw SequenceError(idx, d.code + ": " + d.message);
    }
  }
  return seq;
}

std::string serialize_sequence(const Sequence& seq) {
  std::string out = "seq v1\n";
  out += "bandwidth " + fmt(seq.bandwidth_limit) + "\n";
  for (const Pulse& p : seq.pulses) {
    out += "pulse " + fmt(p.start) + " " + fmt(p.duration);
    if (p.is_chirp()) {
      const Chirp& c = p.chirp();
      out += " chirp " + fmt(c.center) + " " + fmt(c.rate_hz_per_s) + " " + fmt(c.rabi);
    } else {
      out += " tones ";
      bool first = true;
      for (const Tone& t : p.tones()) {
        if (!first) out += ",";
        first = false;
        out += fmt(t.offset) + ":" + fmt(t.rabi) + ":" + fmt(t.phase);
      }
    }
    out += "\n";
  }
  for (const DetectionWindow& w : seq.detection_windows) out += "detect " + fmt(w.start) + " " + fmt(w.duration) + "\n";
  return out;
}

std::vector<Diagnostic> structural_diagnostics(const Sequence& seq) {
  std::vector<Diagnostic> d;
  auto err = [&](std::string code, std::string msg) { d.push_back({DiagLevel::error, std::move(code), std::move(msg)}); };
  for (std::size_t i = 0; i < seq.pulses.size(); ++i) {
    const Pulse& p = seq.pulses[i];
    const int n = static_cast<int>(i);
    if (!(p.duration > 0.0)) err("duration", pulse_name(n) + " has non-positive duration " + fmt(p.duration));
    if (p.is_chirp()) {
      if (!(p.chirp().rabi >= 0.0)) err("rabi", pulse_name(n) + " has negative rabi frequency");
    } else {
      if (p.tones().empty()) err("tones", pulse_name(n) + " has an empty tone list");
      for (const Tone& t : p.tones())
        if (!(t.rabi >= 0.0)) err("rabi", pulse_name(n) + " has negative rabi frequency");
    }
    if (i > 0) {
      const Pulse& q = seq.pulses[i - 1];
      if (p.start < q.start)
        err("order", pulse_name(n) + " starts before pulse " + std::to_string(n - 1));
      else if (p.start < q.end())
        err("overlap", pulse_name(n - 1) + " and " + pulse_name(n) + " overlap in time");
    }
  }
  for (std::size_t i = 0; i < seq.detection_windows.size(); ++i)
    if (!(seq.detection_windows[i].duration > 0.0))
      err("detect", "detection window " + std::to_string(i) + " has non-positive duration");
  return d;
}

std::vector<Diagnostic> validate(const Sequence& seq, const HardwareLimits& hw) {
  std::vector<Diagnostic> d = structural_diagnostics(seq);
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < seq.pulses.size(); ++i) {
    const Pulse& p = seq.pulses[i];
    if (!p.is_chirp() && p.tones().empty()) continue;
    const auto [plo, phi] = p.offset_extent();
    if (!p.is_chirp() && phi - plo > hw.max_offset_span)
      d.push_back({DiagLevel::error, "bandwidth",
                   pulse_name(static_cast<int>(i)) + " tone span " + fmt_mhz(phi - plo) + " MHz exceeds " +
                       fmt_mhz(hw.max_offset_span) + " MHz"});
    lo = any ? std::min(lo, plo) : plo;
    hi = any ? std::max(hi, phi) : phi;
    any = true;
  }
  if (any && hi - lo > hw.max_offset_span)
    d.push_back({DiagLevel::warn, "bandwidth",
                 "sequence offset span " + fmt_mhz(hi - lo) + " MHz exceeds " + fmt_mhz(hw.max_offset_span) + " MHz"});
  return d;
}

bool operator==(const Tone& a, const Tone& b) {
  return a.offset == b.offset && a.rabi == b.rabi && a.phase == b.phase;
}
bool operator==(const Chirp& a, const Chirp& b) {
  return a.center == b.center && a.rate_hz_per_s == b.rate_hz_per_s && a.rabi == b.rabi;
}
bool operator==(const Pulse& a, const Pulse& b) {
  return a.start == b.start && a.duration == b.duration && a.shape == b.shape;
}
bool operator==(const DetectionWindow& a, const DetectionWindow& b) {
  return a.start == b.start && a.duration == b.duration;
}
bool operator==(const Sequence& a, const Sequence& b) {
  return a.pulses == b.pulses && a.detection_windows == b.detection_windows && a.bandwidth_limit == b.bandwidth_limit;
}

std::vector<Tone> balanced_pair(const LevelSystem& sys, double strong_offset, double weak_offset, double rabi,
                                bool weak_is_first) {
  const double boost = sys.branching_ratio > 0.0 ? 1.0 / std::sqrt(sys.branching_ratio) : 1.0;
  Tone strong{strong_offset, rabi, 0.0};
  Tone weak{weak_offset, rabi * boost, 0.0};
  if (weak_is_first) return {weak, strong};
  return {strong, weak};
}

double bright_rabi(const LevelSystem& sys, const std::vector<Tone>& pair, bool weak_is_first) {
  if (pair.size() != 2) throw InvalidInput("bright_rabi expects a tone pair");
  const double ws = std::sqrt(sys.branching_ratio);
  const Tone& strong = weak_is_first ? pair[1] : pair[0];
  const Tone& weak = weak_is_first ? pair[0] : pair[1];
  return std::hypot(strong.rabi, weak.rabi * ws);
}

namespace {

void add_pump(Sequence& seq, double before, int n, double window, double rabi) {
  const double rate_hz_per_s = 2.0 * window / kPumpChirpDuration * 1e12;
  double t = before - n * kPumpChirpDuration;
  for (int i = 0; i < n; ++i, t += kPumpChirpDuration)
    seq.pulses.push_back({t, kPumpChirpDuration, Chirp{0.0, rate_hz_per_s, rabi}});
}

// Duration giving bright-state area `area` (pi = full two-photon swap) at fixed Rabi.
double area_duration(double area, double omega_bright) {
  if (!(omega_bright > 0.0)) throw InvalidConfiguration("rephasing pulse needs a positive Rabi frequency");
  return area / (std::numbers::pi * omega_bright);
}

// Rabi giving bright-state rotation `area` (pi = full transfer) over a fixed duration.
double area_rabi_scale(double area, double duration, double omega_bright_per_unit) {
  return area / (kTwoPi * duration * omega_bright_per_unit);
}

}  // namespace

Sequence standard_raman_sequence(const LevelSystem& sys, double t_delay, const RamanOptions& opts) {
  sys.check();
  if (!(opts.excitation_duration > 0.0)) throw InvalidConfiguration("excitation duration must be > 0");
  if (!(opts.probe_duration > 0.0)) throw InvalidConfiguration("probe duration must be > 0");
  if (!(opts.rephasing_area >= 0.0) || !(opts.excitation_area >= 0.0))
    throw InvalidConfiguration("pulse areas must be >= 0");

  Sequence seq;
  seq.bandwidth_limit = opts.bandwidth_limit;
  const double exc_half = 0.5 * opts.excitation_duration;
  if (opts.include_pump) add_pump(seq, -exc_half, opts.pump_pulses, opts.pump_window, opts.pump_rabi);

  // excitation: strong leg g1e1 at 0, weak leg g2e1 at -dg
  std::vector<Tone> exc = balanced_pair(sys, 0.0, -sys.delta_g, 1.0, false);
  const double unit = bright_rabi(sys, exc, false);
  const double scale = area_rabi_scale(opts.excitation_area, opts.excitation_duration, unit);
  for (Tone& t : exc) t.rabi *= scale;
  seq.pulses.push_back({-exc_half, opts.excitation_duration, exc});

  std::vector<Tone> rep;
  if (opts.detuned_rephasing)
    rep = balanced_pair(sys, sys.delta_e - sys.delta_g, sys.delta_e, opts.rephasing_rabi, true);  // via e2
  else
    rep = balanced_pair(sys, 0.0, -sys.delta_g, opts.rephasing_rabi, false);
  rep[1].phase = opts.rephasing_phase;
  const bool weak_first = opts.detuned_rephasing;
  const double rep_dur = area_duration(opts.rephasing_area, bright_rabi(sys, rep, weak_first));

  const double probe_half = 0.5 * opts.probe_duration;
  const double rep_end = t_delay + 0.5 * rep_dur;
  if (!(t_delay - 0.5 * rep_dur >= exc_half) || !(2.0 * t_delay - probe_half >= rep_end))
    throw InvalidConfiguration("t_delay " + fmt(t_delay) +
                               " us too short for the excitation, rephasing and probe durations");
  if (rep_dur > 0.0) seq.pulses.push_back({t_delay - 0.5 * rep_dur, rep_dur, rep});

  seq.pulses.push_back({2.0 * t_delay - probe_half, opts.probe_duration,
                        std::vector<Tone>{Tone{0.0, opts.probe_rabi, 0.0}}});
  if (opts.detection_span > 0.0 && opts.detection_span < opts.probe_duration)
    seq.detection_windows.push_back({2.0 * t_delay - 0.5 * opts.detection_span, opts.detection_span});
  else
    seq.detection_windows.push_back({2.0 * t_delay - probe_half, opts.probe_duration});
  return seq;
}

Sequence excited_echo_sequence(const LevelSystem& sys, double t_delay, const ExcitedEchoOptions& opts) {
  sys.check();
  Sequence seq;
  seq.bandwidth_limit = opts.bandwidth_limit;
  const double exc_half = 0.5 * opts.excitation_duration;
  if (opts.include_pump) add_pump(seq, -exc_half, opts.pump_pulses, opts.pump_window, opts.pump_rabi);

  // V system from g1: strong leg to e1 at 0, weak leg to e2 at +de
  std::vector<Tone> exc = balanced_pair(sys, 0.0, sys.delta_e, 1.0, false);
  const double scale = area_rabi_scale(opts.excitation_area, opts.excitation_duration, bright_rabi(sys, exc, false));
  for (Tone& t : exc) t.rabi *= scale;
  seq.pulses.push_back({-exc_half, opts.excitation_duration, exc});

  std::vector<Tone> rep = balanced_pair(sys, 0.0, sys.delta_e, opts.rephasing_rabi, false);
  const double rep_dur = area_duration(opts.rephasing_area, bright_rabi(sys, rep, false));
  const double probe_half = 0.5 * opts.probe_duration;
  if (!(t_delay - 0.5 * rep_dur >= exc_half) || !(2.0 * t_delay - probe_half >= t_delay + 0.5 * rep_dur))
    throw InvalidConfiguration("t_delay " + fmt(t_delay) + " us too short for the pulse durations");
  if (rep_dur > 0.0) seq.pulses.push_back({t_delay - 0.5 * rep_dur, rep_dur, rep});
  seq.pulses.push_back({2.0 * t_delay - probe_half, opts.probe_duration,
                        std::vector<Tone>{Tone{0.0, opts.probe_rabi, 0.0}}});
  if (opts.detection_span > 0.0 && opts.detection_span < opts.probe_duration)
    seq.detection_windows.push_back({2.0 * t_delay - 0.5 * opts.detection_span, opts.detection_span});
  else
    seq.detection_windows.push_back({2.0 * t_delay - probe_half, opts.probe_duration});
  return seq;
}

Sequence standard_holeburn_sequence(const LevelSystem& sys, double window, double readout_chirp_rate, double margin) {
  sys.check();
  if (!(window > 0.0)) throw InvalidConfiguration("preparation window must be > 0");
  if (!(window < sys.delta_g - sys.delta_e))
    throw InvalidConfiguration("preparation window " + fmt(window) + " MHz must be smaller than delta_g - delta_e = " +
                               fmt(sys.delta_g - sys.delta_e) + " MHz");
  if (!(readout_chirp_rate > 0.0)) throw InvalidConfiguration("readout chirp rate must be > 0");
  Sequence seq;
  seq.bandwidth_limit = std::max(100.0, 2.0 * (sys.delta_g + sys.delta_e + margin));
  add_pump(seq, 0.0, 3, window, 0.05);
  const double reach = sys.delta_g + sys.delta_e + margin;
  const double duration = 2.0 * reach / (readout_chirp_rate * 1e-12);
  const double gap = 10.0;
  seq.pulses.push_back({gap, duration, Chirp{0.0, readout_chirp_rate, 1e-3}});
  seq.detection_windows.push_back({gap, duration});
  return seq;
}

}  // namespace tmspin
