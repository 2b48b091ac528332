#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "tmspin/protocols.hpp"

namespace fs = std::filesystem;
using namespace tmspin;
using tmspin::cli::ConfigError;
using tmspin::cli::RunConfig;

namespace {

constexpr int kOk = 0, kRuntime = 1, kUsage = 2;

struct CommonFlags {
  std::string config;
  std::string out = ".";
  std::optional<long long> seed;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "flat key = value configuration file");
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "RNG seed; overrides the `seed` key");
  cmd->add_option("--threads", f.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

RunConfig open_config(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  if (f.seed) c.set("seed", std::to_string(*f.seed));
  return c;
}

// Config-phase exceptions from the model types are configuration errors.
template <typename F>
auto configure(F&& f) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  } catch (const InvalidConfiguration& e) {
    throw ConfigError(e.what());
  }
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream f(dir / name);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  return f;
}

fs::path make_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out + "': " + ec.message());
  return fs::path(out);
}

// ---------------------------------------------------------------- config readers

ZeemanParams read_zeeman(RunConfig& c) {
  ZeemanParams z;
  z.slope_g = c.number("slope_g_mhz_per_tesla", z.slope_g);
  z.slope_e = c.number("slope_e_mhz_per_tesla", z.slope_e);
  z.width_slope_g = c.number("width_slope_g_mhz_per_tesla", z.width_slope_g);
  z.width_slope_e = c.number("width_slope_e_mhz_per_tesla", z.width_slope_e);
  z.residual_width = c.number("residual_width_mhz", z.residual_width);
  z.check();
  return z;
}

void read_lifetimes(RunConfig& c, LevelSystem& s, double t2_optical_default) {
  s.branching_ratio = c.number("branching_ratio", s.branching_ratio);
  s.t1_optical = c.number("t1_optical_us", s.t1_optical);
  s.t2_optical = c.number("t2_optical_us", t2_optical_default);
  s.t2_spin_ground = c.number("t2_spin_ground_us", s.t2_spin_ground);
  s.t2_spin_excited = c.number("t2_spin_excited_us", s.t2_spin_excited);
}

EnsembleConfig read_ensemble(RunConfig& c, EnsembleConfig e) {
  e.sampling_mode = sampling_mode_from_string(c.text("sampling_mode", to_string(e.sampling_mode)));
  e.n_optical = static_cast<int>(c.integer("n_optical", e.n_optical));
  e.optical_window = c.number("optical_window_mhz", e.optical_window);
  e.n_spin = static_cast<int>(c.integer("n_spin", e.n_spin));
  e.n_spin_e = static_cast<int>(c.integer("n_spin_e", e.n_spin_e));
  e.spin_width_g = c.number("spin_width_g_mhz", e.spin_width_g);
  e.spin_width_e = c.number("spin_width_e_mhz", e.spin_width_e);
  e.grid_on_excited = c.flag("grid_on_excited", e.grid_on_excited);
  e.grid_spacing = c.number("grid_spacing_mhz", e.grid_spacing);
  e.grid_span_sigmas = c.number("grid_span_sigmas", e.grid_span_sigmas);
  e.spin_window = c.number("spin_window_mhz", e.spin_window);
  e.rng_seed = static_cast<std::uint64_t>(c.integer("seed", static_cast<long long>(e.rng_seed)));
  e.check();
  return e;
}

template <typename Opts>
void read_pulse_common(RunConfig& c, Opts& o) {
  o.rephasing_area = c.number("rephasing_area_rad", o.rephasing_area);
  o.rephasing_rabi = c.number("rephasing_rabi_mhz", o.rephasing_rabi);
  o.excitation_area = c.number("excitation_area_rad", o.excitation_area);
  o.excitation_duration = c.number("excitation_duration_us", o.excitation_duration);
  o.probe_rabi = c.number("probe_rabi_mhz", o.probe_rabi);
  o.probe_duration = c.number("probe_duration_us", o.probe_duration);
  o.include_pump = c.flag("include_pump", o.include_pump);
  o.pump_pulses = static_cast<int>(c.integer("pump_pulses", o.pump_pulses));
  o.pump_window = c.number("pump_window_mhz", o.pump_window);
  o.pump_rabi = c.number("pump_rabi_mhz", o.pump_rabi);
  o.bandwidth_limit = c.number("bandwidth_limit_mhz", o.bandwidth_limit);
  o.detection_span = c.number("detection_span_us", o.detection_span);
}

RamanOptions read_raman(RunConfig& c, RamanOptions o = {}, bool both_variants = false) {
  if (!both_variants) o.detuned_rephasing = c.flag("detuned_rephasing", o.detuned_rephasing);
  o.rephasing_phase = c.number("rephasing_phase_rad", o.rephasing_phase);
  read_pulse_common(c, o);
  return o;
}

EchoReadoutOptions read_readout(RunConfig& c, std::uint64_t seed) {
  EchoReadoutOptions r;
  r.lo_amplitude = c.number("lo_amplitude", r.lo_amplitude);
  r.gate = c.number("gate_us", r.gate);
  r.beat_floor = c.number("beat_floor_mhz", r.beat_floor);
  r.timing_scan = c.number("timing_scan_us", r.timing_scan);
  r.timing_step = c.number("timing_step_us", r.timing_step);
  r.noise_rms = c.number("noise_rms", r.noise_rms);
  r.noise_seed = static_cast<std::uint64_t>(c.integer("noise_seed", static_cast<long long>(seed)));
  if (!(r.lo_amplitude > 0.0) || !(r.gate >= 0.0) || !(r.timing_scan >= 0.0) || !(r.timing_step > 0.0) ||
      !(r.noise_rms >= 0.0))
    throw ConfigError("readout: lo_amplitude and timing_step_us must be > 0, gate/scan/noise >= 0");
  return r;
}

RunOptions read_run(RunConfig& c) {
  RunOptions r;
  r.dt = c.number("dt_us", r.dt);
  r.sample_dt = c.number("sample_dt_us", r.sample_dt);
  if (!(r.dt >= 0.0) || !(r.sample_dt >= 0.0)) throw ConfigError("dt_us and sample_dt_us must be >= 0");
  return r;
}

ParallelOptions read_parallel(RunConfig& c, int threads) {
  ParallelOptions p;
  p.threads = threads;
  const long long chunk = c.integer("chunk_atoms", static_cast<long long>(p.chunk));
  if (chunk < 1) throw ConfigError("chunk_atoms must be >= 1");
  p.chunk = static_cast<std::size_t>(chunk);
  return p;
}

std::vector<double> read_delays(RunConfig& c, const std::vector<double>& fallback, std::size_t min_count) {
  std::vector<double> t = c.numbers("t_delays_us", fallback);
  if (t.size() < min_count)
    throw ConfigError("key 't_delays_us': at least " + std::to_string(min_count) + " delays are needed, got " +
                      std::to_string(t.size()));
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw ConfigError("key 't_delays_us': delays must be strictly increasing");
  return t;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& c, Manifest m) {
  Manifest out;
  for (const auto& [k, v] : c.effective()) out.set(k, v);
  std::ofstream f = open_out(dir, "manifest.txt");
  f << "# tmspin " << command << "\n";
  out.write(f);
  m.write(f);
}

void note_integrity(Manifest& m, const IntegrityReport& r) {
  m.note("integrity checks " + std::to_string(r.checks) + ", max trace error " + format_double(r.max_trace_error) +
         ", max hermiticity error " + format_double(r.max_hermiticity_error) + ", min eigenvalue " +
         format_double(r.min_eigenvalue) + (r.within() ? ", within tolerance" : ", OUT OF TOLERANCE"));
}

// ---------------------------------------------------------------- commands

int cmd_holeburn(const CommonFlags& f) {
  RunConfig c = open_config(f);
  struct Setup {
    ZeemanParams zp;
    LevelSystem sys;
    HoleburnConfig hb;
    std::vector<double> fields;
  };
  const Setup s = configure([&] {
    Setup s;
    s.zp = read_zeeman(c);
    s.sys.branching_ratio = c.number("branching_ratio", s.sys.branching_ratio);
    s.sys.t1_optical = c.number("t1_optical_us", s.sys.t1_optical);
    s.fields = c.numbers("b_fields_tesla", {0.0, 0.5, 1.0, 1.5, 2.0});
    s.hb.window = c.number("window_mhz", s.hb.window);
    s.hb.readout_chirp_rate = c.number("readout_chirp_rate_hz_per_s", s.hb.readout_chirp_rate);
    s.hb.lineshape = lineshape_from_string(c.text("lineshape", to_string(s.hb.lineshape)));
    s.hb.saturation = c.number("saturation", s.hb.saturation);
    s.hb.readout_delay = c.number("readout_delay_us", s.hb.readout_delay);
    s.hb.step = c.number("step_mhz", s.hb.step);
    s.hb.margin = c.number("margin_mhz", s.hb.margin);
    s.hb.spin_node_spacing = c.number("spin_node_spacing_mhz", s.hb.spin_node_spacing);
    s.hb.feature_threshold = c.number("feature_threshold", s.hb.feature_threshold);
    c.reject_unknown();
    for (double b : s.fields) {
      const auto [dg, de] = splittings(b, s.zp);
      if (b > 0.0 && !(s.hb.window < dg - de))
        throw ConfigError("key 'window_mhz': " + format_double(s.hb.window) + " MHz is not smaller than delta_g - delta_e = " +
                          format_double(dg - de) + " MHz at " + format_double(b) + " T");
    }
    return s;
  });

  const fs::path dir = make_out_dir(f.out);
  std::vector<HoleburnResult> scans;
  for (double b : s.fields) scans.push_back(hole_burning_scan(b, s.zp, s.sys, s.hb));
  { auto o = open_out(dir, "holeburn.csv"); write_holeburn_csv(o, scans); }
  { auto o = open_out(dir, "features.csv"); write_features_csv(o, scans); }
  { auto o = open_out(dir, "widths_vs_B.csv"); write_widths_csv(o, scans); }

  Manifest m;
  m.note("readout resolution MHz " + format_double(readout_resolution(s.hb.readout_chirp_rate)));
  const WidthSeries ws = widths_vs_field(scans);
  std::set<double> distinct;
  for (double b : s.fields) distinct.insert(b);
  if (distinct.size() >= 2) {
    auto o = open_out(dir, "widths_fit.csv");
    o << "family,parameter,value,stderr\n";
    for (const auto& [name, pts] : {std::pair{"antihole", ws.antihole}, std::pair{"hole", ws.hole}}) {
      if (pts.size() < 2) continue;
      const FitResult fit = fit_quadrature_width(pts);
      for (const auto& p : fit.parameters)
        o << name << ',' << p.name << ',' << format_double(p.value) << ',' << format_double(p.std_error) << '\n';
      std::cout << name << " width slope " << fit.value_of("slope") << " MHz/T, intercept " << fit.value_of("intercept")
                << " MHz\n";
    }
  }
  for (const auto& r : scans) std::cout << "B = " << r.b_field << " T: " << r.features.size() << " features\n";
  write_manifest(dir, "holeburn", c, m);
  return kOk;
}

struct EchoSetup {
  ZeemanParams zp;
  LevelSystem sys;
  double b_field = 0.0;
  EnsembleConfig ens;
  EchoReadoutOptions readout;
  ParallelOptions parallel;
  RunOptions run;
};

// Splittings: ground from `delta_g_mhz`, excited defaulting to the Zeeman ratio;
// spin widths default to the width law at the implied field.
EchoSetup read_echo_common(RunConfig& c, const CommonFlags& f, bool excited, double t2_optical_default,
                           bool control = false) {
  EchoSetup s;
  s.zp = read_zeeman(c);
  if (excited) {
    s.sys.delta_e = c.number("delta_e_mhz", 16.4);
    s.b_field = s.sys.delta_e / s.zp.slope_e;
    s.sys.delta_g = c.number("delta_g_mhz", s.zp.slope_g * s.b_field);
  } else {
    s.sys.delta_g = c.number("delta_g_mhz", 41.0);
    s.b_field = s.sys.delta_g / s.zp.slope_g;
    s.sys.delta_e = c.number("delta_e_mhz", s.zp.slope_e * s.b_field);
  }
  read_lifetimes(c, s.sys, t2_optical_default);
  s.sys.check();
  const auto [wg, we] = spin_widths(s.b_field, s.zp);
  s.ens = read_ensemble(c, control ? control_ensemble(wg, we) : echo_ensemble(wg, we, excited));
  s.readout = read_readout(c, s.ens.rng_seed);
  s.parallel = read_parallel(c, f.threads);
  s.run = read_run(c);
  return s;
}

void write_sweep_outputs(const fs::path& dir, const EchoSweepResult& r, const FitResult& fit,
                         const std::optional<double>& t1_for_intrinsic) {
  { auto o = open_out(dir, "sweep.csv"); write_sweep_csv(o, r); }
  auto o = open_out(dir, "fit.csv");
  write_fit_csv(o, fit);
  if (t1_for_intrinsic) {
    const auto intrinsic = deconvolve_intrinsic_t2(fit.value_of("T2"), *t1_for_intrinsic);
    o << "T2_intrinsic," << (intrinsic ? format_double(*intrinsic) : std::string("inf")) << ",\n";
  }
}

void note_sweep(Manifest& m, const EchoSweepResult& r, double b_field) {
  m.note("b_field_tesla " + format_double(b_field));
  m.note("n_atoms " + std::to_string(r.n_atoms));
  m.note("expected beat MHz " + format_double(r.expected_beat) + ", FFT bin MHz " + format_double(r.beat_resolution));
  note_integrity(m, r.integrity);
  for (const auto& d : r.diagnostics) m.add_diagnostic(d);
}

int cmd_echo_sweep(const CommonFlags& f) {
  RunConfig c = open_config(f);
  RamanSweepOptions opts;
  std::vector<double> delays;
  const EchoSetup s = configure([&] {
    EchoSetup s = read_echo_common(c, f, false, LevelSystem{}.t2_optical);
    opts.sequence = read_raman(c);
    delays = read_delays(c, {100, 150, 200, 250, 300, 400}, 3);
    c.reject_unknown();
    return s;
  });
  opts.readout = s.readout;
  opts.parallel = s.parallel;
  opts.run = s.run;
  const fs::path dir = make_out_dir(f.out);
  const EchoSweepResult r = raman_echo_sweep(s.sys, s.ens, delays, opts);
  const FitResult fit = fit_exp_decay(r.decay_points());
  write_sweep_outputs(dir, r, fit, std::nullopt);
  Manifest m;
  note_sweep(m, r, s.b_field);
  write_manifest(dir, "echo-sweep", c, m);
  for (const auto& d : r.diagnostics) std::cerr << d.format() << '\n';
  std::cout << "T2 = " << fit.value_of("T2") << " +- " << fit.error_of("T2") << " us\n";
  return kOk;
}

int cmd_excited_echo(const CommonFlags& f) {
  RunConfig c = open_config(f);
  ExcitedSweepOptions opts;
  std::vector<double> delays;
  const EchoSetup s = configure([&] {
    EchoSetup s = read_echo_common(c, f, true, LevelSystem{}.t2_optical);
    read_pulse_common(c, opts.sequence);
    delays = read_delays(c, {100, 150, 200, 250, 300, 400}, 3);
    c.reject_unknown();
    return s;
  });
  opts.readout = s.readout;
  opts.parallel = s.parallel;
  opts.run = s.run;
  const fs::path dir = make_out_dir(f.out);
  const EchoSweepResult r = excited_state_echo(s.sys, s.ens, delays, opts);
  const FitResult fit = fit_exp_decay(r.decay_points());
  write_sweep_outputs(dir, r, fit, s.sys.t1_optical);
  Manifest m;
  note_sweep(m, r, s.b_field);
  write_manifest(dir, "excited-echo", c, m);
  const auto intrinsic = deconvolve_intrinsic_t2(fit.value_of("T2"), s.sys.t1_optical);
  std::cout << "T2 = " << fit.value_of("T2") << " +- " << fit.error_of("T2") << " us, intrinsic "
            << (intrinsic ? format_double(*intrinsic) : std::string("unbounded")) << " us\n";
  return kOk;
}

int cmd_photon_echo_control(const CommonFlags& f) {
  RunConfig c = open_config(f);
  RamanSweepOptions opts;
  double t_delay = 0.0;
  EchoSetup s = configure([&] {
    EchoSetup s = read_echo_common(c, f, false, 200.0, true);
    opts.sequence = read_raman(c, control_sequence(), true);
    t_delay = c.number("t_delay_us", 40.0);
    c.reject_unknown();
    return s;
  });
  opts.readout = s.readout;
  opts.parallel = s.parallel;
  opts.run = s.run;
  const fs::path dir = make_out_dir(f.out);
  const PhotonEchoControl plain = photon_echo_control(s.sys, s.ens, t_delay, false, opts);
  const PhotonEchoControl detuned = photon_echo_control(s.sys, s.ens, t_delay, true, opts);
  {
    auto o = open_out(dir, "control.csv");
    o << "detuned_rephasing,raman_amplitude,contamination\n";
    for (const auto* p : {&plain, &detuned})
      o << (p->detuned ? "true" : "false") << ',' << format_double(p->raman_amplitude) << ','
        << format_double(p->contamination) << '\n';
  }
  const double suppression = detuned.contamination / plain.contamination;
  const double raman_change = std::abs(detuned.raman_amplitude / plain.raman_amplitude - 1.0);
  Manifest m;
  m.note("contamination ratio detuned/plain " + format_double(suppression));
  m.note("raman relative change " + format_double(raman_change));
  IntegrityReport ir = plain.integrity;
  ir.merge(detuned.integrity);
  note_integrity(m, ir);
  write_manifest(dir, "photon-echo-control", c, m);
  std::cout << "contamination ratio " << suppression << ", raman change " << raman_change << '\n';
  return kOk;
}

int cmd_t2_vs_splitting(const CommonFlags& f) {
  RunConfig c = open_config(f);
  RamanSweepOptions opts;
  std::vector<double> delays, splits;
  const EchoSetup s = configure([&] {
    EchoSetup s = read_echo_common(c, f, false, LevelSystem{}.t2_optical);
    opts.sequence = read_raman(c);
    delays = read_delays(c, {100, 150, 200, 250, 300, 400}, 3);
    splits = c.numbers("delta_g_list_mhz", {4, 20, 41, 60, 83});
    c.reject_unknown();
    return s;
  });
  opts.readout = s.readout;
  opts.parallel = s.parallel;
  opts.run = s.run;
  const fs::path dir = make_out_dir(f.out);
  const auto rows = t2_vs_splitting(s.sys, s.zp, splits, s.ens, delays, opts);
  { auto o = open_out(dir, "splitting.csv"); write_splitting_csv(o, rows); }
  {
    auto o = open_out(dir, "sweep.csv");
    o << "delta_g_MHz,t_delay_us,amplitude,beat_MHz,peak_time_us\n";
    for (const auto& r : rows)
      for (const auto& e : r.sweep.rows)
        o << format_double(r.delta_g) << ',' << format_double(e.t_delay) << ',' << format_double(e.amplitude) << ','
          << format_double(e.beat) << ',' << format_double(e.peak_time) << '\n';
  }
  Manifest m;
  IntegrityReport ir;
  for (const auto& r : rows) {
    ir.merge(r.sweep.integrity);
    for (const auto& d : r.warnings) m.add_diagnostic(d);
    std::cout << "delta_g " << r.delta_g << " MHz: T2 = " << r.t2 << " +- " << r.t2_stderr << " us\n";
  }
  note_integrity(m, ir);
  write_manifest(dir, "t2-vs-splitting", c, m);
  return kOk;
}

int cmd_validate(const std::string& path, double max_span) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read sequence file '" + path + "'");
  if (!(max_span > 0.0)) throw ConfigError("--max-span-mhz must be > 0");
  std::stringstream ss;
  ss << in.rdbuf();
  Sequence seq;
  try {
    seq = parse_sequence(ss.str(), false);
  } catch (const ParseError& e) {
    std::cout << "ERROR syntax " << e.what() << '\n';
    return kRuntime;
  }
  HardwareLimits hw;
  hw.max_offset_span = max_span;
  bool errors = false;
  for (const auto& d : validate(seq, hw)) {
    std::cout << d.format() << '\n';
    errors |= d.level == DiagLevel::error;
  }
  return errors ? kRuntime : kOk;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int cmd_fit(const std::string& path, std::string model, std::string xcol, std::string ycol,
            std::optional<double> t1, const std::string& out) {
  if (model != "exp" && model != "linear" && model != "quadrature")
    throw ConfigError("--model must be exp, linear or quadrature");
  if (xcol.empty()) xcol = model == "exp" ? "t_delay_us" : "b_field_T";
  if (ycol.empty()) ycol = model == "exp" ? "amplitude" : "antihole_width_MHz";
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read data file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("data file '" + path + "' is empty");
  const auto header = split_csv(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("data file has no column '" + name + "'");
  };
  const std::size_t ix = column(xcol), iy = column(ycol);
  std::vector<Point> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() <= std::max(ix, iy)) throw std::runtime_error("short row: " + line);
    const double x = std::stod(cells[ix]), y = std::stod(cells[iy]);
    if (std::isnan(x) || std::isnan(y)) continue;
    pts.emplace_back(x, y);
  }
  const FitResult fit = model == "exp" ? fit_exp_decay(pts) : model == "linear" ? fit_linear(pts)
                                                                               : fit_quadrature_width(pts);
  const fs::path dir = make_out_dir(out);
  auto o = open_out(dir, "fit.csv");
  write_fit_csv(o, fit);
  for (const auto& p : fit.parameters) std::cout << p.name << " = " << p.value << " +- " << p.std_error << '\n';
  if (t1 && model == "exp") {
    const auto intrinsic = deconvolve_intrinsic_t2(fit.value_of("T2"), *t1);
    o << "T2_intrinsic," << (intrinsic ? format_double(*intrinsic) : std::string("inf")) << ",\n";
    std::cout << "T2_intrinsic = " << (intrinsic ? format_double(*intrinsic) : std::string("unbounded")) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Raman-echo and hole-burning simulator for a 4-level Lambda system"};
  app.require_subcommand(1);

  CommonFlags hb, es, ee, pc, ts;
  add_common(app.add_subcommand("holeburn", "hole-burning spectra over a field sweep"), hb);
  add_common(app.add_subcommand("echo-sweep", "ground-state Raman echo delay sweep and T2 fit"), es);
  add_common(app.add_subcommand("excited-echo", "excited-state echo delay sweep, T2 fit and deconvolution"), ee);
  add_common(app.add_subcommand("photon-echo-control", "photon-echo contamination with and without detuned rephasing"),
             pc);
  add_common(app.add_subcommand("t2-vs-splitting", "echo sweep and T2 fit per ground splitting"), ts);

  std::string seq_path;
  double max_span = HardwareLimits{}.max_offset_span;
  auto* val = app.add_subcommand("validate", "check a sequence file against hardware limits");
  val->add_option("file", seq_path, "sequence file")->required();
  val->add_option("--max-span-mhz", max_span, "usable modulation band")->capture_default_str();

  std::string data_path, model = "exp", xcol, ycol, fit_out = ".";
  std::optional<double> t1;
  auto* fit = app.add_subcommand("fit", "fit a CSV column pair");
  fit->add_option("file", data_path, "CSV with a header row")->required();
  fit->add_option("--model", model, "exp, linear or quadrature")->capture_default_str();
  fit->add_option("--x", xcol, "x column (default t_delay_us or b_field_T)");
  fit->add_option("--y", ycol, "y column (default amplitude or antihole_width_MHz)");
  fit->add_option("--t1-us", t1, "population lifetime for the intrinsic-T2 deconvolution");
  fit->add_option("--out", fit_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const auto* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "holeburn") return cmd_holeburn(hb);
    if (name == "echo-sweep") return cmd_echo_sweep(es);
    if (name == "excited-echo") return cmd_excited_echo(ee);
    if (name == "photon-echo-control") return cmd_photon_echo_control(pc);
    if (name == "t2-vs-splitting") return cmd_t2_vs_splitting(ts);
    if (name == "validate") return cmd_validate(seq_path, max_span);
    if (name == "fit") return cmd_fit(data_path, model, xcol, ycol, t1, fit_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
