#include "tmspin/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

namespace tmspin {

// ================================================================ hole burning

const char* to_string(Lineshape l) { return l == Lineshape::gaussian ? "gaussian" : "lorentzian"; }

Lineshape lineshape_from_string(const std::string& s) {
  if (s == "gaussian") return Lineshape::gaussian;
  if (s == "lorentzian") return Lineshape::lorentzian;
  throw InvalidInput("unknown lineshape '" + s + "'");
}

const char* to_string(Polarity p) { return p == Polarity::hole ? "hole" : "antihole"; }

double readout_resolution(double chirp_rate_hz_per_s) {
  if (!(chirp_rate_hz_per_s > 0.0)) throw InvalidInput("readout chirp rate must be > 0");
  return std::sqrt(chirp_rate_hz_per_s) * 1e-6;
}

namespace {

struct Transition {
  int g, e;
};
constexpr std::array<Transition, 4> kTransitions{{{kG1, kE1}, {kG1, kE2}, {kG2, kE1}, {kG2, kE2}}};

// offset of transition k from the g1e1 frequency of the same class
double transition_offset(int k, double dg, double de) {
  const auto [g, e] = kTransitions[static_cast<std::size_t>(k)];
  return (e == kE2 ? de : 0.0) - (g == kG2 ? dg : 0.0);
}

// uniform nodes with Gaussian weights (sum 1) out to 4 sigma
std::vector<std::pair<double, double>> spin_nodes(double fwhm, double spacing) {
  if (!(fwhm > 0.0)) return {{0.0, 1.0}};
  const double sigma = fwhm * kFwhmToSigma;
  const int half = std::max(1, static_cast<int>(std::ceil(4.0 * sigma / spacing)));
  std::vector<std::pair<double, double>> out;
  double total = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double x = i * spacing;
    const double w = std::exp(-0.5 * x * x / (sigma * sigma));
    out.emplace_back(x, w);
    total += w;
  }
  for (auto& n : out) n.second /= total;
  return out;
}

using Rates = Eigen::Matrix4d;

Rates decay_matrix(const Eigen::Matrix2d& d, double gamma) {
  Rates m = Rates::Zero();
  for (int e = 0; e < 2; ++e) {
    const double norm = d(0, e) * d(0, e) + d(1, e) * d(1, e);
    m(kE1 + e, kE1 + e) -= gamma;
    for (int g = 0; g < 2; ++g) m(g, kE1 + e) += gamma * d(g, e) * d(g, e) / norm;
  }
  return m;
}

std::vector<double> kernel(const HoleburnConfig& cfg, double fwhm, double step) {
  const double reach = cfg.lineshape == Lineshape::gaussian ? 3.0 * fwhm : 40.0 * fwhm;
  const int n = static_cast<int>(std::ceil(reach / step));
  std::vector<double> k(static_cast<std::size_t>(2 * n + 1));
  const double sigma = fwhm * kFwhmToSigma, hw = 0.5 * fwhm;
  for (int i = -n; i <= n; ++i) {
    const double x = i * step;
    k[static_cast<std::size_t>(i + n)] = cfg.lineshape == Lineshape::gaussian
                                             ? std::exp(-0.5 * x * x / (sigma * sigma))
                                             : hw * hw / (x * x + hw * hw);
  }
  return k;
}

// full width at half the extremum, walking out from index i
double measure_fwhm(const std::vector<double>& f, const std::vector<double>& y, std::size_t i) {
  const double half = 0.5 * y[i];
  auto cross = [&](int dir) {
    std::size_t j = i;
    while (true) {
      const std::size_t next = dir > 0 ? j + 1 : j - 1;
      if ((dir < 0 && j == 0) || next >= y.size()) return f[j];
      if (std::abs(y[next]) <= std::abs(half)) {
        const double a = y[j] - half, b = y[next] - half;
        const double s = a == b ? 0.0 : a / (a - b);
        return f[j] + s * (f[next] - f[j]);
      }
      j = next;
    }
  };
  return cross(+1) - cross(-1);
}

}  // namespace

HoleburnResult hole_burning_scan(double b_field, const ZeemanParams& zp, const LevelSystem& sys_in,
                                 const HoleburnConfig& cfg) {
  zp.check();
  LevelSystem sys = sys_in;
  std::tie(sys.delta_g, sys.delta_e) = splittings(b_field, zp);
  sys.check();
  if (!(cfg.window > 0.0)) throw InvalidInput("hole-burning window must be > 0");
  if (b_field > 0.0 && !(cfg.window < sys.delta_g - sys.delta_e))
    throw InvalidInput("hole-burning window " + format_double(cfg.window) + " MHz must be smaller than delta_g - delta_e = " +
                       format_double(sys.delta_g - sys.delta_e) + " MHz");
  if (!(cfg.step > 0.0) || !(cfg.margin >= 0.0) || !(cfg.saturation > 0.0) || !(cfg.readout_delay >= 0.0))
    throw InvalidInput("hole-burning step, margin, saturation and delay must be positive");
  if (!std::isfinite(sys.t1_optical)) throw InvalidConfiguration("hole burning needs a finite t1_optical");

  const double res = readout_resolution(cfg.readout_chirp_rate);
  const auto [wg, we] = spin_widths(b_field, zp);
  const double spacing = cfg.spin_node_spacing > 0.0 ? cfg.spin_node_spacing : res / 8.0;
  const auto g_nodes = spin_nodes(wg, spacing);
  const auto e_nodes = spin_nodes(we, spacing);

  const Eigen::Matrix2d d = dipole_amplitudes(sys.branching_ratio);
  const double gamma = 1.0 / sys.t1_optical;
  const Rates decay = decay_matrix(d, gamma);
  const Rates after_burn = (decay * cfg.readout_delay).exp();
  const double burn_time = 1e3 * sys.t1_optical;  // long-burn limit
  const Eigen::Vector4d thermal(0.5, 0.5, 0.0, 0.0);

  HoleburnResult out;
  out.b_field = b_field;
  out.delta_g = sys.delta_g;
  out.delta_e = sys.delta_e;
  const double reach = sys.delta_g + sys.delta_e + cfg.margin;
  const int n_half = static_cast<int>(std::ceil(reach / cfg.step));
  const std::size_t n = static_cast<std::size_t>(2 * n_half + 1);
  out.detuning.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.detuning[i] = (static_cast<int>(i) - n_half) * cfg.step;
  std::vector<double> binned(n, 0.0);
  auto deposit = [&](double f, double a) {
    const double x = f / cfg.step + n_half;
    const double fl = std::floor(x);
    const long i = static_cast<long>(fl);
    const double s = x - fl;
    if (i >= 0 && i < static_cast<long>(n)) binned[static_cast<std::size_t>(i)] += a * (1.0 - s);
    if (i + 1 >= 0 && i + 1 < static_cast<long>(n)) binned[static_cast<std::size_t>(i + 1)] += a * s;
  };

  // classes enumerated by (lowest pumped transition k, offset u inside the window, dg, de)
  constexpr int kNu = 5;
  const double du = 2.0 * cfg.window / kNu;
  std::map<unsigned, Rates> pump_cache;
  for (const auto& [dg, wdg] : g_nodes) {
    for (const auto& [de, wde] : e_nodes) {
      std::array<double, 4> off{};
      for (int j = 0; j < 4; ++j) off[static_cast<std::size_t>(j)] = transition_offset(j, sys.delta_g + dg, sys.delta_e + de);
      for (int k = 0; k < 4; ++k) {
        for (int iu = 0; iu < kNu; ++iu) {
          const double u = -cfg.window + (iu + 0.5) * du;
          const double nu = u - off[static_cast<std::size_t>(k)];
          unsigned mask = 0;
          for (int j = 0; j < 4; ++j)
            if (std::abs(nu + off[static_cast<std::size_t>(j)]) <= cfg.window) mask |= 1u << j;
          if ((mask & ((1u << k) - 1u)) != 0 || !(mask & (1u << k))) continue;
          auto it = pump_cache.find(mask);
          if (it == pump_cache.end()) {
            Rates m = decay;
            for (int j = 0; j < 4; ++j) {
              if (!(mask & (1u << j))) continue;
              const auto [g, e] = kTransitions[static_cast<std::size_t>(j)];
              const double r = cfg.saturation * gamma * d(g, e - kE1) * d(g, e - kE1);
              m(g, g) -= r, m(e, g) += r, m(e, e) -= r, m(g, e) += r;
            }
            it = pump_cache.emplace(mask, after_burn * (m * burn_time).exp()).first;
          }
          const Eigen::Vector4d p = it->second * thermal;
          const double w = wdg * wde * du;
          for (int j = 0; j < 4; ++j) {
            const auto [g, e] = kTransitions[static_cast<std::size_t>(j)];
            const double d2 = d(g, e - kE1) * d(g, e - kE1);
            const double change = d2 * ((p(g) - p(e)) - 0.5);
            if (change != 0.0) deposit(nu + off[static_cast<std::size_t>(j)], -change * w);
          }
        }
      }
    }
  }

  const std::vector<double> ker = kernel(cfg, res, cfg.step);
  const int kh = static_cast<int>(ker.size() / 2);
  out.transmission_change.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (binned[i] == 0.0) continue;
    const int lo = std::max(0, static_cast<int>(i) - kh), hi = std::min(static_cast<int>(n) - 1, static_cast<int>(i) + kh);
    for (int j = lo; j <= hi; ++j)
      out.transmission_change[static_cast<std::size_t>(j)] += binned[i] * ker[static_cast<std::size_t>(j - static_cast<int>(i) + kh)];
  }

  // expected feature centres, merged when closer than the resolution
  const double dgn = sys.delta_g, den = sys.delta_e;
  std::vector<double> centres{0.0};
  for (double c : {den, dgn, dgn - den, dgn + den}) centres.push_back(c), centres.push_back(-c);
  std::sort(centres.begin(), centres.end());
  std::vector<double> uniq;
  for (double c : centres)
    if (uniq.empty() || c - uniq.back() > 0.5 * res) uniq.push_back(c);

  double strongest = 0.0;
  for (double v : out.transmission_change) strongest = std::max(strongest, std::abs(v));
  for (std::size_t c = 0; c < uniq.size(); ++c) {
    double half_gap = 2.0;
    if (c > 0) half_gap = std::min(half_gap, 0.5 * (uniq[c] - uniq[c - 1]));
    if (c + 1 < uniq.size()) half_gap = std::min(half_gap, 0.5 * (uniq[c + 1] - uniq[c]));
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(out.detuning[i] - uniq[c]) > half_gap) continue;
      if (best == n || std::abs(out.transmission_change[i]) > std::abs(out.transmission_change[best])) best = i;
    }
    if (best == n) continue;
    const double depth = out.transmission_change[best];
    if (!(std::abs(depth) > cfg.feature_threshold * strongest)) continue;
    Feature f;
    f.center = out.detuning[best];
    if (best > 0 && best + 1 < n) {  // parabolic vertex
      const double a = out.transmission_change[best - 1], b = depth, cc = out.transmission_change[best + 1];
      const double den2 = a - 2.0 * b + cc;
      if (den2 != 0.0) f.center += 0.5 * cfg.step * (a - cc) / den2;
    }
    f.depth = depth;
    f.polarity = depth > 0.0 ? Polarity::hole : Polarity::antihole;
    f.width = measure_fwhm(out.detuning, out.transmission_change, best);
    out.features.push_back(f);
  }
  return out;
}

WidthSeries widths_vs_field(const std::vector<HoleburnResult>& scans) {
  WidthSeries ws;
  auto pick = [](const HoleburnResult& r, double target, Polarity pol) -> const Feature* {
    const Feature* best = nullptr;
    for (const auto& f : r.features) {
      if (f.polarity != pol) continue;
      if (!best || std::abs(f.center - target) < std::abs(best->center - target)) best = &f;
    }
    return best;
  };
  for (const auto& r : scans) {
    // at zero field the central hole stands in for every feature family
    const bool zero = r.delta_g == 0.0;
    if (const Feature* a = pick(r, r.delta_g, zero ? Polarity::hole : Polarity::antihole))
      ws.antihole.emplace_back(r.b_field, a->width);
    if (const Feature* h = pick(r, r.delta_e, Polarity::hole)) ws.hole.emplace_back(r.b_field, h->width);
  }
  return ws;
}

// ================================================================ echo sweeps

std::vector<Point> EchoSweepResult::decay_points() const {
  std::vector<Point> p;
  for (const auto& r : rows) p.emplace_back(r.t_delay, r.amplitude);
  return p;
}

EnsembleConfig echo_ensemble(double spin_width_g, double spin_width_e, bool on_excited) {
  EnsembleConfig e;
  e.sampling_mode = SamplingMode::grid;
  e.n_optical = 8;
  e.optical_window = 0.2;
  e.spin_width_g = spin_width_g;
  e.spin_width_e = spin_width_e;
  e.grid_on_excited = on_excited;
  e.grid_spacing = 0.001;
  e.spin_window = 0.2;
  return e;
}

EnsembleConfig control_ensemble(double spin_width_g, double spin_width_e) {
  EnsembleConfig e = echo_ensemble(spin_width_g, spin_width_e);
  e.n_optical = 40;
  e.grid_spacing = 0.01;
  e.spin_window = 0.1;
  return e;
}

RamanOptions control_sequence() {
  RamanOptions o;
  o.probe_duration = 40.0;
  o.rephasing_rabi = 0.3;
  return o;
}

namespace {

struct SweepPlan {
  std::string protocol;
  double expected_beat = 0.0;
  double excitation_duration = 0.0;
  std::vector<double> t_delays;
  std::vector<Sequence> sequences;
  EchoReadoutOptions readout;
  ParallelOptions parallel;
  RunOptions run;
};

void check_delays(const std::vector<double>& t) {
  if (t.size() < 3) throw InvalidInput("a delay sweep needs at least 3 delays, got " + std::to_string(t.size()));
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw InvalidInput("delays must be strictly increasing");
}

double detection_span_for(double given, const EchoReadoutOptions& r, double excitation_duration) {
  if (given > 0.0) return given;
  const double gate = r.gate > 0.0 ? r.gate : excitation_duration;
  return gate + 2.0 * r.timing_scan + 2.0;
}

std::vector<Diagnostic> collect_diagnostics(const std::vector<Sequence>& seqs) {
  std::vector<Diagnostic> out;
  std::set<std::string> seen;
  for (const auto& s : seqs) {
    HardwareLimits hw;
    hw.max_offset_span = s.bandwidth_limit;
    for (auto& d : validate(s, hw)) {
      if (d.level == DiagLevel::error) throw InvalidConfiguration("sequence rejected: " + d.format());
      if (seen.insert(d.format()).second) out.push_back(std::move(d));
    }
  }
  return out;
}

struct ChunkResult {
  std::vector<EmissionAccumulator> acc;
  IntegrityReport integrity;
};

// Fixed-size chunks merged in index order: the sum does not depend on the thread count.
std::vector<ChunkResult> run_chunks(const std::vector<AtomClass>& atoms, const LevelSystem& sys,
                                    const std::vector<Sequence>& seqs, const RunOptions& run_in,
                                    const ParallelOptions& par) {
  const std::size_t chunk = std::max<std::size_t>(1, par.chunk);
  const std::size_t n_chunks = (atoms.size() + chunk - 1) / chunk;
  std::vector<ChunkResult> results(n_chunks);
  RunOptions run = run_in;
  run.record_states = false;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      try {
        ChunkResult r;
        r.acc.resize(seqs.size());
        const std::size_t end = std::min(atoms.size(), (c + 1) * chunk);
        for (std::size_t a = c * chunk; a < end; ++a) {
          PulseMapCache cache;
          for (std::size_t k = 0; k < seqs.size(); ++k) {
            const Trajectory tr = run_sequence(atoms[a], sys, seqs[k], run, &cache);
            r.acc[k].add(atoms[a].weight, tr.emission.at(0));
            r.integrity.merge(tr.integrity);
          }
        }
        results[c] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_chunks;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(par.threads, static_cast<int>(n_chunks)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

struct Measured {
  double amplitude = 0.0;
  double beat = 0.0;
  double peak_time = 0.0;
  Complex component;
  double resolution = 0.0;
};

Measured measure(const SignalTrace& e, double t_delay, double expected_beat, double excitation_duration,
                 const EchoReadoutOptions& r, std::size_t index) {
  IntensityTrace I = heterodyne(e, Tone{0.0, r.lo_amplitude, 0.0});
  if (r.noise_rms > 0.0) add_noise(I, r.noise_rms, r.noise_seed + index);
  const double gate = r.gate > 0.0 ? r.gate : excitation_duration;
  const double t_echo = 2.0 * t_delay;
  Measured m;
  m.component = gated_component(I, t_echo, expected_beat, gate);
  m.amplitude = std::abs(m.component);

  const Spectrum s = spectrum(I, WindowKind::hann);
  m.resolution = s.resolution();
  m.beat = peak_frequency(s, std::max(2.0 * m.resolution, r.beat_floor));

  m.peak_time = t_echo;
  if (r.timing_scan > 0.0 && r.timing_step > 0.0) {
    const int n = static_cast<int>(std::floor(r.timing_scan / r.timing_step + 1e-9));
    std::vector<double> v;
    for (int i = -n; i <= n; ++i) v.push_back(echo_amplitude(I, t_echo + i * r.timing_step, expected_beat, gate));
    const std::size_t best = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    m.peak_time = t_echo + (static_cast<int>(best) - n) * r.timing_step;
    if (best > 0 && best + 1 < v.size()) {
      const double den = v[best - 1] - 2.0 * v[best] + v[best + 1];
      if (den < 0.0) m.peak_time += 0.5 * r.timing_step * (v[best - 1] - v[best + 1]) / den;
    }
  }
  return m;
}

EchoSweepResult execute(const SweepPlan& plan, const LevelSystem& sys, const EnsembleConfig& ens) {
  EchoSweepResult res;
  res.protocol = plan.protocol;
  res.delta_g = sys.delta_g;
  res.delta_e = sys.delta_e;
  res.expected_beat = plan.expected_beat;
  res.diagnostics = collect_diagnostics(plan.sequences);
  const std::vector<AtomClass> atoms = sample_ensemble(ens, sys);
  res.n_atoms = atoms.size();

  const auto chunks = run_chunks(atoms, sys, plan.sequences, plan.run, plan.parallel);
  std::vector<EmissionAccumulator> total(plan.sequences.size());
  for (const auto& c : chunks) {
    for (std::size_t k = 0; k < total.size(); ++k) total[k].add(c.acc[k]);
    res.integrity.merge(c.integrity);
  }
  for (std::size_t k = 0; k < total.size(); ++k) {
    const Measured m = measure(total[k].trace(), plan.t_delays[k], plan.expected_beat, plan.excitation_duration,
                               plan.readout, k);
    res.rows.push_back({plan.t_delays[k], m.amplitude, m.beat, m.peak_time, m.component});
    res.beat_resolution = m.resolution;
    res.fields.push_back(total[k].trace());
  }
  return res;
}

}  // namespace

EchoSweepResult raman_echo_sweep(const LevelSystem& sys, const EnsembleConfig& ens, const std::vector<double>& t_delays,
                                 const RamanSweepOptions& opts) {
  sys.check();
  check_delays(t_delays);
  SweepPlan plan;
  plan.protocol = "raman_echo";
  plan.expected_beat = sys.delta_g;
  plan.excitation_duration = opts.sequence.excitation_duration;
  plan.t_delays = t_delays;
  plan.readout = opts.readout;
  plan.parallel = opts.parallel;
  plan.run = opts.run;
  RamanOptions so = opts.sequence;
  so.detection_span = detection_span_for(so.detection_span, opts.readout, so.excitation_duration);
  for (double t : t_delays) plan.sequences.push_back(standard_raman_sequence(sys, t, so));
  return execute(plan, sys, ens);
}

EchoSweepResult excited_state_echo(const LevelSystem& sys, const EnsembleConfig& ens,
                                   const std::vector<double>& t_delays, const ExcitedSweepOptions& opts) {
  sys.check();
  check_delays(t_delays);
  SweepPlan plan;
  plan.protocol = "excited_echo";
  plan.expected_beat = sys.delta_e;
  plan.excitation_duration = opts.sequence.excitation_duration;
  plan.t_delays = t_delays;
  plan.readout = opts.readout;
  plan.parallel = opts.parallel;
  plan.run = opts.run;
  ExcitedEchoOptions so = opts.sequence;
  so.detection_span = detection_span_for(so.detection_span, opts.readout, so.excitation_duration);
  for (double t : t_delays) plan.sequences.push_back(excited_echo_sequence(sys, t, so));
  return execute(plan, sys, ens);
}

PhotonEchoControl photon_echo_control(const LevelSystem& sys, const EnsembleConfig& ens, double t_delay, bool detuned,
                                      const RamanSweepOptions& opts) {
  sys.check();
  RamanOptions so = opts.sequence;
  so.detuned_rephasing = detuned;
  so.detection_span = detection_span_for(so.detection_span, opts.readout, so.excitation_duration);
  const Sequence seq = standard_raman_sequence(sys, t_delay, so);
  collect_diagnostics({seq});
  int excitation = 0;
  while (excitation < static_cast<int>(seq.pulses.size()) && seq.pulses[static_cast<std::size_t>(excitation)].is_chirp())
    ++excitation;

  RunOptions blocked = opts.run;
  blocked.drop_optical_after_pulse = excitation;
  const std::vector<AtomClass> atoms = sample_ensemble(ens, sys);
  const auto full_chunks = run_chunks(atoms, sys, {seq}, opts.run, opts.parallel);
  const auto blocked_chunks = run_chunks(atoms, sys, {seq}, blocked, opts.parallel);

  PhotonEchoControl out;
  out.detuned = detuned;
  EmissionAccumulator full, spin;
  for (const auto& c : full_chunks) full.add(c.acc[0]), out.integrity.merge(c.integrity);
  for (const auto& c : blocked_chunks) spin.add(c.acc[0]), out.integrity.merge(c.integrity);
  EchoReadoutOptions r = opts.readout;
  r.timing_scan = 0.0;
  out.full = measure(full.trace(), t_delay, sys.delta_g, so.excitation_duration, r, 0).component;
  out.spin_only = measure(spin.trace(), t_delay, sys.delta_g, so.excitation_duration, r, 1).component;
  out.raman_amplitude = std::abs(out.spin_only);
  out.contamination = std::abs(out.full - out.spin_only);
  return out;
}

std::vector<SplittingRow> t2_vs_splitting(const LevelSystem& sys, const ZeemanParams& zp,
                                          const std::vector<double>& delta_gs, const EnsembleConfig& ens,
                                          const std::vector<double>& t_delays, const RamanSweepOptions& opts) {
  zp.check();
  if (!(zp.slope_g > 0.0)) throw InvalidInput("slope_g must be > 0 to map a splitting to a field");
  std::vector<SplittingRow> rows;
  for (double dg : delta_gs) {
    if (!(dg > 0.0)) throw InvalidInput("splittings must be > 0");
    SplittingRow row;
    row.delta_g = dg;
    row.b_field = dg / zp.slope_g;
    LevelSystem s = sys;
    s.delta_g = dg;
    s.delta_e = zp.slope_e * row.b_field;
    EnsembleConfig e = ens;
    std::tie(e.spin_width_g, e.spin_width_e) = spin_widths(row.b_field, zp);
    row.sweep = raman_echo_sweep(s, e, t_delays, opts);
    const FitResult fit = fit_exp_decay(row.sweep.decay_points());
    row.t2 = fit.value_of("T2");
    row.t2_stderr = fit.error_of("T2");
    for (const auto& d : row.sweep.diagnostics)
      if (d.level == DiagLevel::warn) row.warnings.push_back(d);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ================================================================ output

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_holeburn_csv(std::ostream& os, const std::vector<HoleburnResult>& scans) {
  os << "b_field_T,detuning_MHz,transmission_change\n";
  for (const auto& r : scans)
    for (std::size_t i = 0; i < r.detuning.size(); ++i)
      os << format_double(r.b_field) << ',' << format_double(r.detuning[i]) << ','
         << format_double(r.transmission_change[i]) << '\n';
}

void write_features_csv(std::ostream& os, const std::vector<HoleburnResult>& scans) {
  os << "b_field_T,center_MHz,width_MHz,polarity,depth\n";
  for (const auto& r : scans)
    for (const auto& f : r.features)
      os << format_double(r.b_field) << ',' << format_double(f.center) << ',' << format_double(f.width) << ','
         << to_string(f.polarity) << ',' << format_double(f.depth) << '\n';
}

void write_widths_csv(std::ostream& os, const std::vector<HoleburnResult>& scans) {
  os << "b_field_T,antihole_width_MHz,hole_width_MHz\n";
  for (const auto& r : scans) {
    const WidthSeries w = widths_vs_field({r});
    os << format_double(r.b_field) << ',' << (w.antihole.empty() ? "nan" : format_double(w.antihole[0].second)) << ','
       << (w.hole.empty() ? "nan" : format_double(w.hole[0].second)) << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const EchoSweepResult& r) {
  os << "t_delay_us,amplitude,beat_MHz,peak_time_us\n";
  for (const auto& row : r.rows)
    os << format_double(row.t_delay) << ',' << format_double(row.amplitude) << ',' << format_double(row.beat) << ','
       << format_double(row.peak_time) << '\n';
}

void write_fit_csv(std::ostream& os, const FitResult& f) {
  os << "parameter,value,stderr\n";
  for (const auto& p : f.parameters)
    os << p.name << ',' << format_double(p.value) << ',' << format_double(p.std_error) << '\n';
  os << "residual_norm," << format_double(f.residual_norm) << ",\n";
  os << "n_points," << f.n_points << ",\n";
}

void write_splitting_csv(std::ostream& os, const std::vector<SplittingRow>& rows) {
  os << "delta_g_MHz,b_field_T,t2_us,t2_stderr_us,warnings\n";
  for (const auto& r : rows) {
    std::string w;
    for (const auto& d : r.warnings) w += (w.empty() ? "" : ";") + d.code;
    os << format_double(r.delta_g) << ',' << format_double(r.b_field) << ',' << format_double(r.t2) << ','
       << format_double(r.t2_stderr) << ',' << w << '\n';
  }
}

void Manifest::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_)
    if (e.first == key) {
      e.second = value;
      return;
    }
  entries_.emplace_back(key, value);
}
void Manifest::set(const std::string& key, double value) { set(key, format_double(value)); }
void Manifest::set(const std::string& key, long long value) { set(key, std::to_string(value)); }
void Manifest::add_diagnostic(const Diagnostic& d) { comments_.push_back(d.format()); }
void Manifest::note(const std::string& text) { comments_.push_back(text); }

void Manifest::write(std::ostream& os) const {
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  for (const auto& c : comments_) os << "# " << c << '\n';
}

}  // namespace tmspin
