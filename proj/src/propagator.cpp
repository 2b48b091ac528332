#include "tmspin/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace tmspin {

DensityMatrix thermal_state() {
  DensityMatrix r = DensityMatrix::Zero();
  r(kG1, kG1) = r(kG2, kG2) = 0.5;
  return r;
}

DensityMatrix pure_state(int level) {
  DensityMatrix r = DensityMatrix::Zero();
  r(level, level) = 1.0;
  return r;
}

Matrix4c lindblad_rhs(const Matrix4c& h, const std::vector<JumpOperator>& ops, const DensityMatrix& rho) {
  const Complex mi(0.0, -kTwoPi);
  Matrix4c out = mi * (h * rho - rho * h);
  for (const auto& j : ops) {
    const Matrix4c ldl = j.op.adjoint() * j.op;
    out += j.rate * (j.op * rho * j.op.adjoint() - 0.5 * (ldl * rho + rho * ldl));
  }
  return out;
}

double fastest_frequency(const AtomClass& atom, const LevelSystem& sys, const Pulse& pulse) {
  const auto [lo, hi] = pulse.offset_extent();
  const Eigen::Vector4d e = level_energies(atom, sys);
  return std::max({std::abs(lo), std::abs(hi), e.cwiseAbs().maxCoeff()});
}

DensityMatrix step_pulse(const DensityMatrix& rho, const AtomClass& atom, const LevelSystem& sys,
                         const Pulse& pulse, double t, double dt) {
  const double fmax = fastest_frequency(atom, sys, pulse);
  if (!(dt > 0.0)) throw NumericalError("step_pulse: dt must be > 0");
  if (fmax > 0.0 && dt > 1.0 / (20.0 * fmax)) {
    std::ostringstream os;
    os << "step_pulse: dt = " << dt << " us exceeds the bound 1/(20 f_max) = " << 1.0 / (20.0 * fmax)
       << " us (f_max = " << fmax << " MHz)";
    throw NumericalError(os.str());
  }
  const auto ops = lindblad_ops(sys);
  auto h = [&](double s) { return build_hamiltonian(atom, sys, pulse.tones_at(s), s); };
  const Matrix4c h0 = h(t), hm = h(t + 0.5 * dt), h1 = h(t + dt);
  const Matrix4c k1 = lindblad_rhs(h0, ops, rho);
  const Matrix4c k2 = lindblad_rhs(hm, ops, rho + 0.5 * dt * k1);
  const Matrix4c k3 = lindblad_rhs(hm, ops, rho + 0.5 * dt * k2);
  const Matrix4c k4 = lindblad_rhs(h1, ops, rho + dt * k3);
  DensityMatrix out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  const Complex tr = out.trace();
  if (std::abs(tr - 1.0) > 1e-10) out /= tr;
  return out;
}

namespace {

// Coherence decay rates Gamma_ab of the closed-form dark evolution.
Eigen::Matrix4d coherence_rates(const LevelSystem& sys) {
  const RelaxationRates r = relaxation_rates(sys);
  const double g_opt = 0.5 * r.gamma_pop + 0.25 * r.dephase_g + 0.25 * r.dephase_e + 0.5 * r.dephase_opt;
  Eigen::Matrix4d g = Eigen::Matrix4d::Constant(g_opt);
  g(0, 1) = g(1, 0) = r.dephase_g;
  g(2, 3) = g(3, 2) = r.gamma_pop + r.dephase_e;
  for (int i = 0; i < 4; ++i) g(i, i) = 0.0;
  return g;
}

}  // namespace

namespace {

// f * tau reduced to [-0.5, 0.5] cycles, keeping the rounding error of the product
double cycles_mod1(double f, double tau) {
  const double p = f * tau;
  const double err = std::fma(f, tau, -p);
  return (p - std::nearbyint(p)) + err;
}

}  // namespace

DensityMatrix free_evolve(const DensityMatrix& rho, const AtomClass& atom, const LevelSystem& sys, double tau) {
  if (!(tau >= 0.0)) throw InvalidInput("free_evolve: tau must be >= 0");
  if (tau == 0.0) return rho;
  const Eigen::Vector4d e = level_energies(atom, sys);
  const Eigen::Matrix4d g = coherence_rates(sys);
  const RelaxationRates r = relaxation_rates(sys);
  DensityMatrix out = rho;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      if (a == b) continue;
      out(a, b) = rho(a, b) * std::polar(std::exp(-g(a, b) * tau), -kTwoPi * cycles_mod1(e(a) - e(b), tau));
    }
  const double keep = std::exp(-r.gamma_pop * tau);
  const double lost = -std::expm1(-r.gamma_pop * tau);
  const double s = r.branch_strong, w = 1.0 - s;
  const Complex p1 = rho(kE1, kE1), p2 = rho(kE2, kE2);
  out(kE1, kE1) = p1 * keep;
  out(kE2, kE2) = p2 * keep;
  out(kG1, kG1) = rho(kG1, kG1) + lost * (s * p1 + w * p2);
  out(kG2, kG2) = rho(kG2, kG2) + lost * (w * p1 + s * p2);
  return out;
}

DensityMatrix drop_optical_coherences(const DensityMatrix& rho) {
  DensityMatrix out = rho;
  out.block<2, 2>(0, 2).setZero();
  out.block<2, 2>(2, 0).setZero();
  return out;
}

void IntegrityReport::merge(const IntegrityReport& o) {
  if (checks == 0) {
    *this = o;
    return;
  }
  if (o.checks == 0) return;
  max_trace_error = std::max(max_trace_error, o.max_trace_error);
  max_hermiticity_error = std::max(max_hermiticity_error, o.max_hermiticity_error);
  min_eigenvalue = std::min(min_eigenvalue, o.min_eigenvalue);
  max_trace_drift_corrected = std::max(max_trace_drift_corrected, o.max_trace_drift_corrected);
  checks += o.checks;
}

bool IntegrityReport::within(double trace_tol, double herm_tol, double eig_tol) const {
  return max_trace_error < trace_tol && max_hermiticity_error < herm_tol && min_eigenvalue >= eig_tol;
}

IntegrityReport check_state(const DensityMatrix& rho) {
  IntegrityReport r;
  r.checks = 1;
  r.max_trace_error = std::abs(rho.trace() - 1.0);
  r.max_hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  const Matrix4c herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(herm, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  return r;
}

double default_sample_dt(const LevelSystem& sys) {
  return 1.0 / (8.0 * std::max(sys.delta_g + sys.delta_e, 1.0));
}

// ---------------------------------------------------------------------------

struct PulseMapCache::Spectral {
  Eigen::Matrix<Complex, 16, 1> lambda;
  Matrix16c v;
  Matrix16c vinv;
  bool usable = false;
};

PulseMapCache::PulseMapCache() = default;
PulseMapCache::~PulseMapCache() = default;
PulseMapCache::PulseMapCache(PulseMapCache&&) noexcept = default;
PulseMapCache& PulseMapCache::operator=(PulseMapCache&&) noexcept = default;

namespace {

constexpr int kLegs[4][2] = {{kG1, kE1}, {kG2, kE1}, {kG1, kE2}, {kG2, kE2}};

Complex emission_of(const DensityMatrix& rho, const Eigen::Matrix2d& d) {
  Complex s = 0.0;
  for (const auto& leg : kLegs) s += d(leg[0], leg[1] - 2) * rho(leg[1], leg[0]);
  return Complex(0.0, 1.0) * s;
}

// A pulse seen in a frame whose excited block rotates at f_r.
struct Drive {
  const Pulse* pulse = nullptr;
  double f_r = 0.0;
  Eigen::Vector4d e0;          // diagonal in the shifted frame
  std::vector<Tone> rel;       // offsets relative to f_r
  double period = 0.0;         // 0: not periodic
  bool constant = false;
  double f_ip = 0.0;           // fastest interaction-picture oscillation
  double rabi_sum = 0.0;

  Complex coupling(double t) const {
    Complex c = 0.0;
    if (pulse->is_chirp()) {
      for (const Tone& tone : pulse->tones_at(t)) c += 0.5 * tone.rabi * std::polar(1.0, tone.phase);
      return c;
    }
    for (const Tone& tone : rel) c += 0.5 * tone.rabi * std::polar(1.0, kTwoPi * tone.offset * t + tone.phase);
    return c;
  }
};

double detect_period(const std::vector<Tone>& rel) {
  double smallest = 0.0;
  for (const Tone& t : rel)
    if (std::abs(t.offset) > 0.0 && (smallest == 0.0 || std::abs(t.offset) < smallest)) smallest = std::abs(t.offset);
  if (smallest == 0.0) return 0.0;
  for (int m = 1; m <= 64; ++m) {
    const double f = smallest / m;
    bool ok = true;
    for (const Tone& t : rel) {
      const double q = t.offset / f;
      if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, std::abs(q))) {
        ok = false;
        break;
      }
    }
    if (ok) return 1.0 / f;
  }
  return 0.0;
}

Drive make_drive(const Pulse& p, const AtomClass& atom, const LevelSystem& sys) {
  Drive d;
  d.pulse = &p;
  if (!p.is_chirp()) d.f_r = p.tones().front().offset;
  const Eigen::Vector4d e = level_energies(atom, sys);
  d.e0 = e;
  d.e0(2) -= d.f_r;
  d.e0(3) -= d.f_r;
  double lo, hi;
  if (p.is_chirp()) {
    std::tie(lo, hi) = p.offset_extent();
    d.rabi_sum = p.chirp().rabi;
  } else {
    lo = hi = 0.0;
    bool first = true;
    for (Tone t : p.tones()) {
      t.offset -= d.f_r;
      d.rel.push_back(t);
      lo = first ? t.offset : std::min(lo, t.offset);
      hi = first ? t.offset : std::max(hi, t.offset);
      first = false;
      d.rabi_sum += t.rabi;
    }
    d.period = detect_period(d.rel);
    d.constant = std::all_of(d.rel.begin(), d.rel.end(), [](const Tone& t) { return t.offset == 0.0; });
  }
  for (int g = 0; g < 2; ++g)
    for (int x = 2; x < 4; ++x)
      for (double f : {lo, hi}) d.f_ip = std::max(d.f_ip, std::abs(f - (d.e0(x) - d.e0(g))));
  return d;
}

double ip_step(const Drive& d, const RunOptions& opts) {
  if (opts.dt > 0.0) return opts.dt;
  const double f = std::max({d.f_ip, d.rabi_sum, 1e-3});
  return 1.0 / (80.0 * f);
}

// Interaction-picture coupling at time t relative to reference s0.
Matrix4c ip_coupling(const Drive& d, const Eigen::Matrix2d& dip, double t, double s0) {
  Matrix4c v = Matrix4c::Zero();
  const Complex c = d.coupling(t);
  for (int g = 0; g < 2; ++g)
    for (int e = 0; e < 2; ++e) {
      if (dip(g, e) == 0.0) continue;
      const Complex z = dip(g, e) * c * std::polar(1.0, kTwoPi * (d.e0(g) - d.e0(2 + e)) * (t - s0));
      v(g, 2 + e) = z;
      v(2 + e, g) = std::conj(z);
    }
  return v;
}

Matrix16c free_phase_superop(const Eigen::Vector4d& e0, double tau) {
  Matrix16c u = Matrix16c::Zero();
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a) u(a + 4 * b, a + 4 * b) = std::polar(1.0, -kTwoPi * (e0(a) - e0(b)) * tau);
  return u;
}

// Map of rho' over [t0, t0 + len] by n RK4 steps in the interaction picture.
Matrix16c ip_rk4_map(const Drive& d, const Eigen::Matrix2d& dip, const Matrix16c& ld, double t0, double len, int n) {
  Matrix16c m = Matrix16c::Identity();
  const double h = len / n;
  auto gen = [&](double t) { return Matrix16c(hamiltonian_superop<double>(ip_coupling(d, dip, t, t0)) + ld); };
  for (int k = 0; k < n; ++k) {
    const double t = t0 + k * h;
    const Matrix16c l0 = gen(t), lm = gen(t + 0.5 * h), l1 = gen(t + h);
    const Matrix16c k1 = l0 * m;
    const Matrix16c k2 = lm * (m + 0.5 * h * k1);
    const Matrix16c k3 = lm * (m + 0.5 * h * k2);
    const Matrix16c k4 = l1 * (m + h * k3);
    m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return free_phase_superop(d.e0, len) * m;
}

// Same for a single state, cheaper than the full map.
DensityMatrix ip_rk4_state(const Drive& d, const Eigen::Matrix2d& dip, const std::vector<JumpOperator>& ops,
                           const DensityMatrix& rho, double t0, double len, int n) {
  DensityMatrix r = rho;
  const double h = len / n;
  for (int k = 0; k < n; ++k) {
    const double t = t0 + k * h;
    const Matrix4c v0 = ip_coupling(d, dip, t, t0), vm = ip_coupling(d, dip, t + 0.5 * h, t0),
                   v1 = ip_coupling(d, dip, t + h, t0);
    const Matrix4c k1 = lindblad_rhs(v0, ops, r);
    const Matrix4c k2 = lindblad_rhs(vm, ops, r + 0.5 * h * k1);
    const Matrix4c k3 = lindblad_rhs(vm, ops, r + 0.5 * h * k2);
    const Matrix4c k4 = lindblad_rhs(v1, ops, r + h * k3);
    r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (a != b) r(a, b) *= std::polar(1.0, -kTwoPi * (d.e0(a) - d.e0(b)) * len);
  return r;
}

Matrix16c power(Matrix16c base, long long n) {
  Matrix16c acc = Matrix16c::Identity();
  while (n > 0) {
    if (n & 1) acc = (acc * base).eval();
    n >>= 1;
    if (n) base = (base * base).eval();
  }
  return acc;
}

Matrix4c constant_hamiltonian(const Drive& d, const Eigen::Matrix2d& dip) {
  Matrix4c h = Matrix4c::Zero();
  h.diagonal() = d.e0.cast<Complex>();
  const Complex c = d.coupling(0.0);
  for (int g = 0; g < 2; ++g)
    for (int e = 0; e < 2; ++e) {
      h(g, 2 + e) = dip(g, e) * c;
      h(2 + e, g) = std::conj(h(g, 2 + e));
    }
  return h;
}

// Frame change rho <-> rho' = W rho W^dag, W = diag(1, 1, e^{i th}, e^{i th}).
DensityMatrix to_frame(const DensityMatrix& rho, double f_r, double t, int sign) {
  if (f_r == 0.0) return rho;
  const Complex ph = std::polar(1.0, sign * kTwoPi * f_r * t);
  DensityMatrix out = rho;
  out.block<2, 2>(0, 2) *= std::conj(ph);
  out.block<2, 2>(2, 0) *= ph;
  return out;
}

std::vector<double> atom_key(const AtomClass& a) {
  return {a.optical_detuning, a.dg_deviation, a.de_deviation};
}

struct SampleSlot {
  double t;
  int window;
  int index;
};

class Runner {
 public:
  Runner(const AtomClass& atom, const LevelSystem& sys, const Sequence& seq, const RunOptions& opts,
         PulseMapCache* cache)
      : atom_(atom), sys_(sys), seq_(seq), opts_(opts), cache_(cache) {
    ops_ = lindblad_ops(sys);
    ld_ = dissipator_superop<double>(ops_);
    dip_ = dipole_amplitudes(sys.branching_ratio);
    sample_dt_ = opts.sample_dt > 0.0 ? opts.sample_dt : default_sample_dt(sys);
  }

  Trajectory run() {
    Trajectory tr;
    // pump stage: leading chirps followed by at least one tone pulse
    std::size_t first = 0;
    DensityMatrix rho = thermal_state();
    double t = 0.0;
    bool have_t = false;
    if (opts_.pump == PumpHandling::idealized) {
      std::size_t k = 0;
      while (k < seq_.pulses.size() && seq_.pulses[k].is_chirp()) ++k;
      if (k > 0 && k < seq_.pulses.size()) {
        first = k;
        rho = pure_state(kG1);
        t = seq_.pulses[k - 1].end();
        have_t = true;
      }
    }
    if (opts_.initial_state) rho = *opts_.initial_state;
    if (!have_t) {
      t = 0.0;
      if (!seq_.pulses.empty()) t = std::min(t, seq_.pulses.front().start);
      for (const auto& w : seq_.detection_windows) t = std::min(t, w.start);
    }
    const double t_end = std::max(seq_.end_time(), t);

    std::vector<double> events{t, t_end};
    for (std::size_t i = first; i < seq_.pulses.size(); ++i) {
      events.push_back(seq_.pulses[i].start);
      events.push_back(seq_.pulses[i].end());
    }
    std::vector<SampleSlot> slots;
    tr.emission.resize(seq_.detection_windows.size());
    for (std::size_t w = 0; w < seq_.detection_windows.size(); ++w) {
      const auto& win = seq_.detection_windows[w];
      events.push_back(win.start);
      events.push_back(win.end());
      const int n = std::max(1, static_cast<int>(std::floor(win.duration / sample_dt_ + 1e-9)));
      tr.emission[w].t0 = win.start;
      tr.emission[w].dt = sample_dt_;
      tr.emission[w].samples.assign(n, Complex(0.0));
      for (int k = 0; k < n; ++k) {
        const double s = win.start + k * sample_dt_;
        if (s >= t) slots.push_back({s, static_cast<int>(w), k});
      }
    }
    std::sort(events.begin(), events.end());
    events.erase(std::remove_if(events.begin(), events.end(), [&](double e) { return e < t || e > t_end; }),
                 events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());
    std::stable_sort(slots.begin(), slots.end(), [](const SampleSlot& a, const SampleSlot& b) { return a.t < b.t; });

    record(tr, t, rho, -1);
    std::size_t slot = 0;
    for (std::size_t e = 0; e + 1 < events.size(); ++e) {
      const double a = events[e], b = events[e + 1];
      if (b <= a) continue;
      int active = -1;
      for (std::size_t i = first; i < seq_.pulses.size(); ++i)
        if (seq_.pulses[i].start <= a && seq_.pulses[i].end() >= b) {
          active = static_cast<int>(i);
          break;
        }
      std::vector<SampleSlot> here;
      while (slot < slots.size() && slots[slot].t < b) {
        if (slots[slot].t >= a) here.push_back(slots[slot]);
        ++slot;
      }
      rho = segment(rho, active, a, b, here, tr);
      const bool pulse_ends = active >= 0 && seq_.pulses[active].end() <= b;
      if (pulse_ends && active == opts_.drop_optical_after_pulse) rho = drop_optical_coherences(rho);
      rho = audit(rho, tr, active, b);
      record(tr, b, rho, active);
    }
    // samples exactly at the end of the sequence
    for (; slot < slots.size(); ++slot)
      if (std::abs(slots[slot].t - t_end) < 1e-12)
        tr.emission[slots[slot].window].samples[slots[slot].index] = emission_of(rho, dip_);
    if (!opts_.record_states) {
      tr.times = {tr.times.back()};
      tr.states = {tr.states.back()};
    }
    return tr;
  }

 private:
  void record(Trajectory& tr, double t, const DensityMatrix& rho, int) {
    if (!tr.times.empty() && tr.times.back() >= t) return;
    tr.times.push_back(t);
    tr.states.push_back(rho);
  }

  DensityMatrix audit(DensityMatrix rho, Trajectory& tr, int active, double t) {
    IntegrityReport rep = check_state(rho);
    const double drift = std::abs(rho.trace() - 1.0);
    if (drift > 1e-10) {
      rho /= rho.trace();
      rep.max_trace_drift_corrected = drift;
    }
    tr.integrity.merge(rep);
    if (opts_.check_integrity && !rep.within()) {
      std::ostringstream os;
      os << "integrity breach at t = " << t << " us";
      if (active >= 0) os << " (pulse " << active << ")";
      os << ": trace error " << rep.max_trace_error << ", hermiticity " << rep.max_hermiticity_error
         << ", min eigenvalue " << rep.min_eigenvalue;
      throw NumericalError(os.str());
    }
    return rho;
  }

  DensityMatrix segment(const DensityMatrix& rho0, int active, double a, double b,
                        const std::vector<SampleSlot>& here, Trajectory& tr) {
    DensityMatrix rho = rho0;
    if (active < 0) {
      double t = a;
      for (const auto& s : here) {
        rho = free_evolve(rho, atom_, sys_, s.t - t);
        t = s.t;
        tr.emission[s.window].samples[s.index] = emission_of(rho, dip_);
      }
      return free_evolve(rho, atom_, sys_, b - t);
    }
    const Pulse& p = seq_.pulses[active];
    const Drive d = make_drive(p, atom_, sys_);
    DensityMatrix rp = to_frame(rho, d.f_r, a, +1);
    if (d.constant) {
      rp = constant_segment(d, rp, a, b, here, tr);
    } else if (here.empty()) {
      rp = unvec<double>(pulse_map(d, a, b) * vec(rp));
    } else {
      const double h = ip_step(d, opts_);
      double t = a;
      for (const auto& s : here) {
        if (s.t > t) rp = ip_rk4_state(d, dip_, ops_, rp, t, s.t - t, std::max(1, int(std::ceil((s.t - t) / h))));
        t = s.t;
        tr.emission[s.window].samples[s.index] = emission_of(to_frame(rp, d.f_r, t, -1), dip_);
      }
      if (b > t) rp = ip_rk4_state(d, dip_, ops_, rp, t, b - t, std::max(1, int(std::ceil((b - t) / h))));
    }
    return to_frame(rp, d.f_r, b, -1);
  }

  Matrix16c pulse_map(const Drive& d, double a, double b) {
    const Pulse& p = *d.pulse;
    std::vector<double> key;
    if (cache_) {
      key = atom_key(atom_);
      // a periodic drive only sees the start time modulo its period
      const double phase_start = d.period > 0.0 ? std::fmod(a, d.period) : a;
      key.insert(key.end(), {std::round(phase_start * 1e12) * 1e-12, b - a, opts_.dt, d.f_r});
      if (p.is_chirp()) {
        key.insert(key.end(), {1.0, p.chirp().center, p.chirp().rate_hz_per_s, p.chirp().rabi});
      } else {
        for (const Tone& t : d.rel) key.insert(key.end(), {t.offset, t.rabi, t.phase});
      }
      if (auto it = cache_->pulse_maps.find(key); it != cache_->pulse_maps.end()) return it->second;
    }
    const double h = ip_step(d, opts_);
    const double len = b - a;
    Matrix16c m;
    if (d.period > 0.0 && len > 2.0 * d.period) {
      const int k = std::max(4, static_cast<int>(std::ceil(d.period / h)));
      const Matrix16c one = ip_rk4_map(d, dip_, ld_, a, d.period, k);
      const long long n = static_cast<long long>(std::floor(len / d.period));
      const double rem = len - n * d.period;
      m = power(one, n);
      if (rem > 1e-14) {
        const int kr = std::max(1, static_cast<int>(std::ceil(rem / h)));
        m = (ip_rk4_map(d, dip_, ld_, a + n * d.period, rem, kr) * m).eval();
      }
    } else {
      m = ip_rk4_map(d, dip_, ld_, a, len, std::max(1, static_cast<int>(std::ceil(len / h))));
    }
    if (cache_) cache_->pulse_maps.emplace(std::move(key), m);
    return m;
  }

  std::shared_ptr<PulseMapCache::Spectral> spectral(const Drive& d, const Matrix16c& gen) {
    std::vector<double> key;
    if (cache_) {
      key = atom_key(atom_);
      key.push_back(d.f_r);
      for (const Tone& t : d.rel) key.insert(key.end(), {t.rabi, t.phase});
      if (auto it = cache_->spectra.find(key); it != cache_->spectra.end()) return it->second;
    }
    auto s = std::make_shared<PulseMapCache::Spectral>();
    Eigen::ComplexEigenSolver<Matrix16c> es(gen);
    if (es.info() == Eigen::Success) {
      s->lambda = es.eigenvalues();
      s->v = es.eigenvectors();
      Eigen::FullPivLU<Matrix16c> lu(s->v);
      if (lu.isInvertible()) {
        s->vinv = lu.inverse();
        const double rec = (s->v * s->lambda.asDiagonal() * s->vinv - gen).norm() / std::max(gen.norm(), 1e-300);
        const double cond = s->v.norm() * s->vinv.norm();
        s->usable = rec < 1e-11 && cond < 1e6;
      }
    }
    if (cache_) cache_->spectra.emplace(std::move(key), s);
    return s;
  }

  DensityMatrix constant_segment(const Drive& d, DensityMatrix rp, double a, double b,
                                 const std::vector<SampleSlot>& here, Trajectory& tr) {
    const Matrix16c gen = hamiltonian_superop<double>(constant_hamiltonian(d, dip_)) + ld_;
    if (!here.empty()) {
      auto sp = spectral(d, gen);
      if (sp->usable) {
        const Eigen::Matrix<Complex, 16, 1> c = sp->vinv * vec(rp);
        // emission weights per mode: i * sum_legs d * V[(e, g), m]
        Eigen::Matrix<Complex, 16, 1> amp;
        for (int m = 0; m < 16; ++m) {
          Complex s = 0.0;
          for (const auto& leg : kLegs) s += dip_(leg[0], leg[1] - 2) * sp->v(leg[1] + 4 * leg[0], m);
          amp(m) = Complex(0.0, 1.0) * s * c(m);
        }
        std::size_t i = 0;
        while (i < here.size()) {
          // run of uniformly spaced samples from one window
          std::size_t j = i + 1;
          while (j < here.size() && here[j].window == here[i].window && here[j].index == here[j - 1].index + 1) ++j;
          const double step = sample_dt_;
          Eigen::Matrix<Complex, 16, 1> z, mu;
          for (int m = 0; m < 16; ++m) {
            z(m) = std::exp(sp->lambda(m) * (here[i].t - a));
            mu(m) = std::exp(sp->lambda(m) * step);
          }
          Complex frame = std::polar(1.0, -kTwoPi * d.f_r * here[i].t);
          const Complex frame_step = std::polar(1.0, -kTwoPi * d.f_r * step);
          for (std::size_t k = i; k < j; ++k) {
            tr.emission[here[k].window].samples[here[k].index] = frame * (amp.array() * z.array()).sum();
            z.array() *= mu.array();
            frame *= frame_step;
          }
          i = j;
        }
        Eigen::Matrix<Complex, 16, 1> zb;
        for (int m = 0; m < 16; ++m) zb(m) = std::exp(sp->lambda(m) * (b - a)) * c(m);
        const DensityMatrix out = unvec<double>(sp->v * zb);
        return 0.5 * (out + out.adjoint());
      }
      // ill-conditioned spectrum: step with exact short-time maps
      double t = a;
      Matrix16c step_map = (gen * sample_dt_).exp();
      for (const auto& s : here) {
        const double gap = s.t - t;
        if (gap > 0.0) {
          if (std::abs(gap - sample_dt_) < 1e-12 * sample_dt_)
            rp = unvec<double>(step_map * vec(rp));
          else
            rp = unvec<double>(Matrix16c((gen * gap).exp()) * vec(rp));
        }
        t = s.t;
        tr.emission[s.window].samples[s.index] = emission_of(to_frame(rp, d.f_r, t, -1), dip_);
      }
      return unvec<double>(Matrix16c((gen * (b - t)).exp()) * vec(rp));
    }
    std::vector<double> key;
    if (cache_) {
      key = atom_key(atom_);
      key.insert(key.end(), {-1.0, d.f_r, b - a});
      for (const Tone& t : d.rel) key.insert(key.end(), {t.rabi, t.phase});
      if (auto it = cache_->pulse_maps.find(key); it != cache_->pulse_maps.end())
        return unvec<double>(it->second * vec(rp));
    }
    const Matrix16c m = (gen * (b - a)).exp();
    if (cache_) cache_->pulse_maps.emplace(std::move(key), m);
    return unvec<double>(m * vec(rp));
  }

  const AtomClass& atom_;
  const LevelSystem& sys_;
  const Sequence& seq_;
  const RunOptions& opts_;
  PulseMapCache* cache_;
  std::vector<JumpOperator> ops_;
  Matrix16c ld_;
  Eigen::Matrix2d dip_;
  double sample_dt_;
};

}  // namespace

Trajectory run_sequence(const AtomClass& atom, const LevelSystem& sys, const Sequence& seq, const RunOptions& opts,
                        PulseMapCache* cache) {
  for (const Diagnostic& d : structural_diagnostics(seq))
    if (d.level == DiagLevel::error) throw InvalidConfiguration("run_sequence: " + d.format());
  return Runner(atom, sys, seq, opts, cache).run();
}

DensityMatrix brute_force_evolve(const DensityMatrix& rho0, const AtomClass& atom, const LevelSystem& sys,
                                 const Sequence& seq, double dt_fine, double t_begin, double t_end) {
  if (!(dt_fine > 0.0)) throw InvalidInput("brute_force_evolve: dt_fine must be > 0");
  const auto ops = lindblad_ops(sys);
  const Eigen::Matrix2d dip = dipole_amplitudes(sys.branching_ratio);
  std::vector<double> edges{t_begin, t_end};
  for (const Pulse& p : seq.pulses) {
    edges.push_back(p.start);
    edges.push_back(p.end());
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::remove_if(edges.begin(), edges.end(), [&](double e) { return e < t_begin || e > t_end; }),
              edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  // interaction picture w.r.t. the atom's bare energies, shared by every segment
  const Eigen::Vector4d e = level_energies(atom, sys);
  DensityMatrix r = rho0;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double a = edges[s], b = edges[s + 1];
    const double mid = 0.5 * (a + b);
    const Pulse* active = nullptr;
    for (const Pulse& p : seq.pulses)
      if (p.start <= mid && p.end() >= mid) active = &p;
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / dt_fine)));
    const double h = (b - a) / n;
    auto v_at = [&](double t) {
      if (!active) return Matrix4c(Matrix4c::Zero());
      // evaluate the active pulse only, clamping to its support at the edges
      const double tc = std::clamp(t, active->start, active->end());
      Matrix4c v = Matrix4c::Zero();
      Complex c = 0.0;
      for (const Tone& tone : active->tones_at(tc))
        c += 0.5 * tone.rabi * std::polar(1.0, kTwoPi * tone.offset * tc + tone.phase);
      for (int g = 0; g < 2; ++g)
        for (int x = 0; x < 2; ++x) {
          const Complex z = dip(g, x) * c * std::polar(1.0, kTwoPi * (e(g) - e(2 + x)) * (t - t_begin));
          v(g, 2 + x) = z;
          v(2 + x, g) = std::conj(z);
        }
      return v;
    };
    for (int k = 0; k < n; ++k) {
      const double t = a + k * h;
      const Matrix4c v0 = v_at(t), vm = v_at(t + 0.5 * h), v1 = v_at(t + h);
      const Matrix4c k1 = lindblad_rhs(v0, ops, r);
      const Matrix4c k2 = lindblad_rhs(vm, ops, r + 0.5 * h * k1);
      const Matrix4c k3 = lindblad_rhs(vm, ops, r + 0.5 * h * k2);
      const Matrix4c k4 = lindblad_rhs(v1, ops, r + h * k3);
      r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (a != b) r(a, b) *= std::polar(1.0, -kTwoPi * (e(a) - e(b)) * (t_end - t_begin));
  return r;
}

}  // namespace tmspin
