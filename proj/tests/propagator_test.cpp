#include <doctest.h>

#include <cmath>
#include <random>

#include "tmspin/propagator.hpp"
#include "tmspin/signal.hpp"

using namespace tmspin;

namespace {

LevelSystem closed_system() {
  LevelSystem s;
  s.t1_optical = s.t2_optical = s.t2_spin_ground = s.t2_spin_excited = kInfiniteLifetime;
  return s;
}

double max_abs(const Matrix4c& m) { return m.cwiseAbs().maxCoeff(); }

DensityMatrix step_through(DensityMatrix rho, const AtomClass& a, const LevelSystem& sys, const Pulse& p, int n) {
  const double dt = p.duration / n;
  for (int k = 0; k < n; ++k) rho = step_pulse(rho, a, sys, p, p.start + k * dt, dt);
  return rho;
}

DensityMatrix random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix4c a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = Complex(nd(rng), nd(rng));
  Matrix4c r = a * a.adjoint();
  return r / r.trace();
}

}  // namespace

TEST_CASE("step_pulse: no drive, no splitting, no decay leaves rho unchanged") {
  LevelSystem sys = closed_system();
  sys.delta_g = sys.delta_e = 0.0;
  std::mt19937_64 rng(1);
  const DensityMatrix rho = random_state(rng);
  const Pulse p{0.0, 1.0, std::vector<Tone>{{0.0, 0.0, 0.0}}};
  CHECK(max_abs(step_through(rho, AtomClass{}, sys, p, 100) - rho) < 1e-12);
}

TEST_CASE("step_pulse: two-level pi and pi/2 oracles") {
  LevelSystem sys = closed_system();
  sys.branching_ratio = 0.0;
  const double omega = 0.5;  // MHz; full inversion after 1/(2 omega)
  const Pulse pi{0.0, 0.5 / omega, std::vector<Tone>{{0.0, omega, 0.0}}};
  DensityMatrix r = step_through(pure_state(kG1), AtomClass{}, sys, pi, 4000);
  CHECK(std::abs(r(kG1, kG1)) < 1e-6);
  CHECK(std::abs(r(kE1, kE1) - 1.0) < 1e-6);

  const Pulse half{0.0, 0.25 / omega, std::vector<Tone>{{0.0, omega, 0.0}}};
  r = step_through(pure_state(kG1), AtomClass{}, sys, half, 2000);
  CHECK(std::abs(r(kG1, kG1) - 0.5) < 1e-6);
  CHECK(std::abs(r(kE1, kE1) - 0.5) < 1e-6);
  CHECK(std::abs(std::abs(r(kG1, kE1)) - 0.5) < 1e-6);
  // spectators untouched
  CHECK(std::abs(r(kG2, kG2)) < 1e-15);
  CHECK(std::abs(r(kE2, kE2)) < 1e-15);
}

TEST_CASE("step_pulse refuses a step that does not resolve the fastest frequency") {
  LevelSystem sys;
  const Pulse p{0.0, 1.0, std::vector<Tone>{{0.0, 1.0, 0.0}}};
  const double fmax = fastest_frequency(AtomClass{}, sys, p);
  CHECK(fmax == doctest::Approx(sys.delta_g));
  CHECK_NOTHROW(step_pulse(thermal_state(), AtomClass{}, sys, p, 0.0, 1.0 / (20.0 * fmax)));
  CHECK_THROWS_AS(step_pulse(thermal_state(), AtomClass{}, sys, p, 0.0, 1.1 / (20.0 * fmax)), NumericalError);
}

TEST_CASE("free_evolve closed form") {
  LevelSystem sys;
  sys.t2_spin_ground = 300.0;
  const AtomClass a{0.03, 0.2, 0.02, 1.0};
  std::mt19937_64 rng(2);
  const DensityMatrix rho = random_state(rng);

  CHECK(max_abs(free_evolve(rho, a, sys, 0.0) - rho) < 1e-15);

  DensityMatrix c = DensityMatrix::Zero();
  c(kG1, kG1) = c(kG2, kG2) = 0.5;
  c(kG1, kG2) = c(kG2, kG1) = 0.5;
  const double tau = 37.3;
  const DensityMatrix out = free_evolve(c, a, sys, tau);
  const Complex expect = 0.5 * std::exp(-tau / 300.0) * std::polar(1.0, kTwoPi * (sys.delta_g + a.dg_deviation) * tau);
  CHECK(std::abs(out(kG1, kG2) - expect) < 1e-12);

  CHECK_THROWS_AS(free_evolve(rho, a, sys, -1.0), InvalidInput);
}

TEST_CASE("free_evolve is a semigroup") {
  LevelSystem sys;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  for (int i = 0; i < 20; ++i) {
    const DensityMatrix rho = random_state(rng);
    const AtomClass a{u(rng) / 1000, u(rng) / 1000, u(rng) / 1000, 1.0};
    const double t1 = u(rng), t2 = u(rng);
    const DensityMatrix once = free_evolve(rho, a, sys, t1 + t2);
    const DensityMatrix twice = free_evolve(free_evolve(rho, a, sys, t1), a, sys, t2);
    CHECK(max_abs(once - twice) < 1e-12);
  }
}

TEST_CASE("spin coherence decays at 1/T2 over two decades") {
  LevelSystem sys;
  sys.t2_spin_ground = 300.0;
  DensityMatrix c = DensityMatrix::Zero();
  c(kG1, kG1) = c(kG2, kG2) = 0.5;
  c(kG1, kG2) = c(kG2, kG1) = 0.5;
  // log-linear least squares over t in [0, 300 ln 100]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = 30;
  for (int k = 0; k < n; ++k) {
    const double t = 300.0 * std::log(100.0) * k / (n - 1);
    const double y = std::log(std::abs(free_evolve(c, AtomClass{}, sys, t)(kG1, kG2)));
    sx += t, sy += y, sxx += t * t, sxy += t * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(-slope == doctest::Approx(1.0 / 300.0).epsilon(1e-3));
}

TEST_CASE("run_sequence: empty sequence keeps the thermal state") {
  Sequence s;
  s.detection_windows.push_back({0.0, 50.0});
  const Trajectory tr = run_sequence(AtomClass{}, LevelSystem{}, s);
  for (const auto& st : tr.states) CHECK(max_abs(st - thermal_state()) < 1e-14);
  for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
  for (const auto& e : tr.emission[0].samples) CHECK(std::abs(e) < 1e-15);
}

TEST_CASE("run_sequence: excitation creates ground spin coherence") {
  LevelSystem sys;
  RamanOptions o;
  o.include_pump = false;
  Sequence s = standard_raman_sequence(sys, 100.0, o);
  s.pulses.resize(1);
  s.detection_windows.clear();
  RunOptions ro;
  ro.initial_state = pure_state(kG1);
  const Trajectory tr = run_sequence(AtomClass{}, sys, s, ro);
  CHECK(std::abs(tr.final_state()(kG1, kG2)) > 1e-3);
  CHECK(tr.integrity.within());
}

TEST_CASE("run_sequence: single atom standard Raman sequence beats at delta_g") {
  LevelSystem sys = closed_system();
  RamanOptions o;
  o.include_pump = false;
  const Sequence s = standard_raman_sequence(sys, 80.0, o);
  RunOptions ro;
  ro.initial_state = pure_state(kG1);
  const Trajectory tr = run_sequence(AtomClass{}, sys, s, ro);
  const SignalTrace e = emitted_field({{1.0, &tr}});
  const Spectrum sp = spectrum(heterodyne(e, Tone{0.0, 100.0, 0.0}));
  CHECK(std::abs(peak_frequency(sp, 1.0) - sys.delta_g) <= sp.resolution());
}

TEST_CASE("R = 0 keeps a g1-e1 drive closed") {
  LevelSystem sys;
  sys.branching_ratio = 0.0;
  Sequence s;
  s.pulses.push_back({0.0, 7.0, std::vector<Tone>{{0.0, 0.3, 0.0}}});
  s.pulses.push_back({20.0, 3.0, std::vector<Tone>{{0.05, 1.0, 1.0}}});
  RunOptions ro;
  ro.initial_state = pure_state(kG1);
  const Trajectory tr = run_sequence(AtomClass{0.02, 0.0, 0.0, 1.0}, sys, s, ro);
  for (const auto& st : tr.states) {
    CHECK(std::abs(st(kG2, kG2)) < 1e-12);
    CHECK(std::abs(st(kE2, kE2)) < 1e-12);
  }
}

TEST_CASE("run_sequence matches the brute-force integrator") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LevelSystem sys;
  sys.delta_g = 5.0;
  sys.delta_e = 2.2;
  sys.t2_optical = 20.0;
  for (int c = 0; c < 4; ++c) {
    Sequence s;
    double t = 5.0 * u(rng);
    for (int k = 0; k < 3; ++k) {
      std::vector<Tone> tones;
      const int nt = 1 + static_cast<int>(2 * u(rng));
      for (int j = 0; j < nt; ++j) tones.push_back({12.0 * u(rng) - 6.0, 0.5 * u(rng), 6.0 * u(rng)});
      const double dur = 1.0 + 9.0 * u(rng);
      s.pulses.push_back({t, dur, tones});
      t += dur + 40.0 * u(rng);
    }
    s.detection_windows.push_back({s.pulses[1].start, 3.0});
    const AtomClass a{0.2 * u(rng) - 0.1, 0.1 * u(rng), 0.05 * u(rng), 1.0};
    RunOptions ro;
    ro.initial_state = thermal_state();
    const Trajectory tr = run_sequence(a, sys, s, ro);
    const DensityMatrix bf = brute_force_evolve(thermal_state(), a, sys, s, 2e-3, tr.times.front(), tr.times.back());
    CHECK(max_abs(tr.final_state() - bf) < 1e-6);
  }
}

TEST_CASE("brute force: dark evolution and convergence") {
  LevelSystem sys;
  sys.delta_g = 5.0;
  sys.delta_e = 2.0;
  std::mt19937_64 rng(4);
  const DensityMatrix rho = random_state(rng);
  const AtomClass a{0.05, 0.01, 0.0, 1.0};
  const DensityMatrix dark = brute_force_evolve(rho, a, sys, Sequence{}, 0.01, 0.0, 40.0);
  CHECK(max_abs(dark - free_evolve(rho, a, sys, 40.0)) < 1e-8);

  Sequence s;
  s.pulses.push_back({1.0, 4.0, std::vector<Tone>{{0.0, 0.4, 0.0}, {-5.0, 0.4, 0.0}}});
  const DensityMatrix coarse = brute_force_evolve(rho, a, sys, s, 4e-3, 0.0, 10.0);
  const DensityMatrix fine = brute_force_evolve(rho, a, sys, s, 2e-3, 0.0, 10.0);
  CHECK(max_abs(coarse - fine) < 1e-7);
}

TEST_CASE("echo refocusing with an ideal two-photon swap") {
  LevelSystem sys;
  sys.t2_spin_ground = 300.0;
  const double fwhm = 0.1, t = 80.0;  // sigma * T ~ 3.4, FWHM * T = 8
  EnsembleConfig cfg;
  cfg.n_spin = 40;
  cfg.n_spin_e = 1;
  cfg.spin_width_g = fwhm;
  const auto atoms = sample_ensemble(cfg, sys);
  Matrix4c swap = Matrix4c::Zero();
  swap(kG1, kG2) = swap(kG2, kG1) = 1.0;
  swap(kE1, kE1) = swap(kE2, kE2) = 1.0;
  DensityMatrix start = DensityMatrix::Zero();
  start(kG1, kG1) = start(kG2, kG2) = 0.5;
  start(kG1, kG2) = start(kG2, kG1) = 0.5;
  Complex at_t = 0.0, at_2t = 0.0;
  for (const auto& a : atoms) {
    const DensityMatrix mid = free_evolve(start, a, sys, t);
    at_t += a.weight * mid(kG1, kG2) * std::polar(1.0, -kTwoPi * sys.delta_g * t);
    at_2t += a.weight * free_evolve(swap * mid * swap.adjoint(), a, sys, t)(kG1, kG2);
  }
  CHECK(std::abs(at_t) < 0.05);  // dephased before the swap
  CHECK(std::abs(at_2t) == doctest::Approx(0.5 * std::exp(-2.0 * t / 300.0)).epsilon(0.02));
}

TEST_CASE("integrity holds along a dissipative run") {
  LevelSystem sys;
  RamanOptions o;
  const Sequence s = standard_raman_sequence(sys, 100.0, o);
  const Trajectory tr = run_sequence(AtomClass{0.05, 0.1, 0.01, 1.0}, sys, s);
  CHECK(tr.integrity.checks > 0);
  CHECK(tr.integrity.max_trace_error < 1e-9);
  CHECK(tr.integrity.max_hermiticity_error < 1e-9);
  CHECK(tr.integrity.min_eigenvalue >= -1e-8);
  for (const auto& st : tr.states) CHECK(check_state(st).within());
}

TEST_CASE("dropping optical coherences keeps the diagonal blocks") {
  std::mt19937_64 rng(9);
  const DensityMatrix r = random_state(rng);
  const DensityMatrix d = drop_optical_coherences(r);
  CHECK((d.block<2, 2>(0, 0) - r.block<2, 2>(0, 0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.block<2, 2>(2, 2) - r.block<2, 2>(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.block<2, 2>(0, 2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(check_state(d).min_eigenvalue >= -1e-12);
}
