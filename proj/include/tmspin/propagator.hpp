#ifndef TMSPIN_PROPAGATOR_HPP
#define TMSPIN_PROPAGATOR_HPP

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "tmspin/physmodel.hpp"
#include "tmspin/pulsekit.hpp"

namespace tmspin {

using DensityMatrix = Matrix4c;

DensityMatrix thermal_state();
DensityMatrix pure_state(int level);

// ---- superoperators on column-major vec(rho) ----

template <typename Scalar>
SuperOp<Scalar> left_mul(const Matrix4<Scalar>& a) {
  SuperOp<Scalar> s = SuperOp<Scalar>::Zero();
  for (int b = 0; b < 4; ++b) s.template block<4, 4>(4 * b, 4 * b) = a;
  return s;
}

template <typename Scalar>
SuperOp<Scalar> right_mul(const Matrix4<Scalar>& a) {
  SuperOp<Scalar> s;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      s.template block<4, 4>(4 * i, 4 * j) = a(j, i) * Matrix4<Scalar>::Identity();
  return s;
}

/// -i 2pi [h, .]
template <typename Scalar>
SuperOp<Scalar> hamiltonian_superop(const Matrix4<Scalar>& h) {
  const std::complex<Scalar> mi(0, -2 * std::numbers::pi_v<Scalar>);
  return mi * (left_mul(h) - right_mul(h));
}

template <typename Scalar>
SuperOp<Scalar> dissipator_superop(const std::vector<JumpOperator>& ops) {
  SuperOp<Scalar> d = SuperOp<Scalar>::Zero();
  for (const auto& j : ops) {
    const Matrix4<Scalar> l = j.op.template cast<std::complex<Scalar>>();
    const Matrix4<Scalar> ldl = l.adjoint() * l;
    d += Scalar(j.rate) * (left_mul(l) * right_mul<Scalar>(l.adjoint()) -
                           Scalar(0.5) * (left_mul(ldl) + right_mul(ldl)));
  }
  return d;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 16, 1> vec(const Eigen::MatrixBase<Derived>& m) {
  return Eigen::Map<const Eigen::Matrix<typename Derived::Scalar, 16, 1>>(m.derived().eval().data());
}

template <typename Scalar>
Matrix4<Scalar> unvec(const LiouvilleVector<Scalar>& v) {
  return Eigen::Map<const Matrix4<Scalar>>(v.data());
}

/// Lindblad right-hand side in the frame of the Hamiltonian argument.
Matrix4c lindblad_rhs(const Matrix4c& h, const std::vector<JumpOperator>& ops, const DensityMatrix& rho);

/// Largest frequency (MHz) the plain rotating-frame integrator has to resolve.
double fastest_frequency(const AtomClass& atom, const LevelSystem& sys, const Pulse& pulse);

/// One explicit RK4 step of the full rotating-frame equation from time t.
/// Refuses dt > 1 / (20 f_max).
DensityMatrix step_pulse(const DensityMatrix& rho, const AtomClass& atom, const LevelSystem& sys,
                         const Pulse& pulse, double t, double dt);

/// Exact dark evolution over tau.
DensityMatrix free_evolve(const DensityMatrix& rho, const AtomClass& atom, const LevelSystem& sys, double tau);

enum class PumpHandling { idealized, simulate };

struct RunOptions {
  double dt = 0.0;         // integration step inside pulses; 0 picks 1/(80 f), f the fastest interaction-picture frequency
  double sample_dt = 0.0;  // emission sampling; 0 picks 1/(8 (dg + de))
  PumpHandling pump = PumpHandling::idealized;
  std::optional<DensityMatrix> initial_state;
  bool record_states = true;
  bool check_integrity = true;
  /// Remove every optical (ground-excited) coherence right after this pulse (-1: never).
  int drop_optical_after_pulse = -1;
};

struct EmissionRecord {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<Complex> samples;  // i * sum_legs d * rho_eg
};

struct IntegrityReport {
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
  double max_trace_drift_corrected = 0.0;
  int checks = 0;

  void merge(const IntegrityReport& o);
  bool within(double trace_tol = 1e-9, double herm_tol = 1e-9, double eig_tol = -1e-8) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::vector<EmissionRecord> emission;
  IntegrityReport integrity;

  const DensityMatrix& final_state() const { return states.back(); }
};

/// Maps reused across calls for one atom: single-tone Liouvillian spectra and whole-pulse maps.
class PulseMapCache {
 public:
  struct Spectral;
  PulseMapCache();
  ~PulseMapCache();
  PulseMapCache(PulseMapCache&&) noexcept;
  PulseMapCache& operator=(PulseMapCache&&) noexcept;

  std::map<std::vector<double>, Matrix16c> pulse_maps;
  std::map<std::vector<double>, std::shared_ptr<Spectral>> spectra;
};

double default_sample_dt(const LevelSystem& sys);

Trajectory run_sequence(const AtomClass& atom, const LevelSystem& sys, const Sequence& seq,
                        const RunOptions& opts = {}, PulseMapCache* cache = nullptr);

/// Oracle integrator: interaction-picture RK4 across the whole sequence with a
/// uniform fine step, dark intervals included.
DensityMatrix brute_force_evolve(const DensityMatrix& rho, const AtomClass& atom, const LevelSystem& sys,
                                 const Sequence& seq, double dt_fine, double t_begin, double t_end);

IntegrityReport check_state(const DensityMatrix& rho);

/// Pinching onto the ground and excited blocks: populations and spin coherences survive.
DensityMatrix drop_optical_coherences(const DensityMatrix& rho);

}  // namespace tmspin

#endif
