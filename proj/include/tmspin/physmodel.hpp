#ifndef TMSPIN_PHYSMODEL_HPP
#define TMSPIN_PHYSMODEL_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "tmspin/types.hpp"

namespace tmspin {

struct ZeemanParams {
  double slope_g = 36.0;         // MHz/T
  double slope_e = 16.0;         // MHz/T
  double width_slope_g = 0.99;   // MHz FWHM per T
  double width_slope_e = 0.093;  // MHz FWHM per T
  double residual_width = 0.2;   // MHz FWHM at B = 0 (readout only)

  void check() const;
};

inline constexpr double kInfiniteLifetime = std::numeric_limits<double>::infinity();

struct LevelSystem {
  double delta_g = 41.0;  // MHz
  double delta_e = 41.0 * 16.0 / 36.0;
  double branching_ratio = 0.13;
  double t1_optical = 800.0;  // us
  double t2_optical = 10.0;
  double t2_spin_ground = 300.0;
  double t2_spin_excited = 540.0;

  void check() const;

  /// Same lifetimes, splittings taken from the Zeeman law at `b_field`.
  static LevelSystem at_field(double b_field, const ZeemanParams& zp = {});
};

struct AtomClass {
  double optical_detuning = 0.0;  // MHz
  double dg_deviation = 0.0;
  double de_deviation = 0.0;
  double weight = 1.0;
};

enum class SamplingMode { quadrature, monte_carlo, grid };

const char* to_string(SamplingMode m);
SamplingMode sampling_mode_from_string(const std::string& s);

struct EnsembleConfig {
  int n_optical = 1;
  double optical_window = 0.0;  // MHz half-width
  int n_spin = 1;
  int n_spin_e = 0;  // excited-deviation nodes; 0 means "same as n_spin"
  double spin_width_g = 0.0;  // MHz FWHM
  double spin_width_e = 0.0;
  SamplingMode sampling_mode = SamplingMode::quadrature;
  std::uint64_t rng_seed = 1;
  // grid mode: optical midpoint grid x one spin deviation on a uniform grid
  // with Gaussian weights; the other spin deviation is tied to it by the
  // ratio of the two widths
  bool grid_on_excited = false;
  double grid_spacing = 0.0;  // MHz; 0 derives it from n_spin (n_spin_e)
  double grid_span_sigmas = 3.5;
  double spin_window = 0.0;     // MHz, truncates |deviation| when > 0

  void check() const;
};

inline constexpr double kFwhmToSigma = 1.0 / 2.355;

std::pair<double, double> splittings(double b_field, const ZeemanParams& zp = {});
std::pair<double, double> spin_widths(double b_field, const ZeemanParams& zp = {});

/// d(i, j) couples ground i to excited j.
Eigen::Matrix2d dipole_amplitudes(double branching_ratio);

struct Tone {
  double offset = 0.0;  // MHz
  double rabi = 0.0;    // MHz on a strong leg
  double phase = 0.0;   // rad
};

/// Diagonal of H in the frame of the nominal g1->e1 frequency.
Eigen::Vector4d level_energies(const AtomClass& atom, const LevelSystem& sys);

/// Resonant tone offset of leg (g_i, e_j) for the nominal atom.
double leg_offset(const LevelSystem& sys, int ground, int excited);

Matrix4c build_hamiltonian(const AtomClass& atom, const LevelSystem& sys,
                           const std::vector<Tone>& tones, double t);

struct JumpOperator {
  Matrix4c op;
  double rate = 0.0;  // 1/us
};

std::vector<JumpOperator> lindblad_ops(const LevelSystem& sys);

/// Decomposed relaxation rates (all 1/us), finite lifetimes only.
struct RelaxationRates {
  double gamma_pop = 0.0;       // 1/T1
  double dephase_g = 0.0;       // ground spin pure dephasing
  double dephase_e = 0.0;       // excited spin pure dephasing
  double dephase_opt = 0.0;     // optical pure dephasing
  double branch_strong = 1.0;   // fraction of decay into the strong-leg ground
};

RelaxationRates relaxation_rates(const LevelSystem& sys);

/// Gauss-Hermite nodes/weights for the weight function exp(-x^2), weights sum to sqrt(pi).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n);

std::vector<AtomClass> sample_ensemble(const EnsembleConfig& cfg, const LevelSystem& sys);

}  // namespace tmspin

#endif
