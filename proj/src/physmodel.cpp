#include "tmspin/physmodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tmspin {

namespace {


double inv_or_zero(double lifetime) { return std::isinf(lifetime) ? 0.0 : 1.0 / lifetime; }

void require_field(double b) {
  if (!(b >= 0.0) || !std::isfinite(b))
    throw InvalidInput("magnetic field magnitude must be finite and >= 0, got " + std::to_string(b));
}

}  // namespace

void ZeemanParams::check() const {
  for (double v : {slope_g, slope_e, width_slope_g, width_slope_e, residual_width})
    if (!(v >= 0.0)) throw InvalidInput("Zeeman parameters must be >= 0");
}

void LevelSystem::check() const {
  if (!(delta_g >= 0.0) || !(delta_e >= 0.0)) throw InvalidInput("splittings must be >= 0");
  if (!(branching_ratio >= 0.0 && branching_ratio <= 1.0))
    throw InvalidInput("branching ratio must lie in [0, 1]");
  for (double v : {t1_optical, t2_optical, t2_spin_ground, t2_spin_excited})
    if (!(v > 0.0)) throw InvalidInput("lifetimes must be > 0");
  if (t2_optical > 2.0 * t1_optical)
    throw InvalidConfiguration("t2_optical exceeds 2 * t1_optical");
}

LevelSystem LevelSystem::at_field(double b_field, const ZeemanParams& zp) {
  LevelSystem s;
  std::tie(s.delta_g, s.delta_e) = splittings(b_field, zp);
  return s;
}

const char* to_string(SamplingMode m) {
  switch (m) {
    case SamplingMode::quadrature: return "quadrature";
    case SamplingMode::monte_carlo: return "monte_carlo";
    case SamplingMode::grid: return "grid";
  }
  return "?";
}

SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "quadrature") return SamplingMode::quadrature;
  if (s == "monte_carlo") return SamplingMode::monte_carlo;
  if (s == "grid") return SamplingMode::grid;
  throw InvalidInput("unknown sampling mode '" + s + "'");
}

void EnsembleConfig::check() const {
  if (n_optical < 1 || n_spin < 1 || n_spin_e < 0) throw InvalidInput("ensemble counts must be >= 1");
  if (!(optical_window >= 0.0) || !(spin_width_g >= 0.0) || !(spin_width_e >= 0.0))
    throw InvalidInput("ensemble widths must be >= 0");
  if (!(grid_spacing >= 0.0) || !(grid_span_sigmas > 0.0) || !(spin_window >= 0.0))
    throw InvalidInput("grid spacing must be >= 0 and span > 0");
}

std::pair<double, double> splittings(double b_field, const ZeemanParams& zp) {
  require_field(b_field);
  return {zp.slope_g * b_field, zp.slope_e * b_field};
}

std::pair<double, double> spin_widths(double b_field, const ZeemanParams& zp) {
  require_field(b_field);
  return {zp.width_slope_g * b_field, zp.width_slope_e * b_field};
}

Eigen::Matrix2d dipole_amplitudes(double branching_ratio) {
  if (!(branching_ratio >= 0.0 && branching_ratio <= 1.0))
    throw InvalidInput("branching ratio must lie in [0, 1]");
  const double w = std::sqrt(branching_ratio);
  Eigen::Matrix2d d;
  d << 1.0, w,
       w, 1.0;
  return d;
}

Eigen::Vector4d level_energies(const AtomClass& atom, const LevelSystem& sys) {
  return {0.0, sys.delta_g + atom.dg_deviation, atom.optical_detuning,
          atom.optical_detuning + sys.delta_e + atom.de_deviation};
}

double leg_offset(const LevelSystem& sys, int ground, int excited) {
  const double eg = ground == 0 ? 0.0 : sys.delta_g;
  const double ee = excited == 0 ? 0.0 : sys.delta_e;
  return ee - eg;
}

Matrix4c build_hamiltonian(const AtomClass& atom, const LevelSystem& sys,
                           const std::vector<Tone>& tones, double t) {
  Matrix4c h = Matrix4c::Zero();
  h.diagonal() = level_energies(atom, sys).cast<Complex>();
  const Eigen::Matrix2d d = dipole_amplitudes(sys.branching_ratio);
  Complex c = 0.0;
  for (const Tone& tone : tones) c += 0.5 * tone.rabi * std::polar(1.0, kTwoPi * tone.offset * t + tone.phase);
  for (int g = 0; g < 2; ++g)
    for (int e = 0; e < 2; ++e) {
      if (d(g, e) == 0.0) continue;
      h(g, 2 + e) = d(g, e) * c;
      h(2 + e, g) = std::conj(h(g, 2 + e));
    }
  return h;
}

RelaxationRates relaxation_rates(const LevelSystem& sys) {
  sys.check();
  RelaxationRates r;
  r.gamma_pop = inv_or_zero(sys.t1_optical);
  r.dephase_g = inv_or_zero(sys.t2_spin_ground);
  r.dephase_e = inv_or_zero(sys.t2_spin_excited) - r.gamma_pop;
  constexpr double tol = 1e-15;
  if (r.dephase_e < -tol)
    throw InvalidConfiguration("t2_spin_excited exceeds t1_optical: excited pure dephasing would be negative");
  r.dephase_e = std::max(r.dephase_e, 0.0);
  r.dephase_opt = 2.0 * (inv_or_zero(sys.t2_optical) - 0.5 * r.gamma_pop - 0.25 * r.dephase_g -
                         0.25 * r.dephase_e);
  if (r.dephase_opt < -tol)
    throw InvalidConfiguration(
        "t2_optical too long for the population and spin relaxation rates: optical pure dephasing would be negative");
  r.dephase_opt = std::max(r.dephase_opt, 0.0);
  r.branch_strong = 1.0 / (1.0 + sys.branching_ratio);
  return r;
}

std::vector<JumpOperator> lindblad_ops(const LevelSystem& sys) {
  const RelaxationRates r = relaxation_rates(sys);
  const Eigen::Matrix2d d = dipole_amplitudes(sys.branching_ratio);
  std::vector<JumpOperator> ops;
  auto add = [&](const Matrix4c& op, double rate) {
    if (rate > 0.0) ops.push_back({op, rate});
  };
  for (int e = 0; e < 2; ++e)
    for (int g = 0; g < 2; ++g) {
      Matrix4c l = Matrix4c::Zero();
      l(g, 2 + e) = 1.0;
      add(l, r.gamma_pop * d(g, e) * d(g, e) / (1.0 + sys.branching_ratio));
    }
  Matrix4c sz_g = Matrix4c::Zero();
  sz_g(0, 0) = 1.0;
  sz_g(1, 1) = -1.0;
  add(sz_g, 0.5 * r.dephase_g);
  Matrix4c sz_e = Matrix4c::Zero();
  sz_e(2, 2) = 1.0;
  sz_e(3, 3) = -1.0;
  add(sz_e, 0.5 * r.dephase_e);
  Matrix4c pe = Matrix4c::Zero();
  pe(2, 2) = 1.0;
  pe(3, 3) = 1.0;
  add(pe, r.dephase_opt);
  return ops;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  if (n < 1) throw InvalidInput("Gauss-Hermite order must be >= 1");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  Eigen::VectorXd x = es.eigenvalues();
  Eigen::VectorXd w = std::sqrt(std::numbers::pi) * es.eigenvectors().row(0).transpose().array().square();
  // exact symmetry about zero
  for (int i = 0; i < n / 2; ++i) {
    const double xs = 0.5 * (x(n - 1 - i) - x(i));
    const double ws = 0.5 * (w(i) + w(n - 1 - i));
    x(i) = -xs;
    x(n - 1 - i) = xs;
    w(i) = w(n - 1 - i) = ws;
  }
  if (n % 2 == 1) x(n / 2) = 0.0;
  return {x, w};
}

namespace {

struct Nodes {
  std::vector<double> x;
  std::vector<double> w;
};

Nodes gaussian_nodes(const EnsembleConfig& cfg, double fwhm, int n, double spacing, std::mt19937_64& rng) {
  const bool fixed_grid = cfg.sampling_mode == SamplingMode::grid && spacing > 0.0;
  if (fwhm == 0.0 || (n == 1 && !fixed_grid)) return {{0.0}, {1.0}};
  const double sigma = fwhm * kFwhmToSigma;
  Nodes out;
  switch (cfg.sampling_mode) {
    case SamplingMode::quadrature: {
      auto [x, w] = gauss_hermite(n);
      for (int i = 0; i < n; ++i) {
        out.x.push_back(std::sqrt(2.0) * sigma * x(i));
        out.w.push_back(w(i) / std::sqrt(std::numbers::pi));
      }
      break;
    }
    case SamplingMode::monte_carlo: {
      std::normal_distribution<double> nd(0.0, sigma);
      for (int i = 0; i < n; ++i) {
        out.x.push_back(nd(rng));
        out.w.push_back(1.0 / n);
      }
      break;
    }
    case SamplingMode::grid: {
      double half = cfg.grid_span_sigmas * sigma;
      if (cfg.spin_window > 0.0) half = std::min(half, cfg.spin_window);
      const double h = spacing > 0.0 ? spacing : 2.0 * half / (n - 1);
      const int k = static_cast<int>(std::floor(half / h + 1e-9));
      for (int i = -k; i <= k; ++i) {
        const double x = i * h;
        out.x.push_back(x);
        out.w.push_back(std::exp(-0.5 * x * x / (sigma * sigma)));
      }
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<AtomClass> sample_ensemble(const EnsembleConfig& cfg, const LevelSystem& sys) {
  cfg.check();
  sys.check();
  std::mt19937_64 rng(cfg.rng_seed);
  const int n_e = cfg.n_spin_e == 0 ? cfg.n_spin : cfg.n_spin_e;
  const bool has_window = cfg.n_optical > 1 && cfg.optical_window > 0.0;

  std::vector<AtomClass> atoms;
  if (cfg.sampling_mode == SamplingMode::grid) {
    const bool ex = cfg.grid_on_excited;
    const Nodes nodes = ex ? gaussian_nodes(cfg, cfg.spin_width_e, n_e, cfg.grid_spacing, rng)
                           : gaussian_nodes(cfg, cfg.spin_width_g, cfg.n_spin, cfg.grid_spacing, rng);
    const double other_sigma = (ex ? cfg.spin_width_g : cfg.spin_width_e) * kFwhmToSigma;
    const int n_opt = has_window ? cfg.n_optical : 1;
    const double step = has_window ? 2.0 * cfg.optical_window / n_opt : 0.0;
    for (int k = 0; k < n_opt; ++k) {
      const double d = has_window ? -cfg.optical_window + (k + 0.5) * step : 0.0;
      for (std::size_t i = 0; i < nodes.x.size(); ++i)
        atoms.push_back({d, ex ? 0.0 : nodes.x[i], ex ? nodes.x[i] : 0.0, nodes.w[i]});
    }
    // the other deviation follows the grid axis (common local-field origin)
    const double axis_sigma = (ex ? cfg.spin_width_e : cfg.spin_width_g) * kFwhmToSigma;
    const double ratio = axis_sigma > 0.0 ? other_sigma / axis_sigma : 0.0;
    for (auto& at : atoms) (ex ? at.dg_deviation : at.de_deviation) = ratio * (ex ? at.de_deviation : at.dg_deviation);
  } else {
    std::vector<double> delta;
    if (!has_window) {
      delta.push_back(0.0);
    } else if (cfg.sampling_mode == SamplingMode::monte_carlo) {
      std::uniform_real_distribution<double> ud(-cfg.optical_window, cfg.optical_window);
      for (int i = 0; i < cfg.n_optical; ++i) delta.push_back(ud(rng));
    } else {
      const double step = 2.0 * cfg.optical_window / cfg.n_optical;
      for (int i = 0; i < cfg.n_optical; ++i) delta.push_back(-cfg.optical_window + (i + 0.5) * step);
    }
    const Nodes g = gaussian_nodes(cfg, cfg.spin_width_g, cfg.n_spin, 0.0, rng);
    const Nodes e = gaussian_nodes(cfg, cfg.spin_width_e, n_e, 0.0, rng);
    if (cfg.sampling_mode == SamplingMode::monte_carlo && g.x.size() > 1 && e.x.size() > 1) {
      // independent (dg, de) pairs rather than a tensor product of draws
      for (double d : delta)
        for (std::size_t i = 0; i < g.x.size(); ++i) atoms.push_back({d, g.x[i], e.x[i % e.x.size()], g.w[i]});
    } else {
      for (double d : delta)
        for (std::size_t i = 0; i < g.x.size(); ++i)
          for (std::size_t j = 0; j < e.x.size(); ++j) atoms.push_back({d, g.x[i], e.x[j], g.w[i] * e.w[j]});
    }
  }
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  for (auto& a : atoms) a.weight /= total;
  return atoms;
}

}  // namespace tmspin
