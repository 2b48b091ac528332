#include "tmspin/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace tmspin {

double FitResult::value_of(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p.value;
  throw InvalidInput("no fit parameter named " + name);
}

double FitResult::error_of(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p.std_error;
  throw InvalidInput("no fit parameter named " + name);
}

namespace {

// ordinary least squares y = a x + b with covariance from the residual variance
struct Line {
  double slope, intercept, se_slope, se_intercept, rss;
};

Line ols(const std::vector<Point>& pts) {
  const double n = static_cast<double>(pts.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) mx += x, my += y;
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 1e-300 * std::max(1.0, mx * mx))) throw InvalidInput("fit_linear: all x values identical (singular design)");
  Line l{};
  l.slope = sxy / sxx;
  l.intercept = my - l.slope * mx;
  for (const auto& [x, y] : pts) {
    const double r = y - (l.slope * x + l.intercept);
    l.rss += r * r;
  }
  const double s2 = pts.size() > 2 ? l.rss / (n - 2.0) : 0.0;
  l.se_slope = std::sqrt(s2 / sxx);
  l.se_intercept = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  return l;
}

}  // namespace

FitResult fit_linear(const std::vector<Point>& points) {
  if (points.size() < 2) throw InvalidInput("fit_linear: need at least 2 points");
  const Line l = ols(points);
  FitResult r;
  r.parameters = {{"slope", l.slope, l.se_slope}, {"intercept", l.intercept, l.se_intercept}};
  r.residual_norm = std::sqrt(l.rss);
  r.n_points = static_cast<int>(points.size());
  return r;
}

FitResult fit_exp_decay(const std::vector<Point>& points) {
  if (points.size() < 3) throw InvalidInput("fit_exp_decay: need at least 3 points");
  std::vector<Point> logp;
  for (const auto& [t, a] : points) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      std::ostringstream os;
      os << "fit_exp_decay: amplitude at T = " << t << " us is not positive (" << a << ")";
      throw InvalidInput(os.str());
    }
    logp.emplace_back(t, std::log(a));
  }
  const Line l = ols(logp);
  if (!(l.slope < 0.0))
    throw InvalidInput("fit_exp_decay: data do not decay (log-slope >= 0), T2 is singular");

  // Gauss-Newton on A exp(-k T) with k = 2/T2, centred on the mean delay
  double tc = 0.0;
  for (const auto& p : points) tc += p.first;
  tc /= static_cast<double>(points.size());
  double k = -l.slope;
  double c = std::exp(l.intercept - k * tc);  // amplitude at tc
  const int n = static_cast<int>(points.size());
  auto rss_of = [&](double cc, double kk) {
    double s = 0.0;
    for (const auto& [t, a] : points) {
      const double r = a - cc * std::exp(-kk * (t - tc));
      s += r * r;
    }
    return s;
  };
  double rss = rss_of(c, k);
  Eigen::MatrixXd jac(n, 2);
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd res(n);
    for (int i = 0; i < n; ++i) {
      const double e = std::exp(-k * (points[i].first - tc));
      res(i) = points[i].second - c * e;
      jac(i, 0) = e;
      jac(i, 1) = -c * (points[i].first - tc) * e;
    }
    const Eigen::Vector2d step = jac.colPivHouseholderQr().solve(res);
    double lam = 1.0;
    double c1 = c + step(0), k1 = k + step(1), r1 = rss_of(c1, k1);
    while (!(r1 <= rss) && lam > 1e-6) {
      lam *= 0.5;
      c1 = c + lam * step(0);
      k1 = k + lam * step(1);
      r1 = rss_of(c1, k1);
    }
    if (!(r1 <= rss)) break;
    const bool done = std::abs(step(0)) <= 1e-14 * std::abs(c) && std::abs(step(1)) <= 1e-14 * std::abs(k);
    c = c1;
    k = k1;
    rss = r1;
    if (done || lam * std::abs(step(1)) <= 1e-15 * std::abs(k)) break;
  }
  if (!(k > 0.0)) throw InvalidInput("fit_exp_decay: refined decay rate is not positive, T2 is singular");
  for (int i = 0; i < n; ++i) {
    const double e = std::exp(-k * (points[i].first - tc));
    jac(i, 0) = e;
    jac(i, 1) = -c * (points[i].first - tc) * e;
  }
  const Eigen::Matrix2d jtj = jac.transpose() * jac;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(jtj);
  if (!lu.isInvertible()) throw InvalidInput("fit_exp_decay: singular Jacobian (delays not distinct)");
  const double s2 = n > 2 ? rss / (n - 2) : 0.0;
  const Eigen::Matrix2d cov = s2 * lu.inverse();

  // back to (A, T2): A = c exp(k tc), T2 = 2/k
  const double amp = c * std::exp(k * tc);
  const double t2 = 2.0 / k;
  Eigen::Matrix2d g;  // d(A, T2)/d(c, k)
  g << std::exp(k * tc), c * tc * std::exp(k * tc), 0.0, -2.0 / (k * k);
  const Eigen::Matrix2d cv = g * cov * g.transpose();

  FitResult r;
  r.parameters = {{"A", amp, std::sqrt(std::max(0.0, cv(0, 0)))}, {"T2", t2, std::sqrt(std::max(0.0, cv(1, 1)))}};
  r.residual_norm = std::sqrt(rss);
  r.n_points = n;
  return r;
}

FitResult fit_quadrature_width(const std::vector<Point>& points) {
  std::vector<Point> sq;
  for (const auto& [b, w] : points) sq.emplace_back(b * b, w * w);
  const FitResult lin = fit_linear(sq);
  const double s2 = lin.value_of("slope"), c2 = lin.value_of("intercept");
  if (!(s2 > 0.0) || !(c2 >= 0.0))
    throw InvalidInput("fit_quadrature_width: squared widths do not grow with field");
  const double s = std::sqrt(s2), c = std::sqrt(c2);
  FitResult r;
  r.parameters = {{"slope", s, lin.error_of("slope") / (2.0 * s)},
                  {"intercept", c, c > 0.0 ? lin.error_of("intercept") / (2.0 * c) : 0.0}};
  r.residual_norm = lin.residual_norm;
  r.n_points = lin.n_points;
  return r;
}

std::optional<double> deconvolve_intrinsic_t2(double t2_measured, double t1_population) {
  if (!(t2_measured > 0.0) || !(t1_population > 0.0))
    throw InvalidInput("deconvolve_intrinsic_t2: lifetimes must be > 0");
  if (t2_measured >= t1_population) return std::nullopt;
  return 1.0 / (1.0 / t2_measured - 1.0 / t1_population);
}

}  // namespace tmspin
