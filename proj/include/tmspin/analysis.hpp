#ifndef TMSPIN_ANALYSIS_HPP
#define TMSPIN_ANALYSIS_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tmspin/types.hpp"

namespace tmspin {

struct FitParameter {
  std::string name;
  double value = 0.0;
  double std_error = 0.0;
};

struct FitResult {
  std::vector<FitParameter> parameters;
  double residual_norm = 0.0;
  int n_points = 0;

  double value_of(const std::string& name) const;
  double error_of(const std::string& name) const;
};

using Point = std::pair<double, double>;

// A * exp(-2 T / T2); parameters "A" and "T2"
FitResult fit_exp_decay(const std::vector<Point>& points);

// slope * x + intercept; parameters "slope" and "intercept"
FitResult fit_linear(const std::vector<Point>& points);

// width^2 = intercept^2 + slope^2 B^2, fitted as a line in (B^2, width^2);
// parameters "slope" (MHz/T) and "intercept" (MHz)
FitResult fit_quadrature_width(const std::vector<Point>& points);

// (1/t2 - 1/t1)^-1, or nullopt when t2 >= t1 (no finite intrinsic lifetime)
std::optional<double> deconvolve_intrinsic_t2(double t2_measured, double t1_population);

}  // namespace tmspin

#endif
