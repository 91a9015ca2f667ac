#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace ilvsep {

/// Exponentially scaled modified Bessel function of the first kind,
/// exp(-m) * I_order(m), for order 0 or 1 and 0 <= m <= 1e4.
/// Power series below m = 20, Hankel asymptotic expansion above.
double bessel_i_scaled(int order, double m);

/// I_order(m). Overflows to +inf beyond m ~ 713; use bessel_i_scaled there.
double bessel_i(int order, double m);

/// Mean resultant length of a von-Mises distribution, A(m) = I1(m) / I0(m).
double a_ratio(double m);

inline constexpr double kDefaultConcentrationCap = 1e3;

struct ConcentrationEstimate {
  double m = 0.0;
  bool degenerate = false;  ///< x was at or beyond A(m_cap); m clamped to the cap
};

/// Solves A(m) = x for m with |A(m) - x| <= 1e-10. Best-Fisher seed refined by
/// bracketed Newton iterations.
ConcentrationEstimate a_inverse(double x, double m_cap = kDefaultConcentrationCap);

double vm_log_pdf(double theta, double theta0, double m);
double vm_pdf(double theta, double theta0, double m);

struct VonMisesMixture {
  Eigen::VectorXd weights;
  Eigen::VectorXd means;           ///< radians in [0, 2pi)
  Eigen::VectorXd concentrations;
  double log_likelihood = 0.0;
  double m_cap = kDefaultConcentrationCap;

  // fit diagnostics
  int iterations = 0;
  int dropped = 0;
  std::vector<bool> degenerate;
  std::vector<double> log_likelihood_trace;

  int size() const { return static_cast<int>(means.size()); }
};

struct VmOptions {
  int max_iterations = 300;
  double tol = 1e-6;
  double m_cap = kDefaultConcentrationCap;
  double m_init = 5.0;
  double drop_weight = 1e-4;
  /// Overrides the seeded equally spaced initialisation when non-empty.
  std::vector<double> init_means;
};

/// EM fit of an M-component von-Mises mixture to circular data. Optional
/// per-sample weights. Throws if the log-likelihood drops between iterations.
VonMisesMixture fit_vm_mixture(std::span<const double> angles, int components, std::uint64_t seed,
                               const VmOptions& options = {}, std::span<const double> weights = {});

/// Responsibility row for one angle (sums to 1).
Eigen::VectorXd vm_responsibilities(const VonMisesMixture& mixture, double theta);

double vm_mixture_log_likelihood(const VonMisesMixture& mixture, std::span<const double> angles,
                                 std::span<const double> weights = {});

struct ModelOrderSelection {
  int best = 0;
  std::vector<int> orders;
  std::vector<double> bic;
  std::vector<VonMisesMixture> fits;
};

/// Fits every M in [min_components, max_components] and keeps the one with the
/// lowest BIC = -2 logL + (3M - 1) ln n.
ModelOrderSelection select_model_order(std::span<const double> angles, int min_components,
                                       int max_components, std::uint64_t seed, const VmOptions& options = {},
                                       std::span<const double> weights = {});

}  // namespace ilvsep
