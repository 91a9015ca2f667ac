#include "ilvsep/vonmises.hpp"

#include "ilvsep/error.hpp"
#include "ilvsep/ilvs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace ilvsep {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kSeriesLimit = 20.0;
constexpr double kMaxArgument = 1e4;

double series_scaled(int order, double m) {
  const double q = 0.25 * m * m;
  double term = order == 0 ? 1.0 : 0.5 * m;
  double sum = term;
  for (int j = 1; j < 500; ++j) {
    term *= q / (static_cast<double>(j) * static_cast<double>(j + order));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum * std::exp(-m);
}

// sqrt(2 pi m) e^-m I_nu(m) ~ sum_k (-1)^k prod_{i=1..k} (4nu^2 - (2i-1)^2) / (k! (8m)^k)
double asymptotic_scaled(int order, double m) {
  const double mu = 4.0 * order * order;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (k * 8.0 * m);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * m);
}

double log_i0_scaled(double m) { return std::log(bessel_i_scaled(0, m)); }

// dA/dm = 1 - A/m - A^2
double a_derivative(double m, double a) {
  if (m < 1e-8) return 0.5;
  return 1.0 - a / m - a * a;
}

void check_angles(std::span<const double> angles, std::span<const double> weights) {
  if (!weights.empty() && weights.size() != angles.size()) {
    throw ConfigError("weights length must match angles");
  }
}

}  // namespace

double bessel_i_scaled(int order, double m) {
  if (order != 0 && order != 1) throw ConfigError("bessel order must be 0 or 1");
  if (!(m >= 0.0) || m > kMaxArgument) throw Error("bessel argument out of range [0, 1e4]");
  return m <= kSeriesLimit ? series_scaled(order, m) : asymptotic_scaled(order, m);
}

double bessel_i(int order, double m) { return bessel_i_scaled(order, m) * std::exp(m); }

double a_ratio(double m) {
  if (!(m >= 0.0)) throw Error("a_ratio argument must be non-negative");
  if (m == 0.0) return 0.0;
  return bessel_i_scaled(1, m) / bessel_i_scaled(0, m);
}

ConcentrationEstimate a_inverse(double x, double m_cap) {
  if (!(x > 0.0)) return {0.0, false};
  if (x >= a_ratio(m_cap)) return {m_cap, true};

  double m;
  if (x < 0.53) {
    m = 2.0 * x + x * x * x + 5.0 * std::pow(x, 5) / 6.0;
  } else if (x < 0.85) {
    m = -0.4 + 1.39 * x + 0.43 / (1.0 - x);
  } else {
    m = 1.0 / (x * x * x - 4.0 * x * x + 3.0 * x);
  }
  double lo = 0.0, hi = m_cap;
  m = std::clamp(m, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double a = a_ratio(m);
    const double f = a - x;
    if (f == 0.0) break;
    (f < 0.0 ? lo : hi) = m;
    double next = m - f / a_derivative(m, a);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - m) <= 1e-15 * std::max(1.0, m)) {
      m = next;
      break;
    }
    m = next;
  }
  return {m, false};
}

double vm_log_pdf(double theta, double theta0, double m) {
  if (!(m >= 0.0)) throw Error("von-Mises concentration must be non-negative");
  return m * (std::cos(theta - theta0) - 1.0) - kLogTwoPi - log_i0_scaled(m);
}

double vm_pdf(double theta, double theta0, double m) { return std::exp(vm_log_pdf(theta, theta0, m)); }

namespace {

struct ComponentCache {
  Eigen::VectorXd log_coef, cos_mu, sin_mu;
};

ComponentCache cache_for(const Eigen::VectorXd& weights, const Eigen::VectorXd& means,
                         const Eigen::VectorXd& conc) {
  const auto k = means.size();
  ComponentCache c{Eigen::VectorXd(k), Eigen::VectorXd(k), Eigen::VectorXd(k)};
  for (Eigen::Index j = 0; j < k; ++j) {
    c.log_coef[j] = weights[j] > 0.0 ? std::log(weights[j]) - kLogTwoPi - conc[j] - log_i0_scaled(conc[j])
                                     : -std::numeric_limits<double>::infinity();
    c.cos_mu[j] = std::cos(means[j]);
    c.sin_mu[j] = std::sin(means[j]);
  }
  return c;
}

// Fills resp (n x k) if non-null; returns the weighted log-likelihood.
double expectation(const Eigen::VectorXd& cos_t, const Eigen::VectorXd& sin_t, std::span<const double> w,
                   const Eigen::VectorXd& weights, const Eigen::VectorXd& means, const Eigen::VectorXd& conc,
                   Eigen::MatrixXd* resp) {
  const ComponentCache c = cache_for(weights, means, conc);
  const auto k = means.size();
  Eigen::VectorXd lp(k);
  double ll = 0.0;
  for (Eigen::Index n = 0; n < cos_t.size(); ++n) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) {
      lp[j] = c.log_coef[j] + conc[j] * (cos_t[n] * c.cos_mu[j] + sin_t[n] * c.sin_mu[j]);
      top = std::max(top, lp[j]);
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      lp[j] = std::exp(lp[j] - top);
      acc += lp[j];
    }
    if (resp != nullptr) {
      for (Eigen::Index j = 0; j < k; ++j) (*resp)(n, j) = lp[j] / acc;
    }
    ll += (w.empty() ? 1.0 : w[static_cast<std::size_t>(n)]) * (top + std::log(acc));
  }
  return ll;
}

}  // namespace

VonMisesMixture fit_vm_mixture(std::span<const double> angles, int components, std::uint64_t seed,
                               const VmOptions& options, std::span<const double> weights) {
  check_angles(angles, weights);
  if (components < 1) throw ConfigError("von-Mises mixture needs at least one component");
  if (angles.size() < static_cast<std::size_t>(10 * components)) {
    throw Error("too few samples for " + std::to_string(components) + " von-Mises components (need >= " +
                std::to_string(10 * components) + ", got " + std::to_string(angles.size()) + ")");
  }
  if (components > 1 && std::all_of(angles.begin(), angles.end(), [&](double a) { return a == angles[0]; })) {
    throw Error("all angles identical: cannot fit more than one von-Mises component");
  }
  if (!options.init_means.empty() && static_cast<int>(options.init_means.size()) != components) {
    throw ConfigError("init_means length must equal the component count");
  }

  const auto n = static_cast<Eigen::Index>(angles.size());
  Eigen::VectorXd cos_t(n), sin_t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cos_t[i] = std::cos(angles[static_cast<std::size_t>(i)]);
    sin_t[i] = std::sin(angles[static_cast<std::size_t>(i)]);
  }
  double total_w = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) total_w += weights.empty() ? 1.0 : weights[i];
  if (!(total_w > 0.0)) throw Error("von-Mises sample weights sum to zero");

  VonMisesMixture mix;
  mix.m_cap = options.m_cap;
  mix.weights = Eigen::VectorXd::Constant(components, 1.0 / components);
  mix.concentrations = Eigen::VectorXd::Constant(components, std::min(options.m_init, options.m_cap));
  mix.means.resize(components);
  mix.degenerate.assign(static_cast<std::size_t>(components), false);
  if (options.init_means.empty()) {
    std::mt19937_64 rng(seed);
    const double spacing = 2.0 * std::numbers::pi / components;
    const double offset = std::uniform_real_distribution<double>(0.0, spacing)(rng);
    for (int j = 0; j < components; ++j) mix.means[j] = wrap_angle(offset + j * spacing);
  } else {
    for (int j = 0; j < components; ++j) mix.means[j] = wrap_angle(options.init_means[static_cast<std::size_t>(j)]);
  }

  Eigen::MatrixXd resp(n, components);
  double prev = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (;; ++it) {
    const double ll = expectation(cos_t, sin_t, weights, mix.weights, mix.means, mix.concentrations, &resp);
    mix.log_likelihood_trace.push_back(ll);
    if (it > 0) {
      if (ll < prev - 1e-9 * std::max(1.0, std::abs(prev))) {
        throw Error("von-Mises EM log-likelihood decreased");
      }
      if (std::abs(ll - prev) < options.tol * std::max(std::abs(prev), 1e-300)) break;
    }
    prev = ll;
    if (it == options.max_iterations) break;

    for (int j = 0; j < components; ++j) {
      double nk = 0.0, c = 0.0, s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double r = (weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)]) * resp(i, j);
        nk += r;
        c += r * cos_t[i];
        s += r * sin_t[i];
      }
      const bool frozen = mix.weights[j] < options.drop_weight;
      mix.weights[j] = nk / total_w;
      if (frozen || nk <= 1e-300) continue;
      mix.means[j] = wrap_angle(std::atan2(s, c));
      const ConcentrationEstimate est = a_inverse(std::hypot(c, s) / nk, options.m_cap);
      mix.concentrations[j] = est.m;
      mix.degenerate[static_cast<std::size_t>(j)] = est.degenerate;
    }
  }
  mix.iterations = it;

  std::vector<int> keep;
  for (int j = 0; j < components; ++j) {
    if (mix.weights[j] >= options.drop_weight) keep.push_back(j);
  }
  mix.dropped = components - static_cast<int>(keep.size());
  if (keep.empty()) throw Error("every von-Mises component collapsed");
  if (mix.dropped > 0) {
    VonMisesMixture reduced;
    const auto k = static_cast<Eigen::Index>(keep.size());
    reduced.weights.resize(k);
    reduced.means.resize(k);
    reduced.concentrations.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      reduced.weights[j] = mix.weights[keep[static_cast<std::size_t>(j)]];
      reduced.means[j] = mix.means[keep[static_cast<std::size_t>(j)]];
      reduced.concentrations[j] = mix.concentrations[keep[static_cast<std::size_t>(j)]];
      reduced.degenerate.push_back(mix.degenerate[static_cast<std::size_t>(keep[static_cast<std::size_t>(j)])]);
    }
    reduced.weights /= reduced.weights.sum();
    reduced.m_cap = mix.m_cap;
    reduced.iterations = mix.iterations;
    reduced.dropped = mix.dropped;
    reduced.log_likelihood_trace = std::move(mix.log_likelihood_trace);
    mix = std::move(reduced);
    mix.log_likelihood =
        expectation(cos_t, sin_t, weights, mix.weights, mix.means, mix.concentrations, nullptr);
  } else {
    mix.log_likelihood = mix.log_likelihood_trace.back();
  }
  return mix;
}

Eigen::VectorXd vm_responsibilities(const VonMisesMixture& mixture, double theta) {
  Eigen::VectorXd lp(mixture.size());
  for (int j = 0; j < mixture.size(); ++j) {
    lp[j] = (mixture.weights[j] > 0.0 ? std::log(mixture.weights[j]) : -std::numeric_limits<double>::infinity()) +
            vm_log_pdf(theta, mixture.means[j], mixture.concentrations[j]);
  }
  const double top = lp.maxCoeff();
  Eigen::VectorXd r = (lp.array() - top).exp();
  return r / r.sum();
}

double vm_mixture_log_likelihood(const VonMisesMixture& mixture, std::span<const double> angles,
                                 std::span<const double> weights) {
  check_angles(angles, weights);
  const auto n = static_cast<Eigen::Index>(angles.size());
  Eigen::VectorXd cos_t(n), sin_t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cos_t[i] = std::cos(angles[static_cast<std::size_t>(i)]);
    sin_t[i] = std::sin(angles[static_cast<std::size_t>(i)]);
  }
  return expectation(cos_t, sin_t, weights, mixture.weights, mixture.means, mixture.concentrations, nullptr);
}

ModelOrderSelection select_model_order(std::span<const double> angles, int min_components,
                                       int max_components, std::uint64_t seed, const VmOptions& options,
                                       std::span<const double> weights) {
  if (min_components < 1 || max_components < min_components) {
    throw ConfigError("invalid component range for model order selection");
  }
  ModelOrderSelection sel;
  const double log_n = std::log(static_cast<double>(angles.size()));
  double best_bic = std::numeric_limits<double>::infinity();
  for (int m = min_components; m <= max_components; ++m) {
    VonMisesMixture fit = fit_vm_mixture(angles, m, seed, options, weights);
    const int p = 3 * fit.size() - 1;
    const double bic = -2.0 * fit.log_likelihood + p * log_n;
    sel.orders.push_back(m);
    sel.bic.push_back(bic);
    sel.fits.push_back(std::move(fit));
    if (bic < best_bic) {
      best_bic = bic;
      sel.best = m;
    }
  }
  return sel;
}

}  // namespace ilvsep
