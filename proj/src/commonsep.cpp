#include "ilvsep/commonsep.hpp"

#include "ilvsep/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace ilvsep {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;  // log(2 pi)

struct GmmState {
  Eigen::VectorXd weights, means, variances;
};

// E-step: fills responsibilities (n x k) and returns the weighted log-likelihood.
double expectation(std::span<const double> x, std::span<const double> w, const GmmState& s,
                   Eigen::MatrixXd& resp) {
  const int k = static_cast<int>(s.means.size());
  Eigen::VectorXd log_coef(k);
  for (int j = 0; j < k; ++j) {
    log_coef[j] = s.weights[j] > 0.0 ? std::log(s.weights[j]) - 0.5 * (kLogTwoPi + std::log(s.variances[j]))
                                     : -std::numeric_limits<double>::infinity();
  }
  double ll = 0.0;
  Eigen::VectorXd lp(k);
  for (std::size_t n = 0; n < x.size(); ++n) {
    double top = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      const double z = x[n] - s.means[j];
      lp[j] = log_coef[j] - 0.5 * z * z / s.variances[j];
      top = std::max(top, lp[j]);
    }
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      lp[j] = std::exp(lp[j] - top);
      acc += lp[j];
    }
    for (int j = 0; j < k; ++j) resp(static_cast<Eigen::Index>(n), j) = lp[j] / acc;
    ll += (w.empty() ? 1.0 : w[n]) * (top + std::log(acc));
  }
  return ll;
}

}  // namespace

Gmm1d fit_gmm1d(std::span<const double> samples, int k, std::span<const double> init_means,
                std::span<const double> sample_weights, const GmmOptions& options) {
  if (samples.empty()) throw Error("GMM fit needs at least one sample");
  if (k < 1) throw ConfigError("GMM needs at least one component");
  if (static_cast<int>(init_means.size()) != k) throw ConfigError("init_means length must equal k");
  if (!sample_weights.empty() && sample_weights.size() != samples.size()) {
    throw ConfigError("sample_weights length must match samples");
  }
  {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
    if (k > distinct) {
      throw Error("GMM k = " + std::to_string(k) + " exceeds distinct sample count " +
                  std::to_string(distinct));
    }
  }

  const auto weight_of = [&](std::size_t n) { return sample_weights.empty() ? 1.0 : sample_weights[n]; };
  double total_w = 0.0, mean = 0.0;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    total_w += weight_of(n);
    mean += weight_of(n) * samples[n];
  }
  if (!(total_w > 0.0)) throw Error("GMM sample weights sum to zero");
  mean /= total_w;
  double var = 0.0;
  for (std::size_t n = 0; n < samples.size(); ++n) var += weight_of(n) * (samples[n] - mean) * (samples[n] - mean);
  var /= total_w;

  GmmState s;
  s.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  s.means = Eigen::Map<const Eigen::VectorXd>(init_means.data(), k);
  s.variances = Eigen::VectorXd::Constant(k, std::max(var / k, options.variance_floor));

  const auto n_samples = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd resp(n_samples, k);
  Gmm1d out;
  double prev = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (;; ++it) {
    const double ll = expectation(samples, sample_weights, s, resp);
    out.log_likelihood_trace.push_back(ll);
    if (it > 0) {
      if (ll < prev - 1e-9 * std::max(1.0, std::abs(prev))) {
        throw Error("GMM log-likelihood decreased during EM");
      }
      if (std::abs(ll - prev) < options.rel_tol * std::max(std::abs(prev), 1e-300)) break;
    }
    prev = ll;
    if (it == options.max_iterations) break;

    for (int j = 0; j < k; ++j) {
      double nk = 0.0, sx = 0.0;
      for (Eigen::Index n = 0; n < n_samples; ++n) {
        const double r = weight_of(static_cast<std::size_t>(n)) * resp(n, j);
        nk += r;
        sx += r * samples[static_cast<std::size_t>(n)];
      }
      s.weights[j] = nk / total_w;
      if (nk <= 1e-300) continue;
      const double mu = sx / nk;
      double sxx = 0.0;
      for (Eigen::Index n = 0; n < n_samples; ++n) {
        const double z = samples[static_cast<std::size_t>(n)] - mu;
        sxx += weight_of(static_cast<std::size_t>(n)) * resp(n, j) * z * z;
      }
      s.means[j] = mu;
      s.variances[j] = std::max(sxx / nk, options.variance_floor);
    }
  }

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s.means[a] < s.means[b]; });
  out.weights.resize(k);
  out.means.resize(k);
  out.variances.resize(k);
  for (int j = 0; j < k; ++j) {
    out.weights[j] = s.weights[order[j]];
    out.means[j] = s.means[order[j]];
    out.variances[j] = s.variances[order[j]];
  }
  out.log_likelihood = out.log_likelihood_trace.back();
  out.iterations = it;
  return out;
}

double gmm_log_pdf(const Gmm1d& gmm, double x) {
  double top = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd lp(gmm.size());
  for (int j = 0; j < gmm.size(); ++j) {
    const double z = x - gmm.means[j];
    lp[j] = (gmm.weights[j] > 0.0 ? std::log(gmm.weights[j]) : -std::numeric_limits<double>::infinity()) -
            0.5 * (kLogTwoPi + std::log(gmm.variances[j])) - 0.5 * z * z / gmm.variances[j];
    top = std::max(top, lp[j]);
  }
  return top + std::log((lp.array() - top).exp().sum());
}

CommonBand detect_common_band(const Gmm1d& gmm, double d_sigma, const CommonGate& gate) {
  CommonBand band;
  if (gmm.size() == 0) return band;
  // The near-zero peak is rarely Gaussian; every leading component below the
  // gate is folded into one moment-matched component.
  int run = 1;
  if (gate.merge_near_zero) {
    while (run < gmm.size() && gmm.means[run] < gate.max_mean) ++run;
  }
  double w = 0.0, m1 = 0.0, m2 = 0.0;
  for (int j = 0; j < run; ++j) {
    w += gmm.weights[j];
    m1 += gmm.weights[j] * gmm.means[j];
    m2 += gmm.weights[j] * (gmm.variances[j] + gmm.means[j] * gmm.means[j]);
  }
  const double mean = w > 0.0 ? m1 / w : gmm.means[0];
  const double var = w > 0.0 ? std::max(m2 / w - mean * mean, gmm.variances[0]) : gmm.variances[0];
  band.mu_r = std::max(0.0, mean);
  band.d = d_sigma * std::sqrt(var);
  band.weight = w;
  band.components = run;
  band.present = gmm.means[0] < gate.max_mean && w > gate.min_weight;
  return band;
}

CommonPartition split_common(const TfTensor& tf, const ChannelLayout& layout, const IlvsField& field,
                             const CommonBand& band) {
  if (field.num_bins() != tf.num_bins() || field.num_frames() != tf.num_frames()) {
    throw Error("ILVS field and TF tensor dimensions differ");
  }
  CommonPartition part;
  part.common_mask = BoolGrid::Constant(tf.num_bins(), tf.num_frames(), false);
  if (band.present) {
    part.common_mask = (!field.silent) && ((field.r_value.array() - band.mu_r).abs() <= band.d);
  }
  for (int i = 0; i < layout.size(); ++i) {
    const Eigen::MatrixXd& x = tf.coeffs.at(static_cast<std::size_t>(layout.separable_indices[i]));
    part.common.push_back(part.common_mask.select(x, 0.0));
    part.noncommon.push_back(part.common_mask.select(0.0, x));
  }
  return part;
}

Eigen::MatrixXd average_common(const std::vector<Eigen::MatrixXd>& common) {
  if (common.empty()) throw Error("average_common needs at least one channel");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(common.front().rows(), common.front().cols());
  for (const auto& g : common) acc += g;
  return acc / static_cast<double>(common.size());
}

double rms(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return x.size() == 0 ? 0.0 : std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

CommonSubtraction subtract_common(const Eigen::Ref<const Eigen::MatrixXd>& x_org,
                                  const std::vector<Eigen::MatrixXd>& common,
                                  const Eigen::Ref<const Eigen::MatrixXd>& common_avg, int frame_len) {
  if (static_cast<Eigen::Index>(common.size()) != x_org.rows()) {
    throw Error("channel count of common grids and time signals differ");
  }
  const Eigen::Index length = x_org.cols();
  CommonSubtraction out;
  out.common_avg_time = mdct_synthesize(common_avg, frame_len, length);
  const double avg_rms = rms(out.common_avg_time);
  if (avg_rms < 1e-12) throw Error("no common energy");

  out.gains.resize(x_org.rows());
  out.noncommon_time.resize(x_org.rows(), length);
  for (Eigen::Index i = 0; i < x_org.rows(); ++i) {
    const Eigen::VectorXd channel_common = mdct_synthesize(common[static_cast<std::size_t>(i)], frame_len, length);
    out.gains[i] = rms(channel_common) / avg_rms;
    out.noncommon_time.row(i) = x_org.row(i) - out.gains[i] * out.common_avg_time.transpose();
  }
  return out;
}

}  // namespace ilvsep
