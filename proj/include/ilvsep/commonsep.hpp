#pragma once

#include "ilvsep/ilvs.hpp"
#include "ilvsep/transform.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace ilvsep {

/// One-dimensional Gaussian mixture, components sorted by ascending mean.
struct Gmm1d {
  Eigen::VectorXd weights;
  Eigen::VectorXd means;
  Eigen::VectorXd variances;
  double log_likelihood = 0.0;
  int iterations = 0;
  std::vector<double> log_likelihood_trace;

  int size() const { return static_cast<int>(means.size()); }
};

struct GmmOptions {
  int max_iterations = 200;
  double rel_tol = 1e-6;
  double variance_floor = 1e-8;
};

/// EM fit of a k-component 1-D GMM. `sample_weights` (optional, same length as
/// `samples`) turns the fit into a weighted one. Throws if the log-likelihood
/// ever decreases.
Gmm1d fit_gmm1d(std::span<const double> samples, int k, std::span<const double> init_means,
                std::span<const double> sample_weights = {}, const GmmOptions& options = {});

/// Log-density of the mixture at x.
double gmm_log_pdf(const Gmm1d& gmm, double x);

struct CommonGate {
  double max_mean = 0.25;
  double min_weight = 0.02;
  /// Fold all leading components with mean below max_mean into the band.
  bool merge_near_zero = true;
};

/// Decision band |R - mu_r| <= d around the leftmost GMM peak.
struct CommonBand {
  double mu_r = 0.0;
  double d = 0.0;
  double weight = 0.0;
  int components = 0;  ///< GMM components folded into the band
  bool present = false;
};

CommonBand detect_common_band(const Gmm1d& gmm, double d_sigma, const CommonGate& gate = {});

/// Grids restricted to the separable channels, in layout order.
struct CommonPartition {
  std::vector<Eigen::MatrixXd> common;
  std::vector<Eigen::MatrixXd> noncommon;
  BoolGrid common_mask;
};

/// Hard per-bin partition: a non-silent bin whose R falls inside the band moves to
/// `common` on every channel, every other bin stays in `noncommon`.
CommonPartition split_common(const TfTensor& tf, const ChannelLayout& layout, const IlvsField& field,
                             const CommonBand& band);

/// Elementwise mean across channels.
Eigen::MatrixXd average_common(const std::vector<Eigen::MatrixXd>& common);

struct CommonSubtraction {
  Eigen::MatrixXd noncommon_time;   ///< one row per separable channel
  Eigen::VectorXd common_avg_time;
  Eigen::VectorXd gains;            ///< RMS(x_c,i) / RMS(x_c,avg)
};

/// Time-domain removal x_n,i = x_org,i - gain_i * x_c,avg.
/// `x_org` holds one row per separable channel.
CommonSubtraction subtract_common(const Eigen::Ref<const Eigen::MatrixXd>& x_org,
                                  const std::vector<Eigen::MatrixXd>& common,
                                  const Eigen::Ref<const Eigen::MatrixXd>& common_avg, int frame_len);

double rms(const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace ilvsep
