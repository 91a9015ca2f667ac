#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace ilvsep {

inline constexpr double kMetricCapDb = 200.0;

/// estimate = target + interference + artifacts, with a time-invariant gain per reference.
struct Decomposition {
  Eigen::VectorXd target;
  Eigen::VectorXd interference;
  Eigen::VectorXd artifacts;
};

/// Orthogonal projection of `estimate` on the target reference and on the span of
/// all references. Signals are trimmed to the shortest length.
Decomposition decompose(const Eigen::VectorXd& estimate, const std::vector<Eigen::VectorXd>& references,
                        int target);

struct Metrics {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

/// Energy ratios in dB, clamped to +/-200 dB (zero denominators give +200).
Metrics sdr_sir_sar(const Decomposition& d);

struct StemMatch {
  std::vector<int> reference_of;  ///< per estimate, -1 when spurious
  std::vector<int> spurious;      ///< unmatched estimate indices
  std::vector<int> missed;        ///< unmatched reference indices
};

/// Greedy maximum-SIR pairing, ties broken by SDR. Only the first `matchable`
/// references can be claimed; the rest act as interferers. Silent estimates are
/// always spurious.
StemMatch match_stems(const std::vector<Eigen::VectorXd>& estimates,
                      const std::vector<Eigen::VectorXd>& references,
                      std::size_t matchable = static_cast<std::size_t>(-1));

struct StemScore {
  std::string stem;
  std::string reference;
  int estimate_index = -1;
  int reference_index = -1;
  bool common = false;
  Metrics metrics;
};

struct EvalReport {
  std::vector<StemScore> rows;
  Metrics noncommon_mean;
  int noncommon_count = 0;
  std::vector<std::string> spurious;
  std::vector<std::string> missed;
};

struct NamedSignal {
  std::string name;
  Eigen::VectorXd signal;
};

/// Scores object stems against object references (matched greedily) and the
/// common stem against the common reference. Every reference, object and common,
/// spans the interference subspace.
EvalReport evaluate(const std::vector<NamedSignal>& object_estimates, const NamedSignal* common_estimate,
                    const std::vector<NamedSignal>& object_references, const NamedSignal* common_reference);

}  // namespace ilvsep
