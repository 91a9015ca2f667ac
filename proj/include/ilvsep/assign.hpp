#pragma once

#include "ilvsep/ilvs.hpp"
#include "ilvsep/vonmises.hpp"
#include "ilvsep/wavio.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ilvsep {

/// Which separable channels are summed to rebuild one source.
/// Channel numbers are positions in ChannelLayout::separable_indices.
struct ChannelSumRule {
  enum class Kind { Single, Pair, Triple };
  Kind kind = Kind::Single;
  std::vector<int> channels;

  std::string to_string() const;
  friend bool operator==(const ChannelSumRule&, const ChannelSumRule&) = default;
};

ChannelSumRule single_rule(int i, const ChannelLayout& layout);
ChannelSumRule pair_rule(int i, const ChannelLayout& layout);    ///< (i, i+1)
ChannelSumRule triple_rule(int i, const ChannelLayout& layout);  ///< (i-1, i, i+1)

struct AssignOptions {
  double axis_tol = -1.0;      ///< negative: theta_v / 8
  double r_single_tol = -1.0;  ///< negative: halfway between the single and triple ideal R
  double merge_tol = -1.0;     ///< negative: theta_v / 4
};

/// Fills every negative tolerance with its layout default.
AssignOptions resolve(const AssignOptions& options, const ChannelLayout& layout);

/// On-axis components become single(i) when R is close to 1 and triple(i-1, i, i+1)
/// otherwise; off-axis components become the pair of axes bracketing the angle.
ChannelSumRule rule_for_component(double mean_angle, double mean_r, const ChannelLayout& layout,
                                  double axis_tol, double r_single_tol);

struct ComponentAssignment {
  double mean_angle = 0.0;
  double mean_r = 0.0;
  double weight = 0.0;
  double responsibility_mass = 0.0;
  Eigen::Index bin_count = 0;
  ChannelSumRule rule;
};

struct AssignmentMap {
  Eigen::MatrixXi component;  ///< per bin, -1 when unassigned
  std::vector<ComponentAssignment> components;
};

/// Routes every eligible, non-silent bin with a defined direction to its most
/// responsible component (ties go to the lowest index). A component's mean R is
/// weighted by responsibility times bin energy (squared loudness sum) so that
/// faint leakage bins do not dominate it. Rules are left empty.
AssignmentMap assign_bins(const IlvsField& field, const VonMisesMixture& mixture, const BoolGrid& eligible);

/// Derives each component's rule, merges components that share a rule and sit
/// within merge_tol of each other, and drops components left without bins.
void attach_rules(AssignmentMap& map, const ChannelLayout& layout, const AssignOptions& options);

/// S_k(f, t) = sum over the rule's channels of the non-common coefficients at bins
/// assigned to k; returns the synthesized mono stems.
std::vector<Eigen::VectorXd> reconstruct_sources(const std::vector<Eigen::MatrixXd>& noncommon,
                                                 const AssignmentMap& map, int frame_len,
                                                 Eigen::Index length);

/// The masked TF grid of one source, before synthesis.
Eigen::MatrixXd source_grid(const std::vector<Eigen::MatrixXd>& noncommon, const AssignmentMap& map, int k);

}  // namespace ilvsep
