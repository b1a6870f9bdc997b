#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eai/feature_store.hpp"

namespace eai::metrics {

struct ScoreEntry {
  std::string id;
  double score = 0.0;  // higher means more bonafide
  feat::Label label = feat::Label::bonafide;
};

using ScoreSet = std::vector<ScoreEntry>;

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Equal error rate over the full threshold sweep (midpoints between adjacent
// sorted scores plus finite below-min/above-max sentinels). P_miss(th) =
// fraction of bonafide with score < th, P_fa(th) = fraction of spoof with
// score >= th. The crossing is linearly interpolated between the two adjacent
// operating points where the sign of (P_miss - P_fa) flips; ties resolve
// toward the lower threshold. The returned threshold is always finite.
EerResult compute_eer(const ScoreSet& scores);

// Tandem DCF cost model. All constants are caller-supplied; there are no
// built-in defaults.
struct TdcfParams {
  double p_target = 0.0;
  double p_nontarget = 0.0;
  double p_spoof = 0.0;
  double c_miss_cm = 0.0;
  double c_fa_cm = 0.0;
  double c_miss_asv = 0.0;
  double c_fa_asv = 0.0;
  double p_fa_asv = 0.0;
  double p_miss_asv = 0.0;
  double p_miss_spoof_asv = 0.0;

  void validate() const;
  static TdcfParams from_json_file(const std::filesystem::path& path);
};

// Minimum normalized tandem DCF over the same threshold sweep as compute_eer:
//   t-DCF(th) = C1 * P_miss_cm(th) + C2 * P_fa_cm(th), normalized by min(C1, C2).
double compute_min_tdcf(const ScoreSet& scores, const TdcfParams& params);

// Per-frame L2 change magnitudes of consecutive rows, min-max normalized to
// [0, 1]; a constant-magnitude curve maps to all zeros.
Eigen::VectorXd change_magnitude_curve(const Eigen::MatrixXd& frames);

// Sample Pearson correlation; throws ValidationError on n < 2 or constant
// input ("undefined correlation").
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct LabelStats {
  int count = 0;
  double mean_r = 0.0;
  double std_r = 0.0;  // population standard deviation
};

struct InconsistencyReport {
  std::optional<LabelStats> bonafide;
  std::optional<LabelStats> spoof;
  int skipped = 0;  // bundles with a degenerate (constant) change curve
};

// Per-bundle Pearson correlation between the two normalized change-magnitude
// curves, aggregated per label.
InconsistencyReport corpus_inconsistency_report(const std::vector<feat::FeatureBundle>& bundles);

}  // namespace eai::metrics
