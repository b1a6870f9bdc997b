#include "eai/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "eai/errors.hpp"

namespace eai::metrics {

namespace {

// Candidate thresholds: min-1, midpoints between consecutive distinct sorted
// scores, max+1. Every achievable (P_miss, P_fa) operating point appears
// exactly once in this sweep; the finite sentinels realize the same rates as
// -inf/+inf while keeping interpolated thresholds finite under heavy ties.
std::vector<double> candidate_thresholds(const ScoreSet& scores) {
  std::vector<double> s;
  s.reserve(scores.size());
  for (const auto& e : scores) s.push_back(e.score);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());

  std::vector<double> th;
  th.reserve(s.size() + 1);
  th.push_back(s.front() - 1.0);
  for (size_t i = 0; i + 1 < s.size(); ++i) th.push_back(0.5 * (s[i] + s[i + 1]));
  th.push_back(s.back() + 1.0);
  return th;
}

struct Rates {
  double p_miss = 0.0;
  double p_fa = 0.0;
};

Rates rates_at(const ScoreSet& scores, double th, int n_bona, int n_spoof) {
  int miss = 0;
  int fa = 0;
  for (const auto& e : scores) {
    if (e.label == feat::Label::bonafide) {
      if (e.score < th) ++miss;
    } else {
      if (e.score >= th) ++fa;
    }
  }
  return {static_cast<double>(miss) / n_bona, static_cast<double>(fa) / n_spoof};
}

void count_labels(const ScoreSet& scores, int& n_bona, int& n_spoof) {
  n_bona = 0;
  n_spoof = 0;
  for (const auto& e : scores) {
    if (e.label == feat::Label::bonafide) {
      ++n_bona;
    } else {
      ++n_spoof;
    }
  }
  require(n_bona > 0 && n_spoof > 0, "score set needs at least one bonafide and one spoof entry");
  for (const auto& e : scores) {
    require(std::isfinite(e.score), "non-finite score for id '" + e.id + "'");
  }
}

}  // namespace

EerResult compute_eer(const ScoreSet& scores) {
  int n_bona = 0;
  int n_spoof = 0;
  count_labels(scores, n_bona, n_spoof);

  const auto ths = candidate_thresholds(scores);

  // d(th) = P_miss - P_fa is nondecreasing in th, from -1 at the bottom
  // sentinel to +1 at the top. Find the first candidate with d >= 0 and
  // interpolate back to the exact crossing against the previous candidate.
  double prev_th = 0.0;
  Rates prev{};
  bool have_prev = false;
  for (double th : ths) {
    const Rates r = rates_at(scores, th, n_bona, n_spoof);
    const double d = r.p_miss - r.p_fa;
    if (d >= 0.0) {
      if (d == 0.0 || !have_prev) {
        return {r.p_miss, th};
      }
      const double d0 = prev.p_miss - prev.p_fa;  // < 0 here
      const double t = -d0 / (d - d0);
      return {prev.p_miss + t * (r.p_miss - prev.p_miss), prev_th + t * (th - prev_th)};
    }
    prev_th = th;
    prev = r;
    have_prev = true;
  }
  // d = +1 at the top sentinel, so the loop always returns.
  throw std::logic_error("eer sweep failed to cross zero");
}

void TdcfParams::validate() const {
  const double priors[] = {p_target, p_nontarget, p_spoof};
  for (double p : priors) require(p >= 0.0 && p <= 1.0, "tdcf prior outside [0, 1]");
  require(std::abs(p_target + p_nontarget + p_spoof - 1.0) <= 1e-9,
          "tdcf priors must sum to 1");
  const double costs[] = {c_miss_cm, c_fa_cm, c_miss_asv, c_fa_asv};
  for (double c : costs) require(c >= 0.0, "tdcf cost must be nonnegative");
  const double asv_rates[] = {p_fa_asv, p_miss_asv, p_miss_spoof_asv};
  for (double r : asv_rates) require(r >= 0.0 && r <= 1.0, "tdcf asv rate outside [0, 1]");
}

TdcfParams TdcfParams::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tdcf params file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("tdcf params: invalid JSON: " + std::string(e.what()));
  }
  TdcfParams p;
  auto get = [&](const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("tdcf params: missing key '") + key + "'");
    if (!j[key].is_number()) throw ValidationError(std::string("tdcf params: key '") + key + "' is not a number");
    return j[key].get<double>();
  };
  p.p_target = get("p_target");
  p.p_nontarget = get("p_nontarget");
  p.p_spoof = get("p_spoof");
  p.c_miss_cm = get("c_miss_cm");
  p.c_fa_cm = get("c_fa_cm");
  p.c_miss_asv = get("c_miss_asv");
  p.c_fa_asv = get("c_fa_asv");
  p.p_fa_asv = get("p_fa_asv");
  p.p_miss_asv = get("p_miss_asv");
  p.p_miss_spoof_asv = get("p_miss_spoof_asv");
  p.validate();
  return p;
}

double compute_min_tdcf(const ScoreSet& scores, const TdcfParams& params) {
  params.validate();
  int n_bona = 0;
  int n_spoof = 0;
  count_labels(scores, n_bona, n_spoof);

  const double c1 = params.p_target * (params.c_miss_cm - params.c_miss_asv * params.p_miss_asv) -
                    params.p_nontarget * params.c_fa_asv * params.p_fa_asv;
  const double c2 = params.c_fa_cm * params.p_spoof * (1.0 - params.p_miss_spoof_asv);
  require(std::min(c1, c2) > 0.0, "tdcf cost coefficients must be positive (check asv operating point)");

  double best = std::numeric_limits<double>::infinity();
  for (double th : candidate_thresholds(scores)) {
    const Rates r = rates_at(scores, th, n_bona, n_spoof);
    best = std::min(best, (c1 * r.p_miss + c2 * r.p_fa) / std::min(c1, c2));
  }
  return best;
}

Eigen::VectorXd change_magnitude_curve(const Eigen::MatrixXd& frames) {
  require(frames.rows() >= 2, "change curve needs at least two frames");
  const Eigen::Index n = frames.rows() - 1;
  Eigen::VectorXd mag(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    mag(t) = (frames.row(t + 1) - frames.row(t)).norm();
  }
  const double lo = mag.minCoeff();
  const double hi = mag.maxCoeff();
  if (hi - lo <= 0.0) return Eigen::VectorXd::Zero(n);
  return (mag.array() - lo) / (hi - lo);
}

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  require(x.size() == y.size(), "pearson inputs differ in length");
  const Eigen::Index n = x.size();
  require(n >= 2, "pearson needs at least two points");
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx;
  const Eigen::ArrayXd dy = y.array() - my;
  const double sxx = (dx * dx).sum();
  const double syy = (dy * dy).sum();
  require(sxx > 0.0 && syy > 0.0, "undefined correlation: constant input");
  return (dx * dy).sum() / std::sqrt(sxx * syy);
}

InconsistencyReport corpus_inconsistency_report(const std::vector<feat::FeatureBundle>& bundles) {
  std::vector<double> r_bona;
  std::vector<double> r_spoof;
  InconsistencyReport rep;
  for (const auto& b : bundles) {
    b.validate();
    const Eigen::VectorXd ce = change_magnitude_curve(b.emo_frames);
    const Eigen::VectorXd ca = change_magnitude_curve(b.acu_frames);
    if (ce.maxCoeff() <= 0.0 || ca.maxCoeff() <= 0.0) {
      ++rep.skipped;  // constant curve, correlation undefined
      continue;
    }
    const double r = pearson(ce, ca);
    (b.label == feat::Label::bonafide ? r_bona : r_spoof).push_back(r);
  }
  auto stats = [](const std::vector<double>& rs) -> std::optional<LabelStats> {
    if (rs.empty()) return std::nullopt;
    LabelStats s;
    s.count = static_cast<int>(rs.size());
    double sum = 0.0;
    for (double r : rs) sum += r;
    s.mean_r = sum / s.count;
    double ss = 0.0;
    for (double r : rs) ss += (r - s.mean_r) * (r - s.mean_r);
    s.std_r = std::sqrt(ss / s.count);
    return s;
  };
  rep.bonafide = stats(r_bona);
  rep.spoof = stats(r_spoof);
  return rep;
}

}  // namespace eai::metrics
