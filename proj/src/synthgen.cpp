#include "eai/synthgen.hpp"

#include <cmath>
#include <string>

#include "eai/errors.hpp"

namespace eai::synth {

namespace {

// Gaussian random walk smoothed by a centered window-5 moving average
// (truncated at the ends), giving a slowly varying scalar trajectory.
Eigen::VectorXd smooth_latent(int T, Rng& rng) {
  Eigen::VectorXd walk(T);
  double z = 0.0;
  for (int t = 0; t < T; ++t) {
    z += rng.gaussian();
    walk(t) = z;
  }
  Eigen::VectorXd out(T);
  for (int t = 0; t < T; ++t) {
    const int lo = std::max(0, t - 2);
    const int hi = std::min(T - 1, t + 2);
    out(t) = walk.segment(lo, hi - lo + 1).mean();
  }
  return out;
}

Eigen::VectorXd random_map(int dim, Rng& rng) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.gaussian();
  return v;
}

// Reserved stream index for the dataset-level map draw; bundle streams use
// their global indices, which never reach this value.
constexpr uint64_t kMapStream = ~uint64_t{0};

// The projection maps play the role of fixed feature extractors: one draw per
// dataset seed, shared by every bundle, so alignment structure is learnable
// across the corpus.
struct SharedMaps {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
};

SharedMaps shared_maps(const SynthConfig& cfg) {
  Rng map_rng(derive_seed(cfg.map_seed, kMapStream));
  SharedMaps m;
  m.a = random_map(cfg.d_e, map_rng);
  m.b = random_map(cfg.d_a, map_rng);
  return m;
}

Eigen::MatrixXd project(const Eigen::VectorXd& latent, const Eigen::VectorXd& map) {
  return latent * map.transpose();  // T x dim
}

void add_noise(Eigen::MatrixXd& m, double sigma, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) += sigma * rng.gaussian();
    }
  }
}

Eigen::VectorXd utterance_embedding(const Eigen::MatrixXd& emo, double sigma, Rng& rng) {
  Eigen::VectorXd u = emo.colwise().mean();
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) += sigma * rng.gaussian();
  return u;
}

}  // namespace

void SynthConfig::validate() const {
  require(T >= 8, "synth config: T must be >= 8");
  require(d_e > 0 && d_a > 0, "synth config: feature dims must be positive");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0,
          "synth config: noise_sigma must be finite and >= 0");
  require(burst_rate >= 0.0 && burst_rate <= 1.0, "synth config: burst_rate outside [0, 1]");
  require(std::isfinite(burst_scale) && burst_scale > 0.0,
          "synth config: burst_scale must be finite and > 0");
}

feat::FeatureBundle gen_bonafide(const SynthConfig& cfg, Rng& rng, const std::string& id) {
  cfg.validate();
  const SharedMaps maps = shared_maps(cfg);
  const Eigen::VectorXd& a = maps.a;
  const Eigen::VectorXd& b = maps.b;
  const Eigen::VectorXd z = smooth_latent(cfg.T, rng);

  Eigen::MatrixXd emo = project(z, a);
  Eigen::MatrixXd acu = project(z, b);

  // Matched jumps: genuine emotional shifts enter both streams at the same
  // frame, so per-stream burst statistics match the spoof class and only the
  // cross-stream structure separates the labels.
  for (int t = 0; t < cfg.T; ++t) {
    if (!rng.bernoulli(cfg.burst_rate)) continue;
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    for (int u = t; u < cfg.T; ++u) {
      emo.row(u) += sign * cfg.burst_scale * a.transpose();
      acu.row(u) += sign * cfg.burst_scale * b.transpose();
    }
  }

  feat::FeatureBundle bundle;
  bundle.id = id;
  bundle.label = feat::Label::bonafide;
  bundle.emo_frames = std::move(emo);
  bundle.acu_frames = std::move(acu);
  add_noise(bundle.emo_frames, cfg.noise_sigma, rng);
  add_noise(bundle.acu_frames, cfg.noise_sigma, rng);
  bundle.emo_utt = utterance_embedding(bundle.emo_frames, cfg.noise_sigma, rng);
  bundle.validate();
  return bundle;
}

feat::FeatureBundle gen_spoof(const SynthConfig& cfg, Rng& rng, const std::string& id) {
  cfg.validate();
  const SharedMaps maps = shared_maps(cfg);
  const Eigen::VectorXd& a = maps.a;
  const Eigen::VectorXd& b = maps.b;
  const Eigen::VectorXd z_emo = smooth_latent(cfg.T, rng);
  const Eigen::VectorXd z_acu = smooth_latent(cfg.T, rng);

  Eigen::MatrixXd emo = project(z_emo, a);
  Eigen::MatrixXd acu = project(z_acu, b);

  // Unmatched jumps: a persistent step of +-burst_scale enters exactly one
  // stream at the trigger frame, applied after smoothing so the other stream
  // stays smooth across it.
  for (int t = 0; t < cfg.T; ++t) {
    if (!rng.bernoulli(cfg.burst_rate)) continue;
    const bool hit_emo = rng.bernoulli(0.5);
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    Eigen::MatrixXd& target = hit_emo ? emo : acu;
    const Eigen::VectorXd& dir = hit_emo ? a : b;
    for (int u = t; u < cfg.T; ++u) target.row(u) += sign * cfg.burst_scale * dir.transpose();
  }

  feat::FeatureBundle bundle;
  bundle.id = id;
  bundle.label = feat::Label::spoof;
  bundle.emo_frames = std::move(emo);
  bundle.acu_frames = std::move(acu);
  add_noise(bundle.emo_frames, cfg.noise_sigma, rng);
  add_noise(bundle.acu_frames, cfg.noise_sigma, rng);
  // The utterance-level embedding reports an emotional profile inconsistent
  // with the realized frames: an independent latent's mean along the same
  // extractor direction.
  const Eigen::VectorXd z_utt = smooth_latent(cfg.T, rng);
  bundle.emo_utt = a * z_utt.mean();
  for (Eigen::Index i = 0; i < bundle.emo_utt.size(); ++i) {
    bundle.emo_utt(i) += cfg.noise_sigma * rng.gaussian();
  }
  bundle.validate();
  return bundle;
}

feat::DatasetManifest gen_dataset(const SynthConfig& cfg, int n_bonafide, int n_spoof,
                                  const std::filesystem::path& out_dir) {
  cfg.validate();
  require(n_bonafide >= 0 && n_spoof >= 0, "gen_dataset: counts must be >= 0");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir.string());

  feat::DatasetManifest manifest;
  manifest.seed = cfg.seed;
  auto emit = [&](int global_index, feat::Label label) {
    const bool bona = label == feat::Label::bonafide;
    const int local = bona ? global_index : global_index - n_bonafide;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d", bona ? "bona" : "spoof", local);
    const std::string id(buf);
    Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(global_index)));
    const feat::FeatureBundle bundle =
        bona ? gen_bonafide(cfg, rng, id) : gen_spoof(cfg, rng, id);
    const std::string filename = id + ".eaif";
    feat::save_bundle(bundle, out_dir / filename);
    manifest.entries.push_back({id, filename, label});
  };
  for (int i = 0; i < n_bonafide; ++i) emit(i, feat::Label::bonafide);
  for (int i = 0; i < n_spoof; ++i) emit(n_bonafide + i, feat::Label::spoof);

  feat::save_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace eai::synth
