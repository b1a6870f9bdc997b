#pragma once

#include <cstdint>
#include <filesystem>

#include "eai/feature_store.hpp"
#include "eai/rng.hpp"

namespace eai::synth {

// Generator settings for desk-scale synthetic bundles. Bonafide bundles drive
// both feature streams from one shared smooth latent; spoof bundles use two
// independent latents plus occasional one-sided bursts. The latent-to-feature
// maps act as fixed extractors: drawn once per dataset seed and shared by
// every bundle.
struct SynthConfig {
  int T = 64;
  int d_e = 16;
  int d_a = 16;
  double noise_sigma = 0.4;
  double burst_rate = 0.15;   // per-frame probability of an unmatched jump (spoof only)
  double burst_scale = 1.0;
  uint64_t seed = 1;
  // Extractor-map seed, independent of `seed` so fresh corpora (new seed)
  // share the same feature geometry by default.
  uint64_t map_seed = 1;

  void validate() const;
};

feat::FeatureBundle gen_bonafide(const SynthConfig& cfg, Rng& rng, const std::string& id);
feat::FeatureBundle gen_spoof(const SynthConfig& cfg, Rng& rng, const std::string& id);

// Writes n_bonafide + n_spoof EAIF files plus manifest.jsonl into out_dir and
// returns the manifest. Bundle i gets rng seed derive_seed(cfg.seed, i) with
// bonafide occupying the first n_bonafide indices, so regeneration is
// byte-identical and bundles are independent of generation order.
feat::DatasetManifest gen_dataset(const SynthConfig& cfg, int n_bonafide, int n_spoof,
                                  const std::filesystem::path& out_dir);

}  // namespace eai::synth
