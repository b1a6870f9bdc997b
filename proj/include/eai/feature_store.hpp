#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eai/errors.hpp"

namespace eai::feat {

enum class Label : std::uint8_t { bonafide = 0, spoof = 1 };

const char* label_name(Label label);
Label label_from_name(const std::string& name);

// One utterance worth of precomputed features. Immutable value object; all
// pipeline stages treat it as read-only.
struct FeatureBundle {
  std::string id;
  Eigen::MatrixXd emo_frames;  // T x d_e, frame-level emotion embeddings
  Eigen::VectorXd emo_utt;     // d_e, utterance-level emotion embedding
  Eigen::MatrixXd acu_frames;  // T x d_a, frame-level acoustic embeddings
  Label label = Label::bonafide;

  Eigen::Index frames() const { return emo_frames.rows(); }
  Eigen::Index dim_emo() const { return emo_frames.cols(); }
  Eigen::Index dim_acu() const { return acu_frames.cols(); }

  // Throws ValidationError: T < 2, non-finite values, shape inconsistencies.
  void validate() const;
};

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the manifest file's directory
  Label label = Label::bonafide;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  // Generation seed; 0 for externally produced data. Not persisted in the
  // manifest file, which carries only the per-bundle records.
  std::uint64_t seed = 0;
};

// EAIF container, little-endian:
//   magic "EAIF", version u32=1, T u32, d_e u32, d_a u32, label u8,
//   id length u16 + UTF-8 id bytes, emo_frames row-major (T*d_e f64),
//   emo_utt (d_e f64), acu_frames row-major (T*d_a f64).
void save_bundle(const FeatureBundle& bundle, const std::filesystem::path& path);
FeatureBundle load_bundle(const std::filesystem::path& path);

// Manifest: JSON lines, one {"id":..., "path":..., "label":...} per bundle.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Loads every bundle in manifest order; any member failure aborts with the
// offending id in the message.
std::vector<FeatureBundle> load_manifest(const std::filesystem::path& path);

}  // namespace eai::feat
