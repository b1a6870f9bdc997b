#include "eai/feature_store.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eai/binio.hpp"

namespace eai::feat {

namespace {

constexpr char kMagic[4] = {'E', 'A', 'I', 'F'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

const char* label_name(Label label) {
  return label == Label::bonafide ? "bonafide" : "spoof";
}

Label label_from_name(const std::string& name) {
  if (name == "bonafide") return Label::bonafide;
  if (name == "spoof") return Label::spoof;
  throw ValidationError("unknown label: " + name);
}

void FeatureBundle::validate() const {
  require(emo_frames.rows() >= 2, "T < 2: bundle needs at least two frames");
  require(emo_frames.cols() >= 1 && acu_frames.cols() >= 1, "empty feature dimension");
  require(acu_frames.rows() == emo_frames.rows(),
          "frame count mismatch between emotion and acoustic streams");
  require(emo_utt.size() == emo_frames.cols(),
          "utterance embedding dimension does not match emo_frames");
  const bool finite =
      emo_frames.allFinite() && emo_utt.allFinite() && acu_frames.allFinite();
  require(finite, "non-finite value in feature bundle");
}

void save_bundle(const FeatureBundle& bundle, const std::filesystem::path& path) {
  bundle.validate();
  require(bundle.id.size() <= 0xFFFF, "id longer than 65535 bytes");

  std::vector<std::uint8_t> buf;
  buf.reserve(32 + bundle.id.size() +
              8 * static_cast<std::size_t>(bundle.emo_frames.size() + bundle.emo_utt.size() +
                                           bundle.acu_frames.size()));
  for (char c : kMagic) binio::put_u8(buf, static_cast<std::uint8_t>(c));
  binio::put_u32(buf, kVersion);
  binio::put_u32(buf, static_cast<std::uint32_t>(bundle.frames()));
  binio::put_u32(buf, static_cast<std::uint32_t>(bundle.dim_emo()));
  binio::put_u32(buf, static_cast<std::uint32_t>(bundle.dim_acu()));
  binio::put_u8(buf, static_cast<std::uint8_t>(bundle.label));
  binio::put_u16(buf, static_cast<std::uint16_t>(bundle.id.size()));
  binio::put_bytes(buf, bundle.id);
  for (Eigen::Index t = 0; t < bundle.frames(); ++t)
    for (Eigen::Index j = 0; j < bundle.dim_emo(); ++j)
      binio::put_f64(buf, bundle.emo_frames(t, j));
  for (Eigen::Index j = 0; j < bundle.dim_emo(); ++j) binio::put_f64(buf, bundle.emo_utt(j));
  for (Eigen::Index t = 0; t < bundle.frames(); ++t)
    for (Eigen::Index j = 0; j < bundle.dim_acu(); ++j)
      binio::put_f64(buf, bundle.acu_frames(t, j));

  binio::write_file(path, buf);
}

FeatureBundle load_bundle(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = binio::read_file(path);
  binio::Reader r(bytes);

  const std::string magic = r.get_bytes(4);
  require(magic == std::string(kMagic, 4), "bad magic");
  const std::uint32_t version = r.get_u32();
  require(version == kVersion, "unsupported version: " + std::to_string(version));

  const std::uint32_t t_frames = r.get_u32();
  const std::uint32_t d_e = r.get_u32();
  const std::uint32_t d_a = r.get_u32();
  const std::uint8_t label_byte = r.get_u8();
  require(label_byte <= 1, "invalid label byte");
  const std::uint16_t id_len = r.get_u16();

  FeatureBundle bundle;
  bundle.id = r.get_bytes(id_len);
  bundle.label = static_cast<Label>(label_byte);
  require(t_frames >= 2, "T < 2: bundle needs at least two frames");
  require(d_e >= 1 && d_a >= 1, "empty feature dimension");

  bundle.emo_frames.resize(t_frames, d_e);
  for (std::uint32_t t = 0; t < t_frames; ++t)
    for (std::uint32_t j = 0; j < d_e; ++j) bundle.emo_frames(t, j) = r.get_f64();
  bundle.emo_utt.resize(d_e);
  for (std::uint32_t j = 0; j < d_e; ++j) bundle.emo_utt(j) = r.get_f64();
  bundle.acu_frames.resize(t_frames, d_a);
  for (std::uint32_t t = 0; t < t_frames; ++t)
    for (std::uint32_t j = 0; j < d_a; ++j) bundle.acu_frames(t, j) = r.get_f64();

  require(r.at_end(), "trailing data after payload");
  bundle.validate();
  return bundle;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest for write: " + path.string());
  for (const ManifestEntry& e : manifest.entries) {
    nlohmann::ordered_json line;
    line["id"] = e.id;
    line["path"] = e.path;
    line["label"] = label_name(e.label);
    out << line.dump() << "\n";
  }
  if (!out) throw IoError("write failure: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());

  DatasetManifest manifest;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    require(obj.is_object() && obj.contains("id") && obj.contains("path") &&
                obj.contains("label"),
            "manifest line " + std::to_string(line_no) + ": missing id/path/label");
    ManifestEntry entry;
    entry.id = obj.at("id").get<std::string>();
    entry.path = obj.at("path").get<std::string>();
    entry.label = label_from_name(obj.at("label").get<std::string>());
    require(seen.insert(entry.id).second, "duplicate id in manifest: " + entry.id);
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

std::vector<FeatureBundle> load_manifest(const std::filesystem::path& path) {
  const DatasetManifest manifest = read_manifest(path);
  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");
  std::vector<FeatureBundle> bundles;
  bundles.reserve(manifest.entries.size());
  for (const ManifestEntry& entry : manifest.entries) {
    std::filesystem::path bundle_path(entry.path);
    if (bundle_path.is_relative()) bundle_path = base / bundle_path;
    try {
      FeatureBundle bundle = load_bundle(bundle_path);
      require(bundle.id == entry.id,
              "id mismatch: file says '" + bundle.id + "'");
      require(bundle.label == entry.label, "label mismatch with manifest");
      bundles.push_back(std::move(bundle));
    } catch (const IoError& e) {
      throw IoError("bundle '" + entry.id + "': " + e.what());
    } catch (const std::exception& e) {
      throw ValidationError("bundle '" + entry.id + "': " + e.what());
    }
  }
  return bundles;
}

}  // namespace eai::feat
