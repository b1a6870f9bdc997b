#include "eai/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eai/errors.hpp"
#include "eai/feature_store.hpp"
#include "eai/gradcheck.hpp"
#include "eai/metrics.hpp"
#include "eai/model.hpp"
#include "eai/synthgen.hpp"
#include "eai/train.hpp"

namespace eai::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kDefaultFarMarginAuto = -1;

int resolved_far_margin(int flag_value, int k) {
  if (flag_value >= 0) return flag_value;
  return std::max(2 * k + 1, 8);
}

// Dims must agree across the dataset; the model is sized from them.
void check_uniform_dims(const std::vector<feat::FeatureBundle>& bundles) {
  require(!bundles.empty(), "dataset is empty");
  const auto d_e = bundles.front().dim_emo();
  const auto d_a = bundles.front().dim_acu();
  for (const auto& b : bundles) {
    require(b.dim_emo() == d_e && b.dim_acu() == d_a,
            "bundle '" + b.id + "': feature dims differ from the rest of the dataset");
  }
}

metrics::ScoreSet score_all(const std::vector<feat::FeatureBundle>& bundles,
                            model::ModelParameters& params) {
  metrics::ScoreSet scores;
  scores.reserve(bundles.size());
  for (const auto& b : bundles) {
    scores.push_back({b.id, model::score(b, params), b.label});
  }
  return scores;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open output file: " + path.string());
  out << text;
  if (!out) throw IoError("failed writing output file: " + path.string());
}

struct SynthArgs {
  std::string out_dir;
  int num_bonafide = 100;
  int num_spoof = 100;
  synth::SynthConfig cfg;
};

int run_synth(const SynthArgs& a) {
  const feat::DatasetManifest manifest =
      synth::gen_dataset(a.cfg, a.num_bonafide, a.num_spoof, a.out_dir);
  std::printf("wrote %zu bundles to %s (manifest.jsonl)\n", manifest.entries.size(),
              a.out_dir.c_str());
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string checkpoint_out;
  train::TrainConfig cfg;
  int d_model = 32;
  int sinc_len = 17;
  int far_margin_flag = kDefaultFarMarginAuto;
  model::AblationFlags ablation;
};

int run_train(TrainArgs& a) {
  a.cfg.eval.far_margin = resolved_far_margin(a.far_margin_flag, a.cfg.eval.k);
  a.cfg.validate();
  const std::vector<feat::FeatureBundle> bundles = feat::load_manifest(a.manifest);
  check_uniform_dims(bundles);

  model::ModelConfig mcfg;
  mcfg.d_e = static_cast<int>(bundles.front().dim_emo());
  mcfg.d_a = static_cast<int>(bundles.front().dim_acu());
  mcfg.d_model = a.d_model;
  mcfg.sinc_len = a.sinc_len;
  mcfg.ablation = a.ablation;

  const train::TrainResult result = train::train(bundles, mcfg, a.cfg);
  for (size_t e = 0; e < result.epoch_means.size(); ++e) {
    const auto& m = result.epoch_means[e];
    std::printf("epoch %3zu  ce %.6f  eval %.6f  s %+.6f  total %.6f\n", e + 1, m.ce, m.eval,
                m.s, m.total);
  }
  model::ModelParameters params = result.params;
  model::save_checkpoint(params, a.checkpoint_out);
  std::printf("checkpoint written to %s\n", a.checkpoint_out.c_str());
  return 0;
}

struct EvalArgs {
  std::string manifest;
  std::string checkpoint;
  std::string metrics_out;
  std::string tdcf_params;
};

// Stderr so stdout stays a single parseable JSON document.
void print_default_provenance() {
  std::fprintf(
      stderr,
      "default provenance: protocol-sourced: epochs=60, learning-rate=1e-05, "
      "weight-decay=0.0001, k=3; implementation-chosen: d-model=32, sinc-len=17, tau=0.5, "
      "tau-nce=0.1, n-neg-far=4, n-neg-shuffle=4, far-margin=max(2k+1,8), accum=8\n");
}

int run_eval(const EvalArgs& a) {
  model::ModelParameters params = model::load_checkpoint(a.checkpoint);
  const std::vector<feat::FeatureBundle> bundles = feat::load_manifest(a.manifest);
  check_uniform_dims(bundles);
  require(static_cast<int>(bundles.front().dim_emo()) == params.config.d_e &&
              static_cast<int>(bundles.front().dim_acu()) == params.config.d_a,
          "dataset feature dims do not match the checkpoint");

  const metrics::ScoreSet scores = score_all(bundles, params);
  const metrics::EerResult eer = metrics::compute_eer(scores);

  int n_bona = 0;
  int n_spoof = 0;
  for (const auto& s : scores) {
    (s.label == feat::Label::bonafide ? n_bona : n_spoof) += 1;
  }

  nlohmann::ordered_json j;
  j["eer"] = eer.eer;
  j["eer_threshold"] = eer.threshold;
  if (!a.tdcf_params.empty()) {
    const metrics::TdcfParams tp = metrics::TdcfParams::from_json_file(a.tdcf_params);
    j["min_tdcf"] = metrics::compute_min_tdcf(scores, tp);
  }
  j["n_bonafide"] = n_bona;
  j["n_spoof"] = n_spoof;

  print_default_provenance();
  std::printf("%s\n", j.dump(2).c_str());
  if (!a.metrics_out.empty()) write_text_file(a.metrics_out, j.dump(2) + "\n");
  return 0;
}

struct AnalyzeArgs {
  std::string manifest;
  std::string out_dir;
};

int run_analyze(const AnalyzeArgs& a) {
  const std::vector<feat::FeatureBundle> bundles = feat::load_manifest(a.manifest);
  require(!bundles.empty(), "dataset is empty");
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + a.out_dir);

  for (const auto& b : bundles) {
    const Eigen::VectorXd ce = metrics::change_magnitude_curve(b.emo_frames);
    const Eigen::VectorXd ca = metrics::change_magnitude_curve(b.acu_frames);
    std::string csv = "frame_index,emo_change,acu_change\n";
    char line[96];
    for (Eigen::Index t = 0; t < ce.size(); ++t) {
      std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g\n", static_cast<long long>(t), ce(t),
                    ca(t));
      csv += line;
    }
    write_text_file(fs::path(a.out_dir) / (b.id + ".csv"), csv);
  }

  const metrics::InconsistencyReport rep = metrics::corpus_inconsistency_report(bundles);
  nlohmann::ordered_json j;
  auto stats_json = [](const std::optional<metrics::LabelStats>& s) -> nlohmann::ordered_json {
    if (!s) return nullptr;
    return {{"count", s->count}, {"mean_r", s->mean_r}, {"std_r", s->std_r}};
  };
  j["bonafide"] = stats_json(rep.bonafide);
  j["spoof"] = stats_json(rep.spoof);
  j["skipped"] = rep.skipped;
  write_text_file(fs::path(a.out_dir) / "summary.json", j.dump(2) + "\n");
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int run_gradcheck(uint64_t seed) {
  const gradcheck::SuiteResult suite = gradcheck::run_suite(seed);
  for (const auto& g : suite.groups) {
    std::printf("%-18s entries %4d  max rel err %.3e\n", g.name.c_str(), g.entries,
                g.max_rel_err);
  }
  std::printf("overall max rel err %.3e\n", suite.max_rel_err);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"emotion-acoustic inconsistency detector"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out-dir", synth_args.out_dir, "output directory")->required();
  synth->add_option("--num-bonafide", synth_args.num_bonafide, "bonafide bundle count")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--num-spoof", synth_args.num_spoof, "spoof bundle count")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_args.cfg.seed, "generator seed");
  synth->add_option("--frames", synth_args.cfg.T, "frames per bundle");
  synth->add_option("--d-emotion", synth_args.cfg.d_e, "emotion feature dim");
  synth->add_option("--d-acoustic", synth_args.cfg.d_a, "acoustic feature dim");
  synth->add_option("--noise-sigma", synth_args.cfg.noise_sigma, "observation noise scale");
  synth->add_option("--burst-rate", synth_args.cfg.burst_rate,
                    "per-frame probability of an unmatched jump (spoof)");
  synth->add_option("--burst-scale", synth_args.cfg.burst_scale, "jump magnitude (spoof)");
  synth->add_option("--map-seed", synth_args.cfg.map_seed,
                    "extractor-map seed (fixed across corpora by default)");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model and save a checkpoint");
  train->add_option("--manifest", train_args.manifest, "dataset manifest path")->required();
  train->add_option("--checkpoint-out", train_args.checkpoint_out, "checkpoint output path")
      ->required();
  train->add_option("--epochs", train_args.cfg.epochs, "training epochs");
  train->add_option("--learning-rate", train_args.cfg.learning_rate, "Adam learning rate");
  train->add_option("--weight-decay", train_args.cfg.weight_decay, "decoupled weight decay");
  train->add_option("--accum", train_args.cfg.accum, "utterances per optimizer step");
  train->add_option("--seed", train_args.cfg.seed, "training seed");
  train->add_option("--d-model", train_args.d_model, "model width");
  train->add_option("--sinc-len", train_args.sinc_len, "band-pass tap count (odd)");
  train->add_option("--k", train_args.cfg.eval.k, "prototype window radius");
  train->add_option("--tau", train_args.cfg.eval.tau, "prototype temperature");
  train->add_option("--tau-nce", train_args.cfg.eval.tau_nce, "contrastive temperature");
  train->add_option("--n-neg-far", train_args.cfg.eval.n_neg_far, "far negatives per anchor");
  train->add_option("--n-neg-shuffle", train_args.cfg.eval.n_neg_shuffle,
                    "shuffle negatives per anchor");
  train->add_option("--far-margin", train_args.far_margin_flag,
                    "minimum index distance of far negatives (default max(2k+1,8))");
  train->add_flag("--no-eaam", train_args.ablation.no_eaam,
                  "replace alignment module with plain projections");
  train->add_flag("--no-eval", train_args.ablation.no_eval,
                  "drop the contrastive term (weight 0, s frozen)");
  train->add_flag("--no-hig", train_args.ablation.no_hig,
                  "pool aligned frames directly to the classifier");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "score a dataset and report metrics");
  eval->add_option("--manifest", eval_args.manifest, "dataset manifest path")->required();
  eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint path")->required();
  eval->add_option("--metrics-out", eval_args.metrics_out, "metrics JSON output path");
  eval->add_option("--tdcf-params", eval_args.tdcf_params,
                   "tandem cost parameters JSON (enables min_tdcf)");

  AnalyzeArgs analyze_args;
  CLI::App* analyze = app.add_subcommand("analyze", "change-magnitude curves and correlations");
  analyze->add_option("--manifest", analyze_args.manifest, "dataset manifest path")->required();
  analyze->add_option("--out-dir", analyze_args.out_dir, "output directory")->required();

  uint64_t gradcheck_seed = 1;
  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "instance seed");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return run_synth(synth_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (analyze->parsed()) return run_analyze(analyze_args);
    if (gradcheck_cmd->parsed()) return run_gradcheck(gradcheck_seed);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace eai::cli
