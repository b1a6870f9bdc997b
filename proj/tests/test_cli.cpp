#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eai/cli.hpp"
#include "eai/model.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("eai");
  for (const auto& a : args) argv.push_back(a.c_str());
  return eai::cli::run(static_cast<int>(argv.size()), argv.data());
}

// Redirects fd 1 into a file for the scope; the CLI prints results to stdout.
class StdoutCapture {
 public:
  explicit StdoutCapture(const fs::path& target) {
    std::fflush(stdout);
    saved_ = dup(1);
    FILE* f = std::fopen(target.c_str(), "w");
    REQUIRE(f != nullptr);
    dup2(fileno(f), 1);
    std::fclose(f);
  }
  ~StdoutCapture() {
    std::fflush(stdout);
    dup2(saved_, 1);
    close(saved_);
  }

 private:
  int saved_ = -1;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "eai_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n' ? 1 : 0;
  return n;
}

// 8+8 bundles of 12 frames with 4/5-dim features, built once per process.
fs::path ensure_data() {
  const fs::path data = work_dir() / "data";
  if (!fs::exists(data / "manifest.jsonl")) {
    StdoutCapture cap(work_dir() / "synth_log.txt");
    REQUIRE(run_cli({"synth", "--out-dir", data.string(), "--num-bonafide", "8", "--num-spoof",
                     "8", "--seed", "3", "--frames", "12", "--d-emotion", "4", "--d-acoustic",
                     "5"}) == 0);
  }
  return data;
}

}  // namespace

TEST_CASE("usage and error exit codes") {
  const fs::path null_out = work_dir() / "help.txt";
  {
    StdoutCapture cap(null_out);
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"synth", "--help"}) == 0);
  }
  CHECK(slurp(null_out).find("synth") != std::string::npos);

  CHECK(run_cli({}) == 1);                              // subcommand required
  CHECK(run_cli({"frobnicate"}) == 1);                  // unknown subcommand
  CHECK(run_cli({"synth", "--bogus-flag", "1"}) == 1);  // unknown flag
  CHECK(run_cli({"train"}) == 1);                       // missing required options
  CHECK(run_cli({"eval", "--manifest", (work_dir() / "absent.jsonl").string(), "--checkpoint",
                 (work_dir() / "absent.bin").string()}) == 2);  // I/O failure
}

TEST_CASE("synth, train, eval, analyze pipeline") {
  const fs::path data = ensure_data();
  const fs::path held = work_dir() / "held";
  const fs::path ckpt = work_dir() / "model.bin";
  const fs::path log = work_dir() / "log.txt";

  {
    StdoutCapture cap(log);
    CHECK(run_cli({"synth", "--out-dir", held.string(), "--num-bonafide", "5", "--num-spoof",
                   "5", "--seed", "4", "--frames", "12", "--d-emotion", "4", "--d-acoustic",
                   "5"}) == 0);
  }
  CHECK(fs::exists(data / "manifest.jsonl"));
  CHECK(fs::exists(data / "bona_0007.eaif"));
  CHECK(fs::exists(data / "spoof_0007.eaif"));

  {
    StdoutCapture cap(log);
    CHECK(run_cli({"train", "--manifest", (data / "manifest.jsonl").string(),
                   "--checkpoint-out", ckpt.string(), "--epochs", "2", "--learning-rate",
                   "1e-3", "--accum", "4", "--seed", "1", "--d-model", "4", "--sinc-len", "9",
                   "--k", "1"}) == 0);
  }
  const std::string train_log = slurp(log);
  CHECK(train_log.find("epoch   1") != std::string::npos);
  CHECK(train_log.find("epoch   2") != std::string::npos);
  CHECK(train_log.find("checkpoint written") != std::string::npos);
  REQUIRE(fs::exists(ckpt));
  eai::model::ModelParameters params = eai::model::load_checkpoint(ckpt);
  CHECK(params.config.d_e == 4);
  CHECK(params.config.d_a == 5);
  CHECK(params.config.d_model == 4);

  // Eval without tandem costs: stdout is one JSON document, keys in order.
  const fs::path eval_out = work_dir() / "eval_stdout.txt";
  const fs::path metrics = work_dir() / "metrics.json";
  {
    StdoutCapture cap(eval_out);
    CHECK(run_cli({"eval", "--manifest", (held / "manifest.jsonl").string(), "--checkpoint",
                   ckpt.string(), "--metrics-out", metrics.string()}) == 0);
  }
  const std::string eval_stdout = slurp(eval_out);
  const nlohmann::json j = nlohmann::json::parse(eval_stdout);
  CHECK(eval_stdout.find("\"eer\"") < eval_stdout.find("\"eer_threshold\""));
  CHECK(j["eer"].get<double>() >= 0.0);
  CHECK(j["eer"].get<double>() <= 1.0);
  CHECK(std::isfinite(j["eer_threshold"].get<double>()));
  CHECK(j["n_bonafide"].get<int>() == 5);
  CHECK(j["n_spoof"].get<int>() == 5);
  CHECK_FALSE(j.contains("min_tdcf"));
  CHECK(nlohmann::json::parse(slurp(metrics)) == j);

  // With tandem costs the metrics gain a min_tdcf entry.
  const fs::path tdcf = work_dir() / "tdcf.json";
  {
    std::ofstream out(tdcf);
    out << R"({"p_target": 0.9405, "p_nontarget": 0.0095, "p_spoof": 0.05,
               "c_miss_asv": 1.0, "c_fa_asv": 10.0, "c_miss_cm": 1.0, "c_fa_cm": 10.0,
               "p_miss_asv": 0.01, "p_fa_asv": 0.01, "p_miss_spoof_asv": 0.5})";
  }
  {
    StdoutCapture cap(eval_out);
    CHECK(run_cli({"eval", "--manifest", (held / "manifest.jsonl").string(), "--checkpoint",
                   ckpt.string(), "--tdcf-params", tdcf.string()}) == 0);
  }
  const nlohmann::json j2 = nlohmann::json::parse(slurp(eval_out));
  REQUIRE(j2.contains("min_tdcf"));
  CHECK(j2["min_tdcf"].get<double>() >= 0.0);
  CHECK(j2["min_tdcf"].get<double>() <= 1.0 + 1e-12);
  CHECK(j2["eer"] == j["eer"]);

  // Analyze writes one curve per bundle plus a summary.
  const fs::path analysis = work_dir() / "analysis";
  {
    StdoutCapture cap(log);
    CHECK(run_cli({"analyze", "--manifest", (data / "manifest.jsonl").string(), "--out-dir",
                   analysis.string()}) == 0);
  }
  CHECK(fs::exists(analysis / "bona_0000.csv"));
  CHECK(fs::exists(analysis / "spoof_0007.csv"));
  const std::string csv = slurp(analysis / "bona_0000.csv");
  CHECK(csv.rfind("frame_index,emo_change,acu_change\n", 0) == 0);
  CHECK(count_lines(csv) == 12);  // header + 11 change rows for 12 frames
  const nlohmann::json summary = nlohmann::json::parse(slurp(analysis / "summary.json"));
  CHECK(summary["bonafide"]["count"].get<int>() == 8);
  CHECK(summary["spoof"]["count"].get<int>() == 8);
  CHECK(summary["skipped"].get<int>() == 0);

  // A checkpoint trained on 4/5-dim features rejects differently shaped data.
  const fs::path other = work_dir() / "other";
  {
    StdoutCapture cap(log);
    CHECK(run_cli({"synth", "--out-dir", other.string(), "--num-bonafide", "2", "--num-spoof",
                   "2", "--frames", "12", "--d-emotion", "3", "--d-acoustic", "5"}) == 0);
  }
  CHECK(run_cli({"eval", "--manifest", (other / "manifest.jsonl").string(), "--checkpoint",
                 ckpt.string()}) == 1);
}

TEST_CASE("training flag validation surfaces as exit code 1") {
  const fs::path data = ensure_data();
  const fs::path ckpt = work_dir() / "unused.bin";
  CHECK(run_cli({"train", "--manifest", (data / "manifest.jsonl").string(), "--checkpoint-out",
                 ckpt.string(), "--epochs", "0"}) == 1);
  CHECK(run_cli({"train", "--manifest", (data / "manifest.jsonl").string(), "--checkpoint-out",
                 ckpt.string(), "--epochs", "1", "--sinc-len", "8"}) == 1);
  CHECK_FALSE(fs::exists(ckpt));
}

TEST_CASE("ablation flags land in the checkpoint") {
  const fs::path data = ensure_data();
  const fs::path ckpt = work_dir() / "ablated.bin";
  const fs::path log = work_dir() / "log.txt";
  {
    StdoutCapture cap(log);
    CHECK(run_cli({"train", "--manifest", (data / "manifest.jsonl").string(),
                   "--checkpoint-out", ckpt.string(), "--epochs", "1", "--learning-rate",
                   "1e-3", "--d-model", "4", "--sinc-len", "9", "--k", "1", "--no-eval",
                   "--no-hig"}) == 0);
  }
  eai::model::ModelParameters params = eai::model::load_checkpoint(ckpt);
  CHECK(params.config.ablation.no_eval);
  CHECK(params.config.ablation.no_hig);
  CHECK_FALSE(params.config.ablation.no_eaam);
  CHECK(params.s(0, 0) == 0.0);  // frozen at init under --no-eval
}

TEST_CASE("gradient audit subcommand") {
  const fs::path log = work_dir() / "gradcheck.txt";
  {
    StdoutCapture cap(log);
    CHECK(run_cli({"gradcheck"}) == 0);
  }
  const std::string text = slurp(log);
  CHECK(text.find("overall max rel err") != std::string::npos);
}
