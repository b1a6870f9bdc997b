// Acceptance gate: eight checks, one PASS/FAIL line each, nonzero exit if any
// check fails. Heavier end-to-end checks share the four training runs.
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "eai/eaam.hpp"
#include "eai/eaimm.hpp"
#include "eai/gradcheck.hpp"
#include "eai/metrics.hpp"
#include "eai/model.hpp"
#include "eai/rng.hpp"
#include "eai/synthgen.hpp"
#include "eai/train.hpp"
#include "reference.hpp"

using eai::Rng;
using eai::derive_seed;
namespace ad = eai::ad;
namespace feat = eai::feat;
namespace fs = std::filesystem;
namespace model = eai::model;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

Eigen::MatrixXd randm(int r, int c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

// Same per-bundle seeding as the dataset writer, kept in memory.
std::vector<feat::FeatureBundle> make_corpus(int n_bona, int n_spoof, uint64_t seed) {
  eai::synth::SynthConfig cfg;  // protocol values are the config defaults
  cfg.seed = seed;
  std::vector<feat::FeatureBundle> out;
  out.reserve(static_cast<size_t>(n_bona + n_spoof));
  for (int i = 0; i < n_bona + n_spoof; ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(i)));
    out.push_back(i < n_bona ? eai::synth::gen_bonafide(cfg, rng, "b")
                             : eai::synth::gen_spoof(cfg, rng, "s"));
  }
  return out;
}

double held_eer(const std::vector<feat::FeatureBundle>& held, model::ModelParameters& params) {
  eai::metrics::ScoreSet scores;
  scores.reserve(held.size());
  for (const auto& b : held) scores.push_back({b.id, model::score(b, params), b.label});
  return eai::metrics::compute_eer(scores).eer;
}

struct ProtocolRun {
  eai::train::TrainResult result;
  double eer = 0.0;
  double seconds = 0.0;
};

ProtocolRun run_protocol(const std::vector<feat::FeatureBundle>& data,
                         const std::vector<feat::FeatureBundle>& held,
                         model::AblationFlags ablation) {
  model::ModelConfig mcfg;  // d_e/d_a 16, d_model 32, sinc_len 17
  mcfg.ablation = ablation;
  eai::train::TrainConfig tcfg;
  tcfg.epochs = 20;
  tcfg.learning_rate = 1e-3;
  tcfg.accum = 1;
  tcfg.seed = 1;
  ProtocolRun run;
  const double t0 = now_seconds();
  run.result = eai::train::train(data, mcfg, tcfg);
  run.eer = held_eer(held, run.result.params);
  run.seconds = now_seconds() - t0;
  return run;
}

// --- criterion bodies -------------------------------------------------------

bool c1_gradient_audit(std::string& detail) {
  const double t0 = now_seconds();
  const eai::gradcheck::SuiteResult suite = eai::gradcheck::run_suite(1);
  const double dt = now_seconds() - t0;
  const bool ok = suite.max_rel_err < 1e-4 && dt < 60.0;
  detail = fmt("max rel err %.3e (threshold 1e-4), %.2f s (budget 60 s)", suite.max_rel_err, dt);
  return ok;
}

bool c2_loss_identity(std::string& detail) {
  // Walk real optimizer steps and check the uncertainty-weighted composition
  // and the closed-form s-gradient at every visited parameter state.
  model::ModelConfig mcfg;
  mcfg.d_e = 4;
  mcfg.d_a = 4;
  mcfg.d_model = 6;
  mcfg.sinc_len = 9;
  eai::synth::SynthConfig scfg;
  scfg.T = 16;
  scfg.d_e = 4;
  scfg.d_a = 4;
  std::vector<feat::FeatureBundle> data;
  for (int i = 0; i < 6; ++i) {
    Rng rng(derive_seed(77, static_cast<uint64_t>(i)));
    data.push_back(i % 2 == 0 ? eai::synth::gen_bonafide(scfg, rng, "b")
                              : eai::synth::gen_spoof(scfg, rng, "s"));
  }
  eai::eaimm::EvalConfig ecfg;
  ecfg.k = 1;
  ecfg.far_margin = 3;
  ecfg.n_neg_far = 2;
  ecfg.n_neg_shuffle = 2;

  model::ModelParameters params = model::ModelParameters::init(mcfg, 5);
  eai::Registry reg = params.registry();
  eai::train::AdamState state;
  state.init_like(reg);
  Rng rng(9);

  double max_identity = 0.0;
  double max_sgrad = 0.0;
  int steps = 0;
  for (int epoch = 0; epoch < 3; ++epoch) {
    for (const auto& b : data) {
      model::Gradients g = model::backward(b, params, ecfg, rng);
      const auto& l = g.breakdown;
      max_identity =
          std::max(max_identity, std::abs(l.total - (l.ce + std::exp(-l.s) * l.eval + l.s)));
      const double want = 1.0 - std::exp(-l.s) * l.eval;
      max_sgrad = std::max(max_sgrad, std::abs(g.tensors.back()(0, 0) - want));
      eai::train::adam_step(reg, g.tensors, state, 1e-3, 1e-4);
      params.constrain();
      ++steps;
    }
  }
  const bool ok = max_identity <= 1e-12 && max_sgrad <= 1e-10;
  detail = fmt("over %d optimizer steps: max |total-(ce+e^-s*eval+s)| %.2e (tol 1e-12), "
               "max |ds - (1-e^-s*eval)| %.2e (tol 1e-10)",
               steps, max_identity, max_sgrad);
  return ok;
}

bool c3_oracle_equality(std::string& detail) {
  // Equal error rate: production sweep vs direct-counting oracle, exact.
  Rng rng(31);
  int eer_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int nb = 2 + static_cast<int>(rng.below(99));
    const int ns = 2 + static_cast<int>(rng.below(99));
    const bool grid = trial % 2 == 0;  // integer scores force heavy ties
    eai::metrics::ScoreSet s;
    for (int i = 0; i < nb + ns; ++i) {
      const double v = grid ? static_cast<double>(rng.below(7)) : rng.gaussian();
      s.push_back({"t", v, i < nb ? feat::Label::bonafide : feat::Label::spoof});
    }
    const auto got = eai::metrics::compute_eer(s);
    const auto want = ref::eer_sweep(s);
    if (got.eer != want.eer || got.threshold != want.threshold) ++eer_fail;
  }

  // Contrastive loss: graph construction vs standalone recomputation.
  double eval_err = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng data_rng(seed);
    const Eigen::MatrixXd fe = randm(14, 4, data_rng);
    const Eigen::MatrixXd f1 = randm(14, 4, data_rng);
    const Eigen::MatrixXd up = randm(1, 4, data_rng);
    eai::eaimm::EvalConfig cfg;
    cfg.k = 1 + static_cast<int>(seed % 2);
    cfg.far_margin = cfg.k + 2 + static_cast<int>(seed % 3);
    cfg.n_neg_far = static_cast<int>(seed % 4);
    cfg.n_neg_shuffle = static_cast<int>((seed + 1) % 4);
    ad::Graph g;
    Rng r1(seed * 11);
    const double got =
        eai::eaimm::eval_loss(g, g.constant(fe), g.constant(f1), g.constant(up), cfg, r1).item();
    Rng r2(seed * 11);
    const double want = ref::eval_loss_brute(fe, f1, up, cfg, r2);
    eval_err = std::max(eval_err, std::abs(got - want));
  }

  // Sparse attention vs dense-mask reference.
  double gat_err = 0.0;
  Rng grng(77);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 6 + static_cast<int>(grng.below(4));
    eai::eaimm::GatEdges e;
    e.n_dst = n - 2;
    for (int d = 0; d < e.n_dst; ++d) {
      std::vector<int> srcs{d, (d + 1) % n, (d + 3) % n};
      for (int s : srcs) {
        e.seg.push_back(d);
        e.dst.push_back(d);
        e.src.push_back(s);
      }
    }
    const Eigen::MatrixXd x = randm(n, 5, grng);
    const Eigen::MatrixXd w = randm(5, 5, grng) * 0.4;
    const Eigen::MatrixXd a = randm(10, 1, grng) * 0.4;
    ad::Graph g;
    const Eigen::MatrixXd got =
        eai::eaimm::gat_layer(g, g.constant(x), g.constant(w), g.constant(a), e).value();
    gat_err = std::max(gat_err, (got - ref::gat_dense(x, w, a, e, 0.2)).cwiseAbs().maxCoeff());
  }

  const bool ok = eer_fail == 0 && eval_err <= 1e-10 && gat_err <= 1e-10;
  detail = fmt("eer oracle mismatches %d/1000, contrastive max err %.2e, attention max err %.2e "
               "(tol 1e-10)",
               eer_fail, eval_err, gat_err);
  return ok;
}

bool c4_alignment_invariants(std::string& detail) {
  ad::Graph g;
  Eigen::MatrixXd zero(1, 1);
  zero << 0.0;
  const auto at_zero = eai::eaam::dual_head_weights(g, g.constant(zero));
  bool ok = at_zero.align.value()(0, 0) == 0.5 && at_zero.mis.value()(0, 0) == 0.5;

  // Complementarity and monotone down-weighting over a discrepancy grid.
  const int N = 1000;
  Eigen::MatrixXd grid(N, 1);
  for (int i = 0; i < N; ++i) grid(i, 0) = 8.0 * i / (N - 1);
  ad::Graph g2;
  const auto heads = eai::eaam::dual_head_weights(g2, g2.constant(grid));
  double max_sum_err = 0.0;
  for (int i = 0; i < N; ++i) {
    const double a = heads.align.value()(i, 0);
    max_sum_err = std::max(max_sum_err, std::abs(a + heads.mis.value()(i, 0) - 1.0));
    ok = ok && a > 0.0 && a <= 0.5;
    if (i > 0) ok = ok && a < heads.align.value()(i - 1, 0);
  }
  ok = ok && max_sum_err <= std::numeric_limits<double>::epsilon();

  // Recombined frames stay inside the per-entry envelope of the two streams.
  Rng rng(13);
  const int T = 1000;
  const Eigen::MatrixXd fe = randm(T, 3, rng);
  const Eigen::MatrixXd fa = randm(T, 3, rng);
  const Eigen::MatrixXd u = randm(1, 3, rng);
  const Eigen::MatrixXd up = randm(1, 3, rng);
  const Eigen::MatrixXd dfra = randm(T, 1, rng).cwiseAbs();
  Eigen::MatrixXd dutt(1, 1);
  dutt << 0.4;
  ad::Graph g3;
  const auto av =
      eai::eaam::align_update(g3, g3.constant(fe), g3.constant(fa), g3.constant(u),
                              g3.constant(up), g3.constant(dfra), g3.constant(dutt));
  double worst = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < 3; ++i) {
      const double lo = std::min(fe(t, i), fa(t, i));
      const double hi = std::max(fe(t, i), fa(t, i));
      const double v = av.f_emo_p.value()(t, i);
      worst = std::max(worst, std::max(lo - v, v - hi));
    }
  }
  ok = ok && worst <= 1e-12;
  detail = fmt("half-weight at zero %s, max |align+mis-1| %.2e (tol 1 ulp), envelope breach "
               "%.2e over %d frames",
               ok ? "exact" : "VIOLATED", max_sum_err, worst, T);
  return ok;
}

bool c5_training_protocol(const ProtocolRun& full, std::string& detail) {
  const double first = full.result.epoch_means.front().total;
  const double last = full.result.epoch_means.back().total;
  const bool drop_ok = first > 0.0 && last <= 0.7 * first;
  const bool eer_ok = full.eer <= 0.10;
  const bool time_ok = full.seconds < 600.0;
  detail = fmt("mean total %.4f -> %.4f (need <= 0.7x), held-out EER %.3f (need <= 0.10), "
               "%.1f s (budget 600 s)",
               first, last, full.eer, full.seconds);
  return drop_ok && eer_ok && time_ok;
}

bool c6_corpus_separation(const std::vector<feat::FeatureBundle>& train_corpus,
                          std::string& detail) {
  const eai::metrics::InconsistencyReport rep =
      eai::metrics::corpus_inconsistency_report(train_corpus);
  if (!rep.bonafide || !rep.spoof) {
    detail = "missing per-label statistics";
    return false;
  }
  const double gap = rep.bonafide->mean_r - rep.spoof->mean_r;
  detail = fmt("mean change-curve correlation: bonafide %.3f vs spoof %.3f, gap %.3f "
               "(need >= 0.2)",
               rep.bonafide->mean_r, rep.spoof->mean_r, gap);
  return gap >= 0.2;
}

bool c7_persistence_determinism(const std::vector<feat::FeatureBundle>& corpus,
                                model::ModelParameters& trained, std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / "eai_acceptance";
  fs::create_directories(dir);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  };

  // Feature container: save -> load -> save is byte-identical.
  bool eaif_ok = true;
  for (size_t i : {size_t{0}, corpus.size() - 1}) {
    const fs::path p1 = dir / "b1.eaif";
    const fs::path p2 = dir / "b2.eaif";
    feat::save_bundle(corpus[i], p1);
    const feat::FeatureBundle back = feat::load_bundle(p1);
    feat::save_bundle(back, p2);
    eaif_ok = eaif_ok && slurp(p1) == slurp(p2) && back.emo_frames == corpus[i].emo_frames;
  }

  // Checkpoint: save -> load -> save is byte-identical on the trained model.
  const fs::path c1 = dir / "m1.bin";
  const fs::path c2 = dir / "m2.bin";
  model::save_checkpoint(trained, c1);
  model::ModelParameters loaded = model::load_checkpoint(c1);
  model::save_checkpoint(loaded, c2);
  const bool ckpt_ok = slurp(c1) == slurp(c2);

  // Same seed, same data: bit-equal parameters from two independent runs.
  model::ModelConfig mcfg;
  mcfg.d_model = 8;
  eai::train::TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.learning_rate = 1e-3;
  tcfg.accum = 2;
  tcfg.seed = 3;
  std::vector<feat::FeatureBundle> small(corpus.begin(), corpus.begin() + 8);
  for (size_t i = 0; i < 4; ++i) small.push_back(corpus[corpus.size() - 1 - i]);
  eai::train::TrainResult r1 = eai::train::train(small, mcfg, tcfg);
  eai::train::TrainResult r2 = eai::train::train(small, mcfg, tcfg);
  bool det_ok = true;
  eai::Registry reg1 = r1.params.registry();
  eai::Registry reg2 = r2.params.registry();
  for (size_t i = 0; i < reg1.size(); ++i) {
    det_ok = det_ok && *reg1[i].tensor == *reg2[i].tensor;
  }

  detail = fmt("feature container round-trip %s, checkpoint round-trip %s, repeated training "
               "%s",
               eaif_ok ? "byte-identical" : "DIFFERS", ckpt_ok ? "byte-identical" : "DIFFERS",
               det_ok ? "bit-equal" : "DIFFERS");
  return eaif_ok && ckpt_ok && det_ok;
}

bool c8_ablation_ordering(const ProtocolRun& full, const ProtocolRun& no_eaam,
                          const ProtocolRun& no_eval, const ProtocolRun& no_hig,
                          std::string& detail) {
  const bool ok =
      full.eer <= no_eaam.eer && full.eer <= no_eval.eer && full.eer <= no_hig.eer;
  detail = fmt("held-out EER: full %.3f vs no-alignment %.3f, no-contrastive %.3f, "
               "no-graph %.3f (full must not exceed any)",
               full.eer, no_eaam.eer, no_eval.eer, no_hig.eer);
  return ok;
}

}  // namespace

int main() {
  std::printf("acceptance gate: 8 criteria\n");

  // Shared corpora and the four protocol training runs (criteria 5-8).
  const std::vector<feat::FeatureBundle> train_corpus = make_corpus(100, 100, 1);
  const std::vector<feat::FeatureBundle> held_corpus = make_corpus(50, 50, 2);
  model::AblationFlags none;
  model::AblationFlags ab_eaam;
  ab_eaam.no_eaam = true;
  model::AblationFlags ab_eval;
  ab_eval.no_eval = true;
  model::AblationFlags ab_hig;
  ab_hig.no_hig = true;
  ProtocolRun full = run_protocol(train_corpus, held_corpus, none);
  const ProtocolRun r_eaam = run_protocol(train_corpus, held_corpus, ab_eaam);
  const ProtocolRun r_eval = run_protocol(train_corpus, held_corpus, ab_eval);
  const ProtocolRun r_hig = run_protocol(train_corpus, held_corpus, ab_hig);

  struct Line {
    const char* name;
    bool pass;
    std::string detail;
  };
  std::vector<Line> lines;
  std::string d;

  bool p = c1_gradient_audit(d);
  lines.push_back({"C1 finite-difference gradient audit", p, d});
  p = c2_loss_identity(d);
  lines.push_back({"C2 uncertainty-weighted loss identity", p, d});
  p = c3_oracle_equality(d);
  lines.push_back({"C3 independent metric/loss oracles", p, d});
  p = c4_alignment_invariants(d);
  lines.push_back({"C4 alignment head invariants", p, d});
  p = c5_training_protocol(full, d);
  lines.push_back({"C5 training protocol convergence", p, d});
  p = c6_corpus_separation(train_corpus, d);
  lines.push_back({"C6 corpus inconsistency separation", p, d});
  p = c7_persistence_determinism(train_corpus, full.result.params, d);
  lines.push_back({"C7 persistence and determinism", p, d});
  p = c8_ablation_ordering(full, r_eaam, r_eval, r_hig, d);
  lines.push_back({"C8 ablation ordering", p, d});

  int failures = 0;
  for (const auto& l : lines) {
    std::printf("%s  %-42s %s\n", l.pass ? "PASS" : "FAIL", l.name, l.detail.c_str());
    failures += l.pass ? 0 : 1;
  }
  std::printf("%d/8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
