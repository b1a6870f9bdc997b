#include "eai/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "eai/errors.hpp"

namespace eai::gradcheck {

namespace {

feat::FeatureBundle random_bundle(int T, int d_e, int d_a, feat::Label label, Rng& rng) {
  feat::FeatureBundle b;
  b.id = label == feat::Label::bonafide ? "gc_bona" : "gc_spoof";
  b.label = label;
  b.emo_frames.resize(T, d_e);
  b.acu_frames.resize(T, d_a);
  b.emo_utt.resize(d_e);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < d_e; ++i) b.emo_frames(t, i) = rng.gaussian();
    for (int i = 0; i < d_a; ++i) b.acu_frames(t, i) = rng.gaussian();
  }
  for (int i = 0; i < d_e; ++i) b.emo_utt(i) = rng.gaussian();
  return b;
}

double loss_at(const feat::FeatureBundle& bundle, model::ModelParameters& params,
               const eaimm::EvalConfig& cfg, uint64_t rng_seed) {
  Rng rng(rng_seed);
  return model::total_loss(bundle, params, cfg, rng).total;
}

}  // namespace

SuiteResult run_suite(uint64_t seed) {
  model::ModelConfig mcfg;
  mcfg.d_e = 4;
  mcfg.d_a = 4;
  mcfg.d_model = 4;
  mcfg.sinc_len = 17;

  eaimm::EvalConfig ecfg;
  ecfg.k = 1;
  ecfg.tau = 0.5;
  ecfg.tau_nce = 0.1;
  // far_margin 2 with T=6 exercises both the take-all and the sampled far
  // path; n_neg_far 1 keeps some anchors without far candidates.
  ecfg.n_neg_far = 1;
  ecfg.n_neg_shuffle = 2;
  ecfg.far_margin = 2;

  const int T = 6;
  SuiteResult suite;

  // Two instances cover both labels and two parameter draws.
  for (int instance = 0; instance < 2; ++instance) {
    const uint64_t inst_seed = derive_seed(seed, static_cast<uint64_t>(instance));
    Rng data_rng(derive_seed(inst_seed, 0));
    const feat::Label label = instance == 0 ? feat::Label::bonafide : feat::Label::spoof;
    const feat::FeatureBundle bundle = random_bundle(T, mcfg.d_e, mcfg.d_a, label, data_rng);
    model::ModelParameters params = model::ModelParameters::init(mcfg, derive_seed(inst_seed, 1));
    // Pull band edges off the boundary so FD probes of cutoff entries stay
    // strictly inside the valid range.
    params.eaam.ars_cutoffs *= 0.99;
    const uint64_t loss_seed = derive_seed(inst_seed, 2);

    Rng grad_rng(loss_seed);
    const model::Gradients analytic = model::backward(bundle, params, ecfg, grad_rng);

    Registry reg = params.registry();
    for (size_t gi = 0; gi < reg.size(); ++gi) {
      GroupResult* group = nullptr;
      for (auto& existing : suite.groups) {
        if (existing.name == reg[gi].name) group = &existing;
      }
      if (group == nullptr) {
        suite.groups.push_back({reg[gi].name, 0.0, 0});
        group = &suite.groups.back();
      }

      Eigen::MatrixXd& tensor = *reg[gi].tensor;
      for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
        for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
          const double saved = tensor(r, c);
          tensor(r, c) = saved + kFdStep;
          const double up = loss_at(bundle, params, ecfg, loss_seed);
          tensor(r, c) = saved - kFdStep;
          const double down = loss_at(bundle, params, ecfg, loss_seed);
          tensor(r, c) = saved;

          const double fd = (up - down) / (2.0 * kFdStep);
          const double an = analytic.tensors[gi](r, c);
          const double rel =
              std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), kRelFloor});
          group->max_rel_err = std::max(group->max_rel_err, rel);
          group->entries += 1;
          suite.max_rel_err = std::max(suite.max_rel_err, rel);
        }
      }
    }
  }
  return suite;
}

}  // namespace eai::gradcheck
