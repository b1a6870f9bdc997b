#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "eai/autodiff.hpp"
#include "eai/eaam.hpp"
#include "eai/eaimm.hpp"
#include "eai/feature_store.hpp"
#include "eai/registry.hpp"

namespace eai::model {

struct AblationFlags {
  bool no_eaam = false;  // replace both streams with plain linear projections
  bool no_eval = false;  // contrastive term fixed to 0, s frozen
  bool no_hig = false;   // pool aligned emotion frames directly

  uint8_t to_byte() const;
  static AblationFlags from_byte(uint8_t b);
};

struct ModelConfig {
  int d_e = 16;
  int d_a = 16;
  int d_model = 32;
  int sinc_len = 17;
  AblationFlags ablation;

  void validate() const;
};

// All trainable state. registry() exposes every tensor in a fixed declaration
// order shared by the optimizer, the gradient checker, and the checkpoint.
struct ModelParameters {
  ModelConfig config;
  eaam::EaamParams eaam;
  eaimm::HigParams hig;
  Eigen::MatrixXd cls_w;  // 2*d_model x 2
  Eigen::MatrixXd cls_b;  // 1 x 2
  Eigen::MatrixXd s;      // 1 x 1, log of the contrastive-term variance

  static ModelParameters init(const ModelConfig& cfg, uint64_t seed);
  Registry registry();
  void validate() const;
  // Projects sinc cutoffs back into 0 < low < high <= 0.5 after an optimizer
  // step.
  void constrain();
};

// Leaf handles in registry order plus named access for graph building. Under
// no_eval the s handle is a constant, so no gradient reaches it.
struct ParamLeaves {
  eaam::EaamVars eaam;
  eaimm::HigVars hig;
  ad::Var cls_w, cls_b, s;
  std::vector<ad::Var> ordered;
};

ParamLeaves make_param_leaves(ad::Graph& g, ModelParameters& p);

struct ForwardGraph {
  ParamLeaves leaves;
  eaam::AlignedVars aligned;
  ad::Var f1;       // alpha source for the contrastive prototypes
  ad::Var readout;  // 1 x 2*d_model
  ad::Var logits;   // 1 x 2 (bonafide, spoof)
};

ForwardGraph build_forward(ad::Graph& g, const feat::FeatureBundle& bundle,
                           ModelParameters& params);

struct LossGraph {
  ForwardGraph fwd;
  ad::Var ce;
  ad::Var eval;
  ad::Var total;
};

LossGraph build_total_loss(ad::Graph& g, const feat::FeatureBundle& bundle,
                           ModelParameters& params, const eaimm::EvalConfig& cfg, Rng& rng);

struct LossBreakdown {
  double ce = 0.0;
  double eval = 0.0;
  double s = 0.0;
  double total = 0.0;  // ce + e^{-s} * eval + s
};

struct Forward {
  Eigen::Vector2d logits;
  eaam::AlignedFeatures aligned;
  Eigen::RowVectorXd readout;
};

Forward forward(const feat::FeatureBundle& bundle, ModelParameters& params);

LossBreakdown total_loss(const feat::FeatureBundle& bundle, ModelParameters& params,
                         const eaimm::EvalConfig& cfg, Rng& rng);

// Gradient tensors aligned with ModelParameters::registry().
struct Gradients {
  std::vector<Eigen::MatrixXd> tensors;
  LossBreakdown breakdown;

  void add_scaled(const Gradients& other, double c);
  void scale_all(double c);
};

Gradients backward(const feat::FeatureBundle& bundle, ModelParameters& params,
                   const eaimm::EvalConfig& cfg, Rng& rng);

// Detection score: logit(bonafide) - logit(spoof); higher means more bonafide.
double score(const feat::FeatureBundle& bundle, ModelParameters& params);

// Checkpoint container: magic "EAIM", version, dims, ablation byte, then all
// registry tensors (name, shape, row-major f64), little-endian throughout.
void save_checkpoint(ModelParameters& params, const std::filesystem::path& path);
ModelParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace eai::model
