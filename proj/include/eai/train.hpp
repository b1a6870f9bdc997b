#pragma once

#include <cstdint>
#include <vector>

#include "eai/eaimm.hpp"
#include "eai/feature_store.hpp"
#include "eai/model.hpp"

namespace eai::train {

struct TrainConfig {
  int epochs = 60;
  double learning_rate = 1e-5;
  double weight_decay = 1e-4;
  int accum = 8;  // utterances averaged per optimizer step
  uint64_t seed = 1;
  eaimm::EvalConfig eval;

  void validate() const;
};

// Adam moments per registry tensor plus a shared step counter.
struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long step = 0;

  void init_like(const Registry& reg);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One bias-corrected Adam update plus decoupled weight decay
// (p -= lr * wd * p). The log-variance tensor "s" is excluded from decay.
void adam_step(Registry& reg, const std::vector<Eigen::MatrixXd>& grads, AdamState& state,
               double lr, double wd);

struct TrainResult {
  model::ModelParameters params;
  std::vector<model::LossBreakdown> epoch_means;
  long backward_passes = 0;
};

// Deterministic under (cfg.seed, data): seeded init, seeded epoch shuffle,
// sequential negative sampling, gradient accumulation in visit order with a
// remainder flush at each epoch end.
TrainResult train(const std::vector<feat::FeatureBundle>& data, const model::ModelConfig& mcfg,
                  const TrainConfig& cfg);

}  // namespace eai::train
