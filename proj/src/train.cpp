#include "eai/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "eai/errors.hpp"

namespace eai::train {

void TrainConfig::validate() const {
  require(epochs >= 1, "train config: epochs must be >= 1");
  require(learning_rate > 0.0, "train config: learning rate must be > 0");
  require(weight_decay >= 0.0, "train config: weight decay must be >= 0");
  require(accum >= 1, "train config: accumulation size must be >= 1");
  eval.validate();
}

void AdamState::init_like(const Registry& reg) {
  m.clear();
  v.clear();
  m.reserve(reg.size());
  v.reserve(reg.size());
  for (const NamedTensor& t : reg) {
    m.push_back(Eigen::MatrixXd::Zero(t.tensor->rows(), t.tensor->cols()));
    v.push_back(Eigen::MatrixXd::Zero(t.tensor->rows(), t.tensor->cols()));
  }
  step = 0;
}

void adam_step(Registry& reg, const std::vector<Eigen::MatrixXd>& grads, AdamState& state,
               double lr, double wd) {
  require(reg.size() == grads.size() && reg.size() == state.m.size(),
          "adam_step: registry/gradient/state size mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (size_t i = 0; i < reg.size(); ++i) {
    Eigen::MatrixXd& p = *reg[i].tensor;
    const Eigen::MatrixXd& g = grads[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd mhat = state.m[i].array() / bc1;
    const Eigen::ArrayXXd vhat = state.v[i].array() / bc2;
    p.array() -= lr * mhat / (vhat.sqrt() + kAdamEps);
    if (wd > 0.0 && reg[i].name != "s") p -= lr * wd * p;
  }
}

TrainResult train(const std::vector<feat::FeatureBundle>& data, const model::ModelConfig& mcfg,
                  const TrainConfig& cfg) {
  cfg.validate();
  mcfg.validate();
  require(!data.empty(), "train: dataset is empty");
  int n_bona = 0;
  int n_spoof = 0;
  for (const auto& b : data) {
    (b.label == feat::Label::bonafide ? n_bona : n_spoof) += 1;
  }
  if (n_bona == 0 || n_spoof == 0) {
    std::fprintf(stderr, "warning: single-class dataset (%d bonafide, %d spoof)\n", n_bona,
                 n_spoof);
  }

  TrainResult result;
  result.params = model::ModelParameters::init(mcfg, derive_seed(cfg.seed, 0));
  Registry reg = result.params.registry();
  AdamState state;
  state.init_like(reg);
  Rng rng(derive_seed(cfg.seed, 1));

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);

    model::Gradients accum;
    int pending = 0;
    model::LossBreakdown epoch_sum;
    auto flush = [&] {
      if (pending == 0) return;
      accum.scale_all(1.0 / pending);
      adam_step(reg, accum.tensors, state, cfg.learning_rate, cfg.weight_decay);
      result.params.constrain();
      accum.tensors.clear();
      pending = 0;
    };

    for (size_t idx : order) {
      model::Gradients g = model::backward(data[idx], result.params, cfg.eval, rng);
      result.backward_passes += 1;
      epoch_sum.ce += g.breakdown.ce;
      epoch_sum.eval += g.breakdown.eval;
      epoch_sum.s += g.breakdown.s;
      epoch_sum.total += g.breakdown.total;
      if (accum.tensors.empty()) {
        accum.tensors = std::move(g.tensors);
      } else {
        accum.add_scaled(g, 1.0);
      }
      pending += 1;
      if (pending == cfg.accum) flush();
    }
    flush();

    const double n = static_cast<double>(data.size());
    result.epoch_means.push_back(
        {epoch_sum.ce / n, epoch_sum.eval / n, epoch_sum.s / n, epoch_sum.total / n});
  }
  return result;
}

}  // namespace eai::train
