#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "eai/autodiff.hpp"
#include "eai/registry.hpp"
#include "eai/rng.hpp"

namespace eai::eaimm {

// Contrastive-loss settings: prototype neighborhood radius k, prototype
// temperature tau, InfoNCE temperature tau_nce, negative counts, and the
// minimum index distance for far negatives.
struct EvalConfig {
  int k = 3;
  double tau = 0.5;
  double tau_nce = 0.1;
  int n_neg_far = 4;
  int n_neg_shuffle = 4;
  int far_margin = 8;

  void validate() const;
};

// Three single-head attention layers: temporal frame graph, frames+utterance
// stage, frames+acoustic stage. Each layer holds a linear transform and an
// attention vector whose first d_model rows weight the destination and last
// d_model rows the source.
struct HigParams {
  Eigen::MatrixXd gat1_w;  // d_model x d_model
  Eigen::MatrixXd gat1_a;  // 2*d_model x 1
  Eigen::MatrixXd hg1_w;
  Eigen::MatrixXd hg1_a;
  Eigen::MatrixXd hg2_w;
  Eigen::MatrixXd hg2_a;

  void init(int d_model, Rng& rng);
  void validate() const;
  void append_registry(Registry& reg);
};

struct HigVars {
  ad::Var gat1_w, gat1_a, hg1_w, hg1_a, hg2_w, hg2_a;
};

HigVars make_leaves(ad::Graph& g, HigParams& p);

// Row j = f[j+1] - f[j].
ad::Var temporal_diffs(ad::Graph& g, ad::Var f);

// Attention-weighted prototype of neighborhood diffs for one frame index;
// weights alpha_j = exp(clamp(u_p . f1_j / tau, -30, 30)) over
// N(t) = {j in [0, T-2] : |j - t| <= k}.
Eigen::VectorXd prototype(const Eigen::MatrixXd& diffs, const Eigen::MatrixXd& f1,
                          const Eigen::RowVectorXd& u_p, int t, const EvalConfig& cfg);

// Negative selection for one anchor t: far diff indices plus shuffle pairs
// (a, b) of frame indices meaning f[b] - f[a].
struct NegativePlan {
  std::vector<int> far;
  std::vector<std::pair<int, int>> shuffle;
};

// T is the frame count (diffs has T-1 rows). Far candidates are diff indices
// with |j - t| > far_margin, sampled without replacement (all of them, in
// order, when not more than n_neg_far exist; no rng consumed in that case).
NegativePlan sample_negative_indices(int T, int t, const EvalConfig& cfg, Rng& rng);

// Materialized negatives; shuffle entries are telescoped diff sums.
std::vector<Eigen::VectorXd> sample_negatives(const Eigen::MatrixXd& diffs, int t,
                                              const EvalConfig& cfg, Rng& rng);

// InfoNCE over temporal diffs: positives pull each diff toward its
// neighborhood prototype, negatives push away far and shuffled diffs. Mean
// over the T-1 anchors; exactly 0 for anchors with no negatives.
ad::Var eval_loss(ad::Graph& g, ad::Var f_emo_p, ad::Var f1, ad::Var u_p,
                  const EvalConfig& cfg, Rng& rng);

// Sparse edge list for one attention layer. Destinations are indexed by
// segment id (contiguous edges per destination); node ids index the stacked
// node matrix.
struct GatEdges {
  std::vector<int> seg;  // destination segment per edge
  std::vector<int> dst;  // destination node id per edge
  std::vector<int> src;  // source node id per edge
  int n_dst = 0;
};

// Single-head graph attention: logits LeakyReLU(a . [W x_dst ++ W x_src]),
// per-destination softmax, ELU on the aggregate. Returns n_dst x d_model.
ad::Var gat_layer(ad::Graph& g, ad::Var x_nodes, ad::Var w, ad::Var a, const GatEdges& edges);

// Temporal frame graph: self-loops plus edges to t-1 and t+1.
ad::Var gat_frame(ad::Graph& g, ad::Var f, const HigVars& p);

struct HigOut {
  ad::Var frames;   // T x d_model, stage-2 frame outputs
  ad::Var readout;  // 1 x 2*d_model, concat(mean, max) over frames
};

// Stage 1 attends frames to {self, t-1, t+1, utterance node}; stage 2 attends
// the stage-1 frames to {self, t-1, t+1, index-aligned acoustic frame}.
// Utterance and acoustic nodes are sources only: their updated values feed
// nothing downstream.
HigOut hig_forward(ad::Graph& g, ad::Var f1, ad::Var u_p, ad::Var f_acu_p, const HigVars& p);

}  // namespace eai::eaimm
