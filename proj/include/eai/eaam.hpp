#pragma once

#include <Eigen/Core>

#include "eai/autodiff.hpp"
#include "eai/registry.hpp"
#include "eai/rng.hpp"

namespace eai::eaam {

// Acoustic path: sinc band-pass filtering, residual temporal block,
// projection. Emotion path: parallel linear + kernel-3 temporal convolution,
// layer norm, projection; separate utterance branch. Kernel-3 convolutions
// are stored as three shift matrices plus bias.
struct EaamParams {
  // Acoustic refinement: mix to n_filters channels, per-channel band-pass,
  // residual conv block, project to d_model. n_filters equals d_model.
  Eigen::MatrixXd ars_cutoffs;   // F x 2 (low, high), 0 < low < high <= 0.5
  Eigen::MatrixXd ars_mix;       // d_a x F
  Eigen::MatrixXd ars_conv1_wm;  // F x F (offset -1)
  Eigen::MatrixXd ars_conv1_w0;  // F x F (offset 0)
  Eigen::MatrixXd ars_conv1_wp;  // F x F (offset +1)
  Eigen::MatrixXd ars_conv1_b;   // 1 x F
  Eigen::MatrixXd ars_ln_gain;   // 1 x F
  Eigen::MatrixXd ars_ln_bias;   // 1 x F
  Eigen::MatrixXd ars_conv2_wm;  // F x F
  Eigen::MatrixXd ars_conv2_w0;  // F x F
  Eigen::MatrixXd ars_conv2_wp;  // F x F
  Eigen::MatrixXd ars_conv2_b;   // 1 x F
  Eigen::MatrixXd ars_proj;      // F x d_model

  // Emotion frame path.
  Eigen::MatrixXd ers_lin;      // d_e x d_model
  Eigen::MatrixXd ers_conv_wm;  // d_e x d_model
  Eigen::MatrixXd ers_conv_w0;  // d_e x d_model
  Eigen::MatrixXd ers_conv_wp;  // d_e x d_model
  Eigen::MatrixXd ers_conv_b;   // 1 x d_model
  Eigen::MatrixXd ers_ln_gain;  // 1 x d_model
  Eigen::MatrixXd ers_ln_bias;  // 1 x d_model
  Eigen::MatrixXd ers_proj;     // d_model x d_model

  // Emotion utterance path.
  Eigen::MatrixXd ers_utt_lin;      // d_e x d_model
  Eigen::MatrixXd ers_utt_ln_gain;  // 1 x d_model
  Eigen::MatrixXd ers_utt_ln_bias;  // 1 x d_model

  int sinc_len = 17;  // odd tap count of the band-pass FIR

  void init(int d_e, int d_a, int d_model, int sinc_len, Rng& rng);
  void validate() const;
  void append_registry(Registry& reg);
};

// Graph handles for one forward pass over EaamParams tensors, in the same
// field order.
struct EaamVars {
  ad::Var ars_cutoffs, ars_mix;
  ad::Var ars_conv1_wm, ars_conv1_w0, ars_conv1_wp, ars_conv1_b;
  ad::Var ars_ln_gain, ars_ln_bias;
  ad::Var ars_conv2_wm, ars_conv2_w0, ars_conv2_wp, ars_conv2_b;
  ad::Var ars_proj;
  ad::Var ers_lin, ers_conv_wm, ers_conv_w0, ers_conv_wp, ers_conv_b;
  ad::Var ers_ln_gain, ers_ln_bias, ers_proj;
  ad::Var ers_utt_lin, ers_utt_ln_gain, ers_utt_ln_bias;
  int sinc_len = 17;
};

EaamVars make_leaves(ad::Graph& g, EaamParams& p);

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kLeakySlope = 0.2;

// Acoustic stream: T x d_a -> T x d_model.
ad::Var ars_forward(ad::Graph& g, ad::Var acu_frames, const EaamVars& p);

struct ErsOut {
  ad::Var frames;     // T x d_model
  ad::Var utterance;  // 1 x d_model
};

// Emotion stream: frame path and utterance path.
ErsOut ers_forward(ad::Graph& g, ad::Var emo_frames, ad::Var emo_utt, const EaamVars& p);

// Per-frame mean |delta_f - delta_a| over feature dims; element 0 is zero
// (no predecessor).
ad::Var frame_discrepancy(ad::Graph& g, ad::Var f_emo, ad::Var f_acu);

struct UttDiscrepancy {
  ad::Var u;      // 1 x d_model, time-mean of emotion frames
  ad::Var d_utt;  // 1 x 1
};

UttDiscrepancy utterance_discrepancy(ad::Graph& g, ad::Var f_emo, ad::Var u_emo_p);

struct DualHead {
  ad::Var align;  // same shape as d
  ad::Var mis;
};

// (gamma_align, gamma_mis) = softmax([-d, +d]), computed as
// gamma_align = sigmoid(-2d) and gamma_mis = 1 - gamma_align so the pair sums
// to 1 within one ulp.
DualHead dual_head_weights(ad::Graph& g, ad::Var d);

struct AlignedVars {
  ad::Var f_emo_p;  // T x d_model
  ad::Var f_acu_p;  // T x d_model
  ad::Var u_p;      // 1 x d_model
  ad::Var u;        // 1 x d_model
  ad::Var d_fra;    // T x 1
  ad::Var d_utt;    // 1 x 1
  ad::Var gamma_align, gamma_mis;          // T x 1
  ad::Var gamma_align_utt, gamma_mis_utt;  // 1 x 1
};

// Cross-stream convex recombination weighted by the dual heads.
AlignedVars align_update(ad::Graph& g, ad::Var f_emo, ad::Var f_acu, ad::Var u,
                         ad::Var u_emo_p, ad::Var d_fra, ad::Var d_utt);

// Full module: streams -> discrepancies -> recombination.
AlignedVars eaam_forward(ad::Graph& g, ad::Var emo_frames, ad::Var emo_utt,
                         ad::Var acu_frames, const EaamVars& p);

// Value-level snapshot of AlignedVars for diagnostics and tests.
struct AlignedFeatures {
  Eigen::MatrixXd f_emo_p, f_acu_p;
  Eigen::RowVectorXd u_p, u;
  Eigen::VectorXd d_fra;
  double d_utt = 0.0;
  Eigen::VectorXd gamma_align, gamma_mis;
  double gamma_align_utt = 0.0, gamma_mis_utt = 0.0;
};

AlignedFeatures snapshot(const AlignedVars& v);

}  // namespace eai::eaam
