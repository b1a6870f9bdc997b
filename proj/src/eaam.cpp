#include "eai/eaam.hpp"

#include <cmath>

#include "eai/errors.hpp"
#include "eai/param_init.hpp"

namespace eai::eaam {

using ad::Var;
using eai::uniform_fan_in;

namespace {

// Kernel-3 temporal convolution as shifted matmuls. pad_mode: -1 index means
// zero row (gather handles it); replicate clamps to the valid range so
// identical input rows stay identical in the output.
enum class Pad { zero, replicate };

Var conv3(ad::Graph&, Var x, Var wm, Var w0, Var wp, Var bias, Pad pad) {
  const int T = static_cast<int>(x.rows());
  std::vector<int> prev(static_cast<size_t>(T));
  std::vector<int> next(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    if (pad == Pad::zero) {
      prev[static_cast<size_t>(t)] = t - 1;
      next[static_cast<size_t>(t)] = t + 1 < T ? t + 1 : -1;
    } else {
      prev[static_cast<size_t>(t)] = t - 1 >= 0 ? t - 1 : 0;
      next[static_cast<size_t>(t)] = t + 1 < T ? t + 1 : T - 1;
    }
  }
  Var acc = ad::add(ad::matmul(ad::gather_rows(x, prev), wm), ad::matmul(x, w0));
  acc = ad::add(acc, ad::matmul(ad::gather_rows(x, next), wp));
  return ad::add(acc, ad::broadcast_row(bias, T));
}

}  // namespace

void EaamParams::init(int d_e, int d_a, int d_model, int sinc_len_, Rng& rng) {
  require(d_e > 0 && d_a > 0 && d_model > 0, "eaam init: dims must be positive");
  require(sinc_len_ >= 3 && sinc_len_ % 2 == 1, "eaam init: sinc_len must be odd and >= 3");
  sinc_len = sinc_len_;
  const int F = d_model;

  // Band edges log-spaced over (0.02, 0.5]; adjacent bands tile the range.
  ars_cutoffs.resize(F, 2);
  const double lo_edge = std::log(0.02);
  const double hi_edge = std::log(0.5);
  for (int f = 0; f < F; ++f) {
    const double e0 = std::exp(lo_edge + (hi_edge - lo_edge) * f / static_cast<double>(F));
    const double e1 = std::exp(lo_edge + (hi_edge - lo_edge) * (f + 1) / static_cast<double>(F));
    ars_cutoffs(f, 0) = e0;
    ars_cutoffs(f, 1) = std::min(e1, 0.5);
  }

  ars_mix = uniform_fan_in(d_a, F, d_a, rng);
  ars_conv1_wm = uniform_fan_in(F, F, 3.0 * F, rng);
  ars_conv1_w0 = uniform_fan_in(F, F, 3.0 * F, rng);
  ars_conv1_wp = uniform_fan_in(F, F, 3.0 * F, rng);
  ars_conv1_b = Eigen::MatrixXd::Zero(1, F);
  ars_ln_gain = Eigen::MatrixXd::Ones(1, F);
  ars_ln_bias = Eigen::MatrixXd::Zero(1, F);
  ars_conv2_wm = uniform_fan_in(F, F, 3.0 * F, rng);
  ars_conv2_w0 = uniform_fan_in(F, F, 3.0 * F, rng);
  ars_conv2_wp = uniform_fan_in(F, F, 3.0 * F, rng);
  ars_conv2_b = Eigen::MatrixXd::Zero(1, F);
  ars_proj = uniform_fan_in(F, d_model, F, rng);

  ers_lin = uniform_fan_in(d_e, d_model, d_e, rng);
  ers_conv_wm = uniform_fan_in(d_e, d_model, 3.0 * d_e, rng);
  ers_conv_w0 = uniform_fan_in(d_e, d_model, 3.0 * d_e, rng);
  ers_conv_wp = uniform_fan_in(d_e, d_model, 3.0 * d_e, rng);
  ers_conv_b = Eigen::MatrixXd::Zero(1, d_model);
  ers_ln_gain = Eigen::MatrixXd::Ones(1, d_model);
  ers_ln_bias = Eigen::MatrixXd::Zero(1, d_model);
  ers_proj = uniform_fan_in(d_model, d_model, d_model, rng);

  ers_utt_lin = uniform_fan_in(d_e, d_model, d_e, rng);
  ers_utt_ln_gain = Eigen::MatrixXd::Ones(1, d_model);
  ers_utt_ln_bias = Eigen::MatrixXd::Zero(1, d_model);
}

void EaamParams::validate() const {
  for (Eigen::Index f = 0; f < ars_cutoffs.rows(); ++f) {
    const double lo = ars_cutoffs(f, 0);
    const double hi = ars_cutoffs(f, 1);
    require(lo > 0.0 && lo < hi && hi <= 0.5,
            "eaam params: sinc cutoffs must satisfy 0 < low < high <= 0.5");
  }
  auto finite = [](const Eigen::MatrixXd& m) { return m.allFinite(); };
  const Eigen::MatrixXd* all[] = {
      &ars_cutoffs, &ars_mix, &ars_conv1_wm, &ars_conv1_w0, &ars_conv1_wp, &ars_conv1_b,
      &ars_ln_gain, &ars_ln_bias, &ars_conv2_wm, &ars_conv2_w0, &ars_conv2_wp, &ars_conv2_b,
      &ars_proj, &ers_lin, &ers_conv_wm, &ers_conv_w0, &ers_conv_wp, &ers_conv_b,
      &ers_ln_gain, &ers_ln_bias, &ers_proj, &ers_utt_lin, &ers_utt_ln_gain, &ers_utt_ln_bias};
  for (const auto* m : all) require(finite(*m), "eaam params: non-finite weight");
}

void EaamParams::append_registry(Registry& reg) {
  reg.push_back({"ars_cutoffs", &ars_cutoffs});
  reg.push_back({"ars_mix", &ars_mix});
  reg.push_back({"ars_conv1_wm", &ars_conv1_wm});
  reg.push_back({"ars_conv1_w0", &ars_conv1_w0});
  reg.push_back({"ars_conv1_wp", &ars_conv1_wp});
  reg.push_back({"ars_conv1_b", &ars_conv1_b});
  reg.push_back({"ars_ln_gain", &ars_ln_gain});
  reg.push_back({"ars_ln_bias", &ars_ln_bias});
  reg.push_back({"ars_conv2_wm", &ars_conv2_wm});
  reg.push_back({"ars_conv2_w0", &ars_conv2_w0});
  reg.push_back({"ars_conv2_wp", &ars_conv2_wp});
  reg.push_back({"ars_conv2_b", &ars_conv2_b});
  reg.push_back({"ars_proj", &ars_proj});
  reg.push_back({"ers_lin", &ers_lin});
  reg.push_back({"ers_conv_wm", &ers_conv_wm});
  reg.push_back({"ers_conv_w0", &ers_conv_w0});
  reg.push_back({"ers_conv_wp", &ers_conv_wp});
  reg.push_back({"ers_conv_b", &ers_conv_b});
  reg.push_back({"ers_ln_gain", &ers_ln_gain});
  reg.push_back({"ers_ln_bias", &ers_ln_bias});
  reg.push_back({"ers_proj", &ers_proj});
  reg.push_back({"ers_utt_lin", &ers_utt_lin});
  reg.push_back({"ers_utt_ln_gain", &ers_utt_ln_gain});
  reg.push_back({"ers_utt_ln_bias", &ers_utt_ln_bias});
}

EaamVars make_leaves(ad::Graph& g, EaamParams& p) {
  EaamVars v;
  v.ars_cutoffs = g.leaf(p.ars_cutoffs);
  v.ars_mix = g.leaf(p.ars_mix);
  v.ars_conv1_wm = g.leaf(p.ars_conv1_wm);
  v.ars_conv1_w0 = g.leaf(p.ars_conv1_w0);
  v.ars_conv1_wp = g.leaf(p.ars_conv1_wp);
  v.ars_conv1_b = g.leaf(p.ars_conv1_b);
  v.ars_ln_gain = g.leaf(p.ars_ln_gain);
  v.ars_ln_bias = g.leaf(p.ars_ln_bias);
  v.ars_conv2_wm = g.leaf(p.ars_conv2_wm);
  v.ars_conv2_w0 = g.leaf(p.ars_conv2_w0);
  v.ars_conv2_wp = g.leaf(p.ars_conv2_wp);
  v.ars_conv2_b = g.leaf(p.ars_conv2_b);
  v.ars_proj = g.leaf(p.ars_proj);
  v.ers_lin = g.leaf(p.ers_lin);
  v.ers_conv_wm = g.leaf(p.ers_conv_wm);
  v.ers_conv_w0 = g.leaf(p.ers_conv_w0);
  v.ers_conv_wp = g.leaf(p.ers_conv_wp);
  v.ers_conv_b = g.leaf(p.ers_conv_b);
  v.ers_ln_gain = g.leaf(p.ers_ln_gain);
  v.ers_ln_bias = g.leaf(p.ers_ln_bias);
  v.ers_proj = g.leaf(p.ers_proj);
  v.ers_utt_lin = g.leaf(p.ers_utt_lin);
  v.ers_utt_ln_gain = g.leaf(p.ers_utt_ln_gain);
  v.ers_utt_ln_bias = g.leaf(p.ers_utt_ln_bias);
  v.sinc_len = p.sinc_len;
  return v;
}

Var ars_forward(ad::Graph& g, Var acu_frames, const EaamVars& p) {
  require(acu_frames.rows() >= 2, "ars_forward: needs at least two frames");
  require(acu_frames.cols() == p.ars_mix.rows(), "ars_forward: d_a mismatch");

  // Mixing and per-channel filtering commute (both linear, different axes);
  // mixing first keeps the depthwise pass at n_filters channels.
  Var mixed = ad::matmul(acu_frames, p.ars_mix);  // T x F
  Var kernels = ad::sinc_bandpass_kernels(p.ars_cutoffs, p.sinc_len);
  Var band = ad::depthwise_conv1d(mixed, kernels);  // T x F

  Var h = conv3(g, band, p.ars_conv1_wm, p.ars_conv1_w0, p.ars_conv1_wp, p.ars_conv1_b, Pad::zero);
  h = ad::layer_norm(h, p.ars_ln_gain, p.ars_ln_bias, kLayerNormEps);
  h = ad::leaky_relu(h, kLeakySlope);
  h = conv3(g, h, p.ars_conv2_wm, p.ars_conv2_w0, p.ars_conv2_wp, p.ars_conv2_b, Pad::zero);
  Var res = ad::add(h, band);

  return ad::matmul(res, p.ars_proj);
}

ErsOut ers_forward(ad::Graph& g, Var emo_frames, Var emo_utt, const EaamVars& p) {
  require(emo_frames.rows() >= 2, "ers_forward: needs at least two frames");
  require(emo_frames.cols() == p.ers_lin.rows(), "ers_forward: d_e mismatch");
  require(emo_utt.rows() == 1 && emo_utt.cols() == emo_frames.cols(),
          "ers_forward: utterance embedding dim mismatch");

  Var lin = ad::matmul(emo_frames, p.ers_lin);
  Var conv = conv3(g, emo_frames, p.ers_conv_wm, p.ers_conv_w0, p.ers_conv_wp, p.ers_conv_b,
                   Pad::replicate);
  Var summed = ad::add(lin, conv);
  Var normed = ad::layer_norm(summed, p.ers_ln_gain, p.ers_ln_bias, kLayerNormEps);
  Var frames = ad::matmul(normed, p.ers_proj);

  Var u = ad::matmul(emo_utt, p.ers_utt_lin);
  Var utt = ad::layer_norm(u, p.ers_utt_ln_gain, p.ers_utt_ln_bias, kLayerNormEps);
  return {frames, utt};
}

Var frame_discrepancy(ad::Graph& g, Var f_emo, Var f_acu) {
  require(f_emo.rows() == f_acu.rows() && f_emo.cols() == f_acu.cols(),
          "frame_discrepancy: shape mismatch");
  const int T = static_cast<int>(f_emo.rows());
  require(T >= 2, "frame_discrepancy: needs at least two frames");
  const int D = static_cast<int>(f_emo.cols());

  std::vector<int> cur(static_cast<size_t>(T - 1));
  std::vector<int> prev(static_cast<size_t>(T - 1));
  for (int t = 1; t < T; ++t) {
    cur[static_cast<size_t>(t - 1)] = t;
    prev[static_cast<size_t>(t - 1)] = t - 1;
  }
  Var de = ad::sub(ad::gather_rows(f_emo, cur), ad::gather_rows(f_emo, prev));
  Var da = ad::sub(ad::gather_rows(f_acu, cur), ad::gather_rows(f_acu, prev));
  Var rest = ad::scale(ad::row_sum(ad::abs(ad::sub(de, da))), 1.0 / D);  // (T-1) x 1
  return ad::vcat(g.constant(Eigen::MatrixXd::Zero(1, 1)), rest);
}

UttDiscrepancy utterance_discrepancy(ad::Graph&, Var f_emo, Var u_emo_p) {
  require(u_emo_p.rows() == 1 && u_emo_p.cols() == f_emo.cols(),
          "utterance_discrepancy: dim mismatch");
  const int D = static_cast<int>(f_emo.cols());
  Var u = ad::col_mean(f_emo);  // 1 x D
  Var d = ad::scale(ad::row_sum(ad::abs(ad::sub(u, u_emo_p))), 1.0 / D);
  return {u, d};
}

DualHead dual_head_weights(ad::Graph& g, Var d) {
  Var align = ad::sigmoid(ad::scale(d, -2.0));
  Var mis = ad::sub(g.constant(Eigen::MatrixXd::Ones(d.rows(), d.cols())), align);
  return {align, mis};
}

AlignedVars align_update(ad::Graph& g, Var f_emo, Var f_acu, Var u, Var u_emo_p,
                         Var d_fra, Var d_utt) {
  require(f_emo.rows() == f_acu.rows() && f_emo.cols() == f_acu.cols(),
          "align_update: stream shape mismatch");
  require(d_fra.rows() == f_emo.rows() && d_fra.cols() == 1, "align_update: d_fra shape");
  require(d_utt.rows() == 1 && d_utt.cols() == 1, "align_update: d_utt shape");
  const int D = static_cast<int>(f_emo.cols());

  DualHead frame = dual_head_weights(g, d_fra);
  Var ga = ad::broadcast_col(frame.align, D);
  Var gm = ad::broadcast_col(frame.mis, D);
  Var f_emo_p = ad::add(ad::cmul(ga, f_emo), ad::cmul(gm, f_acu));
  Var f_acu_p = ad::add(ad::cmul(ga, f_acu), ad::cmul(gm, f_emo));

  DualHead utt = dual_head_weights(g, d_utt);
  Var ua = ad::expand(utt.align, 1, D);
  Var um = ad::expand(utt.mis, 1, D);
  Var u_p = ad::add(ad::cmul(ua, u), ad::cmul(um, u_emo_p));

  AlignedVars out;
  out.f_emo_p = f_emo_p;
  out.f_acu_p = f_acu_p;
  out.u_p = u_p;
  out.u = u;
  out.d_fra = d_fra;
  out.d_utt = d_utt;
  out.gamma_align = frame.align;
  out.gamma_mis = frame.mis;
  out.gamma_align_utt = utt.align;
  out.gamma_mis_utt = utt.mis;
  return out;
}

AlignedVars eaam_forward(ad::Graph& g, Var emo_frames, Var emo_utt, Var acu_frames,
                         const EaamVars& p) {
  ErsOut ers = ers_forward(g, emo_frames, emo_utt, p);
  Var f_acu = ars_forward(g, acu_frames, p);
  Var d_fra = frame_discrepancy(g, ers.frames, f_acu);
  UttDiscrepancy ud = utterance_discrepancy(g, ers.frames, ers.utterance);
  return align_update(g, ers.frames, f_acu, ud.u, ers.utterance, d_fra, ud.d_utt);
}

AlignedFeatures snapshot(const AlignedVars& v) {
  AlignedFeatures f;
  f.f_emo_p = v.f_emo_p.value();
  f.f_acu_p = v.f_acu_p.value();
  f.u_p = v.u_p.value().row(0);
  f.u = v.u.value().row(0);
  f.d_fra = v.d_fra.value().col(0);
  f.d_utt = v.d_utt.item();
  f.gamma_align = v.gamma_align.value().col(0);
  f.gamma_mis = v.gamma_mis.value().col(0);
  f.gamma_align_utt = v.gamma_align_utt.item();
  f.gamma_mis_utt = v.gamma_mis_utt.item();
  return f;
}

}  // namespace eai::eaam
