#include "eai/model.hpp"

#include <algorithm>
#include <cmath>

#include "eai/binio.hpp"
#include "eai/errors.hpp"
#include "eai/param_init.hpp"

namespace eai::model {

using ad::Var;

namespace {

const std::string kMagic = "EAIM";
constexpr uint32_t kVersion = 1;
constexpr double kCutoffMargin = 1e-4;

int label_index(feat::Label label) { return label == feat::Label::bonafide ? 0 : 1; }

}  // namespace

uint8_t AblationFlags::to_byte() const {
  return static_cast<uint8_t>((no_eaam ? 1 : 0) | (no_eval ? 2 : 0) | (no_hig ? 4 : 0));
}

AblationFlags AblationFlags::from_byte(uint8_t b) {
  require((b & ~0x07u) == 0, "checkpoint: unknown ablation flag bits");
  AblationFlags f;
  f.no_eaam = (b & 1) != 0;
  f.no_eval = (b & 2) != 0;
  f.no_hig = (b & 4) != 0;
  return f;
}

void ModelConfig::validate() const {
  require(d_e > 0 && d_a > 0 && d_model > 0, "model config: dims must be positive");
  require(sinc_len >= 3 && sinc_len % 2 == 1, "model config: sinc_len must be odd and >= 3");
}

ModelParameters ModelParameters::init(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelParameters p;
  p.config = cfg;
  Rng rng(seed);
  p.eaam.init(cfg.d_e, cfg.d_a, cfg.d_model, cfg.sinc_len, rng);
  p.hig.init(cfg.d_model, rng);
  p.cls_w = uniform_fan_in(2 * cfg.d_model, 2, 2.0 * cfg.d_model, rng);
  p.cls_b = Eigen::MatrixXd::Zero(1, 2);
  p.s = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

Registry ModelParameters::registry() {
  Registry reg;
  eaam.append_registry(reg);
  hig.append_registry(reg);
  reg.push_back({"cls_w", &cls_w});
  reg.push_back({"cls_b", &cls_b});
  reg.push_back({"s", &s});
  return reg;
}

void ModelParameters::validate() const {
  config.validate();
  eaam.validate();
  hig.validate();
  require(cls_w.allFinite() && cls_b.allFinite() && s.allFinite(),
          "model params: non-finite classifier or s");
  require(cls_w.rows() == 2 * config.d_model && cls_w.cols() == 2,
          "model params: classifier shape mismatch");
}

void ModelParameters::constrain() {
  for (Eigen::Index f = 0; f < eaam.ars_cutoffs.rows(); ++f) {
    double lo = eaam.ars_cutoffs(f, 0);
    double hi = eaam.ars_cutoffs(f, 1);
    lo = std::clamp(lo, kCutoffMargin, 0.5 - 2.0 * kCutoffMargin);
    hi = std::clamp(hi, lo + kCutoffMargin, 0.5);
    eaam.ars_cutoffs(f, 0) = lo;
    eaam.ars_cutoffs(f, 1) = hi;
  }
}

ParamLeaves make_param_leaves(ad::Graph& g, ModelParameters& p) {
  ParamLeaves l;
  l.eaam = eaam::make_leaves(g, p.eaam);
  l.hig = eaimm::make_leaves(g, p.hig);
  l.cls_w = g.leaf(p.cls_w);
  l.cls_b = g.leaf(p.cls_b);
  l.s = p.config.ablation.no_eval ? g.constant(p.s) : g.leaf(p.s);

  // Same order as registry().
  l.ordered = {l.eaam.ars_cutoffs, l.eaam.ars_mix,
               l.eaam.ars_conv1_wm, l.eaam.ars_conv1_w0, l.eaam.ars_conv1_wp, l.eaam.ars_conv1_b,
               l.eaam.ars_ln_gain, l.eaam.ars_ln_bias,
               l.eaam.ars_conv2_wm, l.eaam.ars_conv2_w0, l.eaam.ars_conv2_wp, l.eaam.ars_conv2_b,
               l.eaam.ars_proj,
               l.eaam.ers_lin, l.eaam.ers_conv_wm, l.eaam.ers_conv_w0, l.eaam.ers_conv_wp,
               l.eaam.ers_conv_b, l.eaam.ers_ln_gain, l.eaam.ers_ln_bias, l.eaam.ers_proj,
               l.eaam.ers_utt_lin, l.eaam.ers_utt_ln_gain, l.eaam.ers_utt_ln_bias,
               l.hig.gat1_w, l.hig.gat1_a, l.hig.hg1_w, l.hig.hg1_a, l.hig.hg2_w, l.hig.hg2_a,
               l.cls_w, l.cls_b, l.s};
  return l;
}

ForwardGraph build_forward(ad::Graph& g, const feat::FeatureBundle& bundle,
                           ModelParameters& params) {
  bundle.validate();
  params.validate();
  const ModelConfig& cfg = params.config;
  require(bundle.dim_emo() == cfg.d_e && bundle.dim_acu() == cfg.d_a,
          "forward: bundle dims do not match model dims");
  const int T = static_cast<int>(bundle.frames());
  const int D = cfg.d_model;

  ForwardGraph out;
  out.leaves = make_param_leaves(g, params);
  const ParamLeaves& l = out.leaves;

  Var emo = g.constant(bundle.emo_frames);
  Var utt = g.constant(bundle.emo_utt.transpose());
  Var acu = g.constant(bundle.acu_frames);

  if (cfg.ablation.no_eaam) {
    // Pass-through projections; no filtering, no normalization, no
    // cross-stream recombination. Diagnostics report fully aligned weights.
    out.aligned.f_emo_p = ad::matmul(emo, l.eaam.ers_lin);
    out.aligned.f_acu_p = ad::matmul(acu, l.eaam.ars_mix);
    out.aligned.u_p = ad::matmul(utt, l.eaam.ers_utt_lin);
    out.aligned.u = ad::col_mean(out.aligned.f_emo_p);
    out.aligned.d_fra = g.constant(Eigen::MatrixXd::Zero(T, 1));
    out.aligned.d_utt = g.constant(Eigen::MatrixXd::Zero(1, 1));
    out.aligned.gamma_align = g.constant(Eigen::MatrixXd::Constant(T, 1, 0.5));
    out.aligned.gamma_mis = g.constant(Eigen::MatrixXd::Constant(T, 1, 0.5));
    out.aligned.gamma_align_utt = g.constant(Eigen::MatrixXd::Constant(1, 1, 0.5));
    out.aligned.gamma_mis_utt = g.constant(Eigen::MatrixXd::Constant(1, 1, 0.5));
  } else {
    out.aligned = eaam::eaam_forward(g, emo, utt, acu, l.eaam);
  }

  if (cfg.ablation.no_hig) {
    out.f1 = out.aligned.f_emo_p;
    out.readout = ad::hcat(ad::col_mean(out.aligned.f_emo_p), ad::col_max(out.aligned.f_emo_p));
  } else {
    out.f1 = eaimm::gat_frame(g, out.aligned.f_emo_p, l.hig);
    eaimm::HigOut hig = eaimm::hig_forward(g, out.f1, out.aligned.u_p, out.aligned.f_acu_p, l.hig);
    out.readout = hig.readout;
  }
  require(out.readout.cols() == 2 * D, "forward: readout width mismatch");

  out.logits = ad::add(ad::matmul(out.readout, l.cls_w), l.cls_b);
  return out;
}

LossGraph build_total_loss(ad::Graph& g, const feat::FeatureBundle& bundle,
                           ModelParameters& params, const eaimm::EvalConfig& cfg, Rng& rng) {
  LossGraph out;
  out.fwd = build_forward(g, bundle, params);
  out.ce = ad::softmax_cross_entropy(out.fwd.logits, label_index(bundle.label));
  if (params.config.ablation.no_eval) {
    out.eval = g.constant(Eigen::MatrixXd::Zero(1, 1));
  } else {
    out.eval = eaimm::eval_loss(g, out.fwd.aligned.f_emo_p, out.fwd.f1, out.fwd.aligned.u_p,
                                cfg, rng);
  }
  Var weighted = ad::cmul(ad::exp(ad::neg(out.fwd.leaves.s)), out.eval);
  out.total = ad::add(ad::add(out.ce, weighted), out.fwd.leaves.s);
  return out;
}

Forward forward(const feat::FeatureBundle& bundle, ModelParameters& params) {
  ad::Graph g;
  ForwardGraph fg = build_forward(g, bundle, params);
  Forward f;
  f.logits = Eigen::Vector2d(fg.logits.value()(0, 0), fg.logits.value()(0, 1));
  f.aligned = eaam::snapshot(fg.aligned);
  f.readout = fg.readout.value().row(0);
  return f;
}

namespace {

LossBreakdown breakdown_of(const LossGraph& lg) {
  LossBreakdown b;
  b.ce = lg.ce.item();
  b.eval = lg.eval.item();
  b.s = lg.fwd.leaves.s.item();
  b.total = lg.total.item();
  return b;
}

}  // namespace

LossBreakdown total_loss(const feat::FeatureBundle& bundle, ModelParameters& params,
                         const eaimm::EvalConfig& cfg, Rng& rng) {
  ad::Graph g;
  LossGraph lg = build_total_loss(g, bundle, params, cfg, rng);
  return breakdown_of(lg);
}

void Gradients::add_scaled(const Gradients& other, double c) {
  require(tensors.size() == other.tensors.size(), "gradients: size mismatch");
  for (size_t i = 0; i < tensors.size(); ++i) tensors[i] += c * other.tensors[i];
}

void Gradients::scale_all(double c) {
  for (auto& t : tensors) t *= c;
}

Gradients backward(const feat::FeatureBundle& bundle, ModelParameters& params,
                   const eaimm::EvalConfig& cfg, Rng& rng) {
  ad::Graph g;
  LossGraph lg = build_total_loss(g, bundle, params, cfg, rng);
  g.backward(lg.total);
  Gradients grads;
  grads.breakdown = breakdown_of(lg);
  grads.tensors.reserve(lg.fwd.leaves.ordered.size());
  for (const Var& leaf : lg.fwd.leaves.ordered) grads.tensors.push_back(leaf.grad());
  return grads;
}

double score(const feat::FeatureBundle& bundle, ModelParameters& params) {
  ad::Graph g;
  ForwardGraph fg = build_forward(g, bundle, params);
  return fg.logits.value()(0, 0) - fg.logits.value()(0, 1);
}

void save_checkpoint(ModelParameters& params, const std::filesystem::path& path) {
  params.validate();
  std::vector<uint8_t> buf;
  binio::put_bytes(buf, kMagic);
  binio::put_u32(buf, kVersion);
  binio::put_u32(buf, static_cast<uint32_t>(params.config.d_e));
  binio::put_u32(buf, static_cast<uint32_t>(params.config.d_a));
  binio::put_u32(buf, static_cast<uint32_t>(params.config.d_model));
  binio::put_u32(buf, static_cast<uint32_t>(params.config.sinc_len));
  binio::put_u8(buf, params.config.ablation.to_byte());

  Registry reg = params.registry();
  binio::put_u32(buf, static_cast<uint32_t>(reg.size()));
  for (const NamedTensor& t : reg) {
    require(t.name.size() <= 0xFFFF, "checkpoint: tensor name too long");
    binio::put_u16(buf, static_cast<uint16_t>(t.name.size()));
    binio::put_bytes(buf, t.name);
    binio::put_u32(buf, static_cast<uint32_t>(t.tensor->rows()));
    binio::put_u32(buf, static_cast<uint32_t>(t.tensor->cols()));
    for (Eigen::Index r = 0; r < t.tensor->rows(); ++r) {
      for (Eigen::Index c = 0; c < t.tensor->cols(); ++c) {
        binio::put_f64(buf, (*t.tensor)(r, c));
      }
    }
  }
  binio::write_file(path, buf);
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
  const std::vector<uint8_t> buf = binio::read_file(path);
  binio::Reader r(buf);
  require(r.get_bytes(4) == kMagic, "checkpoint: bad magic");
  const uint32_t version = r.get_u32();
  require(version == kVersion, "checkpoint: unsupported version: " + std::to_string(version));

  ModelConfig cfg;
  cfg.d_e = static_cast<int>(r.get_u32());
  cfg.d_a = static_cast<int>(r.get_u32());
  cfg.d_model = static_cast<int>(r.get_u32());
  cfg.sinc_len = static_cast<int>(r.get_u32());
  cfg.ablation = AblationFlags::from_byte(r.get_u8());
  cfg.validate();

  // Template instance pins the expected tensor names and shapes.
  ModelParameters params = ModelParameters::init(cfg, 0);
  Registry reg = params.registry();
  const uint32_t n_tensors = r.get_u32();
  require(n_tensors == reg.size(), "checkpoint: tensor count mismatch");
  for (NamedTensor& t : reg) {
    const uint16_t name_len = r.get_u16();
    const std::string name = r.get_bytes(name_len);
    require(name == t.name, "checkpoint: expected tensor '" + t.name + "', found '" + name + "'");
    const uint32_t rows = r.get_u32();
    const uint32_t cols = r.get_u32();
    require(rows == static_cast<uint32_t>(t.tensor->rows()) &&
                cols == static_cast<uint32_t>(t.tensor->cols()),
            "checkpoint: shape mismatch for tensor '" + t.name + "'");
    for (uint32_t i = 0; i < rows; ++i) {
      for (uint32_t j = 0; j < cols; ++j) {
        (*t.tensor)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.get_f64();
      }
    }
  }
  require(r.at_end(), "checkpoint: trailing data after payload");
  params.validate();
  return params;
}

}  // namespace eai::model
