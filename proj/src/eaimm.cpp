#include "eai/eaimm.hpp"

#include <algorithm>
#include <cmath>

#include "eai/errors.hpp"
#include "eai/param_init.hpp"

namespace eai::eaimm {

using ad::Var;

namespace {

constexpr double kAlphaClamp = 30.0;
constexpr double kCosEps = 1e-8;
constexpr double kGatSlope = 0.2;

std::vector<int> iota_range(int lo, int hi) {  // [lo, hi)
  std::vector<int> v(static_cast<size_t>(hi - lo));
  for (int i = lo; i < hi; ++i) v[static_cast<size_t>(i - lo)] = i;
  return v;
}

}  // namespace

void EvalConfig::validate() const {
  require(k >= 1, "eval config: k must be >= 1");
  require(tau > 0.0 && tau_nce > 0.0, "eval config: temperatures must be > 0");
  require(n_neg_far >= 0 && n_neg_shuffle >= 0, "eval config: negative counts must be >= 0");
  require(far_margin > k, "eval config: far_margin must exceed k");
}

void HigParams::init(int d_model, Rng& rng) {
  require(d_model > 0, "hig init: d_model must be positive");
  gat1_w = uniform_fan_in(d_model, d_model, d_model, rng);
  gat1_a = uniform_fan_in(2 * d_model, 1, 2.0 * d_model, rng);
  hg1_w = uniform_fan_in(d_model, d_model, d_model, rng);
  hg1_a = uniform_fan_in(2 * d_model, 1, 2.0 * d_model, rng);
  hg2_w = uniform_fan_in(d_model, d_model, d_model, rng);
  hg2_a = uniform_fan_in(2 * d_model, 1, 2.0 * d_model, rng);
}

void HigParams::validate() const {
  const Eigen::MatrixXd* all[] = {&gat1_w, &gat1_a, &hg1_w, &hg1_a, &hg2_w, &hg2_a};
  for (const auto* m : all) require(m->allFinite(), "hig params: non-finite weight");
}

void HigParams::append_registry(Registry& reg) {
  reg.push_back({"gat1_w", &gat1_w});
  reg.push_back({"gat1_a", &gat1_a});
  reg.push_back({"hg1_w", &hg1_w});
  reg.push_back({"hg1_a", &hg1_a});
  reg.push_back({"hg2_w", &hg2_w});
  reg.push_back({"hg2_a", &hg2_a});
}

HigVars make_leaves(ad::Graph& g, HigParams& p) {
  HigVars v;
  v.gat1_w = g.leaf(p.gat1_w);
  v.gat1_a = g.leaf(p.gat1_a);
  v.hg1_w = g.leaf(p.hg1_w);
  v.hg1_a = g.leaf(p.hg1_a);
  v.hg2_w = g.leaf(p.hg2_w);
  v.hg2_a = g.leaf(p.hg2_a);
  return v;
}

Var temporal_diffs(ad::Graph&, Var f) {
  const int T = static_cast<int>(f.rows());
  require(T >= 2, "temporal_diffs: needs at least two frames");
  std::vector<int> cur = iota_range(1, T);
  std::vector<int> prev = iota_range(0, T - 1);
  return ad::sub(ad::gather_rows(f, cur), ad::gather_rows(f, prev));
}

Eigen::VectorXd prototype(const Eigen::MatrixXd& diffs, const Eigen::MatrixXd& f1,
                          const Eigen::RowVectorXd& u_p, int t, const EvalConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(diffs.rows());
  require(t >= 0 && t < n, "prototype: index out of range");
  require(f1.rows() >= n, "prototype: f1 must cover every diff index");
  require(f1.cols() == diffs.cols() && u_p.size() == f1.cols(), "prototype: dim mismatch");

  Eigen::VectorXd g = Eigen::VectorXd::Zero(diffs.cols());
  double denom = 0.0;
  const int j_lo = std::max(0, t - cfg.k);
  const int j_hi = std::min(n - 1, t + cfg.k);
  for (int j = j_lo; j <= j_hi; ++j) {
    const double dot = u_p.dot(f1.row(j)) / cfg.tau;
    const double alpha = std::exp(std::clamp(dot, -kAlphaClamp, kAlphaClamp));
    g += alpha * diffs.row(j).transpose();
    denom += alpha;
  }
  return g / denom;
}

NegativePlan sample_negative_indices(int T, int t, const EvalConfig& cfg, Rng& rng) {
  const int n = T - 1;
  NegativePlan plan;

  std::vector<int> candidates;
  for (int j = 0; j < n; ++j) {
    if (std::abs(j - t) > cfg.far_margin) candidates.push_back(j);
  }
  if (static_cast<int>(candidates.size()) <= cfg.n_neg_far) {
    plan.far = candidates;  // take all, in order, no rng consumed
  } else {
    // Partial Fisher-Yates: exactly n_neg_far draws.
    for (int i = 0; i < cfg.n_neg_far; ++i) {
      const size_t j = static_cast<size_t>(i) +
                       static_cast<size_t>(rng.below(candidates.size() - static_cast<size_t>(i)));
      std::swap(candidates[static_cast<size_t>(i)], candidates[j]);
      plan.far.push_back(candidates[static_cast<size_t>(i)]);
    }
  }

  // Uniform ordered pair (a, b), a != b, of frame indices; f[b] - f[a] is
  // distributed like an adjacent pair of a uniformly shuffled frame order.
  for (int i = 0; i < cfg.n_neg_shuffle; ++i) {
    const int a = static_cast<int>(rng.below(static_cast<size_t>(T)));
    int b = static_cast<int>(rng.below(static_cast<size_t>(T - 1)));
    if (b >= a) ++b;
    plan.shuffle.emplace_back(a, b);
  }
  return plan;
}

std::vector<Eigen::VectorXd> sample_negatives(const Eigen::MatrixXd& diffs, int t,
                                              const EvalConfig& cfg, Rng& rng) {
  cfg.validate();
  const int T = static_cast<int>(diffs.rows()) + 1;
  require(t >= 0 && t < T - 1, "sample_negatives: index out of range");
  const NegativePlan plan = sample_negative_indices(T, t, cfg, rng);

  std::vector<Eigen::VectorXd> out;
  out.reserve(plan.far.size() + plan.shuffle.size());
  for (int j : plan.far) out.push_back(diffs.row(j).transpose());
  for (const auto& [a, b] : plan.shuffle) {
    // f[b] - f[a] telescopes over consecutive diffs.
    Eigen::VectorXd v = Eigen::VectorXd::Zero(diffs.cols());
    if (b > a) {
      for (int j = a; j < b; ++j) v += diffs.row(j).transpose();
    } else {
      for (int j = b; j < a; ++j) v -= diffs.row(j).transpose();
    }
    out.push_back(std::move(v));
  }
  return out;
}

Var eval_loss(ad::Graph& g, Var f_emo_p, Var f1, Var u_p, const EvalConfig& cfg, Rng& rng) {
  cfg.validate();
  const int T = static_cast<int>(f_emo_p.rows());
  require(T >= 2, "eval_loss: needs at least two frames");
  const int n = T - 1;
  const int D = static_cast<int>(f_emo_p.cols());
  require(f1.rows() == T && f1.cols() == D, "eval_loss: f1 shape mismatch");
  require(u_p.rows() == 1 && u_p.cols() == D, "eval_loss: u_p shape mismatch");

  Var diffs = temporal_diffs(g, f_emo_p);  // n x D

  // Prototype weights depend only on the source index j.
  Var dots = ad::matmul(f1, ad::transpose(u_p));  // T x 1
  Var aexp = ad::exp(ad::clamp(ad::scale(dots, 1.0 / cfg.tau), -kAlphaClamp, kAlphaClamp));

  std::vector<int> nb_j;
  std::vector<int> nb_seg;
  for (int t = 0; t < n; ++t) {
    for (int j = std::max(0, t - cfg.k); j <= std::min(n - 1, t + cfg.k); ++j) {
      nb_j.push_back(j);
      nb_seg.push_back(t);
    }
  }
  Var alpha_e = ad::gather_rows(aexp, nb_j);  // E x 1
  Var weighted = ad::cmul(ad::broadcast_col(alpha_e, D), ad::gather_rows(diffs, nb_j));
  Var num = ad::segment_sum(weighted, nb_seg, n);
  Var den = ad::segment_sum(alpha_e, nb_seg, n);
  Var proto = ad::cdiv(num, ad::broadcast_col(den, D));  // n x D

  Var pos_logit = ad::scale(ad::cosine_rows(diffs, proto, kCosEps), 1.0 / cfg.tau_nce);

  // Negatives, rng consumed in ascending anchor order. Far negatives select a
  // diff row; shuffle negatives are signed runs of diffs. Both are linear in
  // diffs, so one constant selector matrix builds them all.
  std::vector<NegativePlan> plans;
  plans.reserve(static_cast<size_t>(n));
  size_t e_neg = 0;
  for (int t = 0; t < n; ++t) {
    plans.push_back(sample_negative_indices(T, t, cfg, rng));
    e_neg += plans.back().far.size() + plans.back().shuffle.size();
  }
  if (e_neg == 0) return g.constant(Eigen::MatrixXd::Zero(1, 1));

  Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(e_neg), n);
  std::vector<int> owner;
  owner.reserve(e_neg);
  Eigen::Index row = 0;
  for (int t = 0; t < n; ++t) {
    for (int j : plans[static_cast<size_t>(t)].far) {
      sel(row, j) = 1.0;
      owner.push_back(t);
      ++row;
    }
    for (const auto& [a, b] : plans[static_cast<size_t>(t)].shuffle) {
      if (b > a) {
        for (int j = a; j < b; ++j) sel(row, j) = 1.0;
      } else {
        for (int j = b; j < a; ++j) sel(row, j) = -1.0;
      }
      owner.push_back(t);
      ++row;
    }
  }

  Var negs = ad::matmul(g.constant(sel), diffs);      // e_neg x D
  Var anchors = ad::gather_rows(diffs, owner);        // e_neg x D
  Var neg_logit = ad::scale(ad::cosine_rows(anchors, negs, kCosEps), 1.0 / cfg.tau_nce);

  // Detached per-anchor max keeps exp bounded; the log-sum-exp value and
  // gradient are invariant to the shift. Anchors without negatives come out
  // exactly zero.
  Eigen::MatrixXd shift = pos_logit.value();
  for (size_t i = 0; i < owner.size(); ++i) {
    shift(owner[i], 0) =
        std::max(shift(owner[i], 0), neg_logit.value()(static_cast<Eigen::Index>(i), 0));
  }
  Eigen::MatrixXd shift_neg(static_cast<Eigen::Index>(e_neg), 1);
  for (size_t i = 0; i < owner.size(); ++i) {
    shift_neg(static_cast<Eigen::Index>(i), 0) = shift(owner[i], 0);
  }

  Var epos = ad::exp(ad::sub(pos_logit, g.constant(shift)));
  Var eneg = ad::exp(ad::sub(neg_logit, g.constant(shift_neg)));
  Var denom = ad::add(epos, ad::segment_sum(eneg, owner, n));
  Var ell = ad::sub(ad::add(ad::log(denom), g.constant(shift)), pos_logit);
  return ad::scale(ad::sum_all(ell), 1.0 / n);
}

Var gat_layer(ad::Graph&, Var x_nodes, Var w, Var a, const GatEdges& edges) {
  require(x_nodes.cols() == w.rows(), "gat_layer: node dim mismatch");
  const int D = static_cast<int>(w.cols());
  require(a.rows() == 2 * D && a.cols() == 1, "gat_layer: attention vector must be 2Dx1");
  require(edges.seg.size() == edges.dst.size() && edges.dst.size() == edges.src.size(),
          "gat_layer: ragged edge list");
  require(edges.n_dst >= 1, "gat_layer: no destinations");

  Var h = ad::matmul(x_nodes, w);  // N x D
  Var hd = ad::gather_rows(h, edges.dst);
  Var hs = ad::gather_rows(h, edges.src);
  Var a_dst = ad::gather_rows(a, iota_range(0, D));      // D x 1
  Var a_src = ad::gather_rows(a, iota_range(D, 2 * D));  // D x 1
  Var logits = ad::leaky_relu(ad::add(ad::matmul(hd, a_dst), ad::matmul(hs, a_src)), kGatSlope);
  Var alpha = ad::segment_softmax(logits, edges.seg, edges.n_dst);
  Var msg = ad::cmul(ad::broadcast_col(alpha, D), hs);
  return ad::elu(ad::segment_sum(msg, edges.seg, edges.n_dst));
}

namespace {

// Frame destinations with temporal neighbors; optionally one extra source per
// frame (extra_base + t for index-aligned, or a single shared node id).
GatEdges frame_edges(int T, int extra_node_base, bool extra_shared) {
  GatEdges e;
  e.n_dst = T;
  for (int t = 0; t < T; ++t) {
    auto push = [&](int src) {
      e.seg.push_back(t);
      e.dst.push_back(t);
      e.src.push_back(src);
    };
    push(t);  // self
    if (t > 0) push(t - 1);
    if (t + 1 < T) push(t + 1);
    if (extra_node_base >= 0) push(extra_shared ? extra_node_base : extra_node_base + t);
  }
  return e;
}

}  // namespace

Var gat_frame(ad::Graph& g, Var f, const HigVars& p) {
  const int T = static_cast<int>(f.rows());
  require(T >= 1, "gat_frame: empty input");
  return gat_layer(g, f, p.gat1_w, p.gat1_a, frame_edges(T, -1, false));
}

HigOut hig_forward(ad::Graph& g, Var f1, Var u_p, Var f_acu_p, const HigVars& p) {
  const int T = static_cast<int>(f1.rows());
  require(T >= 1, "hig_forward: empty input");
  require(u_p.rows() == 1 && u_p.cols() == f1.cols(), "hig_forward: u_p shape mismatch");
  require(f_acu_p.rows() == T && f_acu_p.cols() == f1.cols(),
          "hig_forward: acoustic shape mismatch");

  // Stage 1: frames + utterance node (id T).
  Var nodes1 = ad::vcat(f1, u_p);
  Var stage1 = gat_layer(g, nodes1, p.hg1_w, p.hg1_a, frame_edges(T, T, true));

  // Stage 2: stage-1 frames + acoustic nodes (ids T + t).
  Var nodes2 = ad::vcat(stage1, f_acu_p);
  Var frames = gat_layer(g, nodes2, p.hg2_w, p.hg2_a, frame_edges(T, T, false));

  Var readout = ad::hcat(ad::col_mean(frames), ad::col_max(frames));
  return {frames, readout};
}

}  // namespace eai::eaimm
