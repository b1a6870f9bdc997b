#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "eai/autodiff.hpp"
#include "eai/eaam.hpp"
#include "eai/errors.hpp"
#include "eai/rng.hpp"
#include "reference.hpp"

using eai::Rng;
using eai::ValidationError;
namespace ad = eai::ad;
namespace eaam = eai::eaam;

namespace {

Eigen::MatrixXd randm(int r, int c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

}  // namespace

TEST_CASE("band-pass stage: mixing and filtering commute") {
  Rng rng(11);
  eaam::EaamParams p;
  p.init(3, 5, 4, 9, rng);
  const int T = 12;
  const Eigen::MatrixXd x = randm(T, 5, rng);

  ad::Graph g;
  ad::Var band = ad::depthwise_conv1d(ad::matmul(g.constant(x), g.constant(p.ars_mix)),
                                      ad::sinc_bandpass_kernels(g.constant(p.ars_cutoffs), 9));
  const Eigen::MatrixXd produced = band.value();

  // Alternate route: filter every raw channel with band f's kernel, then mix.
  const Eigen::MatrixXd kernels = ref::sinc_kernels(p.ars_cutoffs, 9);
  Eigen::MatrixXd alt(T, 4);
  for (int f = 0; f < 4; ++f) {
    Eigen::MatrixXd k_rep(5, 9);
    for (int j = 0; j < 5; ++j) k_rep.row(j) = kernels.row(f);
    alt.col(f) = ref::depthwise_conv(x, k_rep) * p.ars_mix.col(f);
  }
  CHECK((produced - alt).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("freshly initialized acoustic stream maps zero input to exact zero") {
  Rng rng(2);
  eaam::EaamParams p;
  p.init(3, 5, 4, 9, rng);
  ad::Graph g;
  eaam::EaamVars v = eaam::make_leaves(g, p);
  ad::Var out = eaam::ars_forward(g, g.constant(Eigen::MatrixXd::Zero(6, 5)), v);
  CHECK(out.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frame discrepancy worked example") {
  ad::Graph g;
  Eigen::MatrixXd fe(3, 2);
  fe << 0, 0, 1, 1, 3, 3;
  Eigen::MatrixXd fa(3, 2);
  fa << 0, 0, 1, 1, 1, 1;
  ad::Var d = eaam::frame_discrepancy(g, g.constant(fe), g.constant(fa));
  REQUIRE(d.rows() == 3);
  REQUIRE(d.cols() == 1);
  CHECK(d.value()(0, 0) == 0.0);
  CHECK(d.value()(1, 0) == 0.0);
  CHECK(d.value()(2, 0) == doctest::Approx(2.0).epsilon(1e-12));

  ad::Graph g2;
  CHECK_THROWS_AS(eaam::frame_discrepancy(g2, g2.constant(fe), g2.constant(Eigen::MatrixXd::Zero(3, 3))),
                  ValidationError);
}

TEST_CASE("utterance discrepancy worked example") {
  ad::Graph g;
  Eigen::MatrixXd fe(2, 2);
  fe << 1, 3, 3, 7;
  Eigen::MatrixXd up(1, 2);
  up << 1, 1;
  eaam::UttDiscrepancy ud = eaam::utterance_discrepancy(g, g.constant(fe), g.constant(up));
  CHECK(ud.u.value()(0, 0) == doctest::Approx(2.0));
  CHECK(ud.u.value()(0, 1) == doctest::Approx(5.0));
  CHECK(ud.d_utt.item() == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("dual head weights: exact half at zero, complementary, monotone") {
  ad::Graph g;
  Eigen::MatrixXd d(7, 1);
  d << 0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 20.0;
  eaam::DualHead h = eaam::dual_head_weights(g, g.constant(d));

  CHECK(h.align.value()(0, 0) == 0.5);
  CHECK(h.mis.value()(0, 0) == 0.5);
  CHECK(h.align.value()(2, 0) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-15));
  CHECK(h.align.value()(6, 0) < 1e-17);

  double prev = 1.0;
  for (int i = 0; i < 7; ++i) {
    const double a = h.align.value()(i, 0);
    const double m = h.mis.value()(i, 0);
    CHECK(a > 0.0);
    CHECK(a <= 0.5);
    CHECK(std::abs(a + m - 1.0) <= std::numeric_limits<double>::epsilon());
    CHECK(a < prev);
    prev = a;
  }
}

TEST_CASE("align update is the dual-head convex recombination") {
  Rng rng(7);
  const int T = 5;
  const int D = 3;
  const Eigen::MatrixXd fe = randm(T, D, rng);
  const Eigen::MatrixXd fa = randm(T, D, rng);
  const Eigen::MatrixXd u = randm(1, D, rng);
  const Eigen::MatrixXd up = randm(1, D, rng);
  Eigen::MatrixXd dfra = randm(T, 1, rng).cwiseAbs();
  dfra(0, 0) = 0.0;
  Eigen::MatrixXd dutt(1, 1);
  dutt << 0.8;

  ad::Graph g;
  eaam::AlignedVars av = eaam::align_update(g, g.constant(fe), g.constant(fa), g.constant(u),
                                            g.constant(up), g.constant(dfra), g.constant(dutt));

  for (int t = 0; t < T; ++t) {
    const double ga = 1.0 / (1.0 + std::exp(2.0 * dfra(t, 0)));
    const double gm = 1.0 - ga;
    for (int i = 0; i < D; ++i) {
      const double ep = ga * fe(t, i) + gm * fa(t, i);
      const double ap = ga * fa(t, i) + gm * fe(t, i);
      CHECK(av.f_emo_p.value()(t, i) == doctest::Approx(ep).epsilon(1e-12));
      CHECK(av.f_acu_p.value()(t, i) == doctest::Approx(ap).epsilon(1e-12));
      // Convexity: outputs stay inside the per-entry envelope of the streams.
      const double lo = std::min(fe(t, i), fa(t, i));
      const double hi = std::max(fe(t, i), fa(t, i));
      CHECK(av.f_emo_p.value()(t, i) >= lo - 1e-12);
      CHECK(av.f_emo_p.value()(t, i) <= hi + 1e-12);
    }
  }
  for (int i = 0; i < D; ++i) {
    const double lo = std::min(u(0, i), up(0, i));
    const double hi = std::max(u(0, i), up(0, i));
    CHECK(av.u_p.value()(0, i) >= lo - 1e-12);
    CHECK(av.u_p.value()(0, i) <= hi + 1e-12);
  }
  // At zero frame discrepancy the recombination is an even blend.
  CHECK(av.f_emo_p.value()(0, 0) ==
        doctest::Approx(0.5 * (fe(0, 0) + fa(0, 0))).epsilon(1e-12));
}

TEST_CASE("emotion stream preserves time-constant inputs under replicate padding") {
  Rng rng(4);
  eaam::EaamParams p;
  p.init(3, 5, 4, 9, rng);
  ad::Graph g;
  eaam::EaamVars v = eaam::make_leaves(g, p);

  Eigen::MatrixXd emo(6, 3);
  for (int t = 0; t < 6; ++t) emo.row(t) << 0.3, -1.2, 0.7;
  const Eigen::MatrixXd utt = randm(1, 3, rng);
  eaam::ErsOut out = eaam::ers_forward(g, g.constant(emo), g.constant(utt), v);

  const Eigen::MatrixXd f = out.frames.value();
  for (int t = 1; t < 6; ++t) {
    CHECK((f.row(t) - f.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("full module forward: shapes, invariants, snapshot agreement") {
  Rng rng(9);
  eaam::EaamParams p;
  p.init(3, 5, 4, 9, rng);
  ad::Graph g;
  eaam::EaamVars v = eaam::make_leaves(g, p);

  const int T = 7;
  const Eigen::MatrixXd emo = randm(T, 3, rng);
  const Eigen::MatrixXd utt = randm(1, 3, rng);
  const Eigen::MatrixXd acu = randm(T, 5, rng);
  eaam::AlignedVars av =
      eaam::eaam_forward(g, g.constant(emo), g.constant(utt), g.constant(acu), v);

  CHECK(av.f_emo_p.rows() == T);
  CHECK(av.f_emo_p.cols() == 4);
  CHECK(av.f_acu_p.rows() == T);
  CHECK(av.u_p.rows() == 1);
  CHECK(av.u_p.cols() == 4);
  CHECK(av.d_fra.rows() == T);
  CHECK(av.d_fra.value()(0, 0) == 0.0);
  for (int t = 1; t < T; ++t) CHECK(av.d_fra.value()(t, 0) >= 0.0);
  CHECK(av.d_utt.item() >= 0.0);
  CHECK(av.gamma_align.value()(0, 0) == 0.5);

  const eaam::AlignedFeatures s = eaam::snapshot(av);
  CHECK(s.f_emo_p == av.f_emo_p.value());
  CHECK(s.f_acu_p == av.f_acu_p.value());
  CHECK(s.d_utt == av.d_utt.item());
  CHECK(s.gamma_align.size() == T);
  CHECK(s.f_emo_p.allFinite());
  CHECK(s.gamma_align_utt + s.gamma_mis_utt == doctest::Approx(1.0).epsilon(1e-15));

  // Gradients flow end to end.
  ad::Var loss = ad::sum_all(ad::cmul(av.f_emo_p, av.f_emo_p));
  g.backward(loss);
  CHECK(v.ars_mix.grad().allFinite());
  CHECK(v.ers_lin.grad().allFinite());
  CHECK(v.ars_cutoffs.grad().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("stream input validation") {
  Rng rng(3);
  eaam::EaamParams p;
  p.init(3, 5, 4, 9, rng);

  {
    ad::Graph g;
    eaam::EaamVars v = eaam::make_leaves(g, p);
    CHECK_THROWS_AS(eaam::ars_forward(g, g.constant(Eigen::MatrixXd::Zero(6, 4)), v),
                    ValidationError);  // wrong d_a
  }
  {
    ad::Graph g;
    eaam::EaamVars v = eaam::make_leaves(g, p);
    CHECK_THROWS_AS(eaam::ars_forward(g, g.constant(Eigen::MatrixXd::Zero(1, 5)), v),
                    ValidationError);  // one frame
  }
  {
    ad::Graph g;
    eaam::EaamVars v = eaam::make_leaves(g, p);
    CHECK_THROWS_AS(eaam::ers_forward(g, g.constant(Eigen::MatrixXd::Zero(6, 3)),
                                      g.constant(Eigen::MatrixXd::Zero(1, 4)), v),
                    ValidationError);  // utterance dim mismatch
  }
}

TEST_CASE("parameter init and validation") {
  Rng rng(1);
  eaam::EaamParams p;
  p.init(3, 5, 4, 9, rng);
  CHECK_NOTHROW(p.validate());
  CHECK(p.ars_cutoffs.rows() == 4);
  for (int f = 0; f < 4; ++f) {
    CHECK(p.ars_cutoffs(f, 0) > 0.0);
    CHECK(p.ars_cutoffs(f, 0) < p.ars_cutoffs(f, 1));
    CHECK(p.ars_cutoffs(f, 1) <= 0.5);
    if (f > 0) CHECK(p.ars_cutoffs(f, 0) > p.ars_cutoffs(f - 1, 0));
  }
  // Adjacent bands tile: band f's high edge is band f+1's low edge.
  for (int f = 0; f + 1 < 4; ++f) {
    CHECK(p.ars_cutoffs(f, 1) == doctest::Approx(p.ars_cutoffs(f + 1, 0)).epsilon(1e-12));
  }

  eaam::EaamParams bad = p;
  bad.ars_cutoffs(1, 0) = bad.ars_cutoffs(1, 1);
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  eaam::EaamParams nan_weight = p;
  nan_weight.ers_lin(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nan_weight.validate(), ValidationError);

  CHECK_THROWS_AS(p.init(3, 5, 4, 8, rng), ValidationError);  // even sinc_len

  eai::Registry reg;
  p.append_registry(reg);
  CHECK(reg.size() == 24);
}
