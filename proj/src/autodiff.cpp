#include "eai/autodiff.hpp"

#include <cmath>
#include <limits>

#include "eai/errors.hpp"

namespace eai::ad {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch");
}

void check_same_graph(const Var& a, const Var& b, const char* op) {
  require(a.graph() == b.graph(), std::string(op) + ": operands from different graphs");
}

}  // namespace

void Node::accumulate(const Eigen::MatrixXd& g) {
  if (!requires_grad) return;
  if (!has_grad) {
    grad = g;
    has_grad = true;
  } else {
    grad += g;
  }
}

Eigen::MatrixXd Var::grad() const {
  if (node_->has_grad) return node_->grad;
  return Eigen::MatrixXd::Zero(node_->value.rows(), node_->value.cols());
}

double Var::item() const {
  require(rows() == 1 && cols() == 1, "item(): node is not 1x1");
  return node_->value(0, 0);
}

Var Graph::make(Eigen::MatrixXd value, bool requires_grad, std::function<void()> backfn) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backfn = std::move(backfn);
  return Var(&n, this);
}

Var Graph::leaf(const Eigen::MatrixXd& value) { return make(value, true, nullptr); }

Var Graph::constant(const Eigen::MatrixXd& value) { return make(value, false, nullptr); }

Var Graph::scalar(double value) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = value;
  return constant(m);
}

void Graph::backward(Var root) {
  require(!swept_, "backward(): graph already swept");
  require(root.graph() == this, "backward(): root from different graph");
  require(root.rows() == 1 && root.cols() == 1, "backward(): root must be 1x1");
  swept_ = true;
  root.node()->accumulate(Eigen::MatrixXd::Ones(1, 1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->has_grad && it->backfn) it->backfn();
  }
}

Var add(Var a, Var b) {
  check_same_graph(a, b, "add");
  check_same_shape(a, b, "add");
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad || b.node()->requires_grad;
  Var out = g.make(a.value() + b.value(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backfn = [an, bn, on] {
      an->accumulate(on->grad);
      bn->accumulate(on->grad);
    };
  }
  return out;
}

Var sub(Var a, Var b) {
  check_same_graph(a, b, "sub");
  check_same_shape(a, b, "sub");
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad || b.node()->requires_grad;
  Var out = g.make(a.value() - b.value(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backfn = [an, bn, on] {
      an->accumulate(on->grad);
      bn->accumulate(-on->grad);
    };
  }
  return out;
}

Var neg(Var a) { return scale(a, -1.0); }

Var cmul(Var a, Var b) {
  check_same_graph(a, b, "cmul");
  check_same_shape(a, b, "cmul");
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad || b.node()->requires_grad;
  Var out = g.make(a.value().cwiseProduct(b.value()), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backfn = [an, bn, on] {
      an->accumulate(on->grad.cwiseProduct(bn->value));
      bn->accumulate(on->grad.cwiseProduct(an->value));
    };
  }
  return out;
}

Var cdiv(Var a, Var b) {
  check_same_graph(a, b, "cdiv");
  check_same_shape(a, b, "cdiv");
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad || b.node()->requires_grad;
  Var out = g.make(a.value().cwiseQuotient(b.value()), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backfn = [an, bn, on] {
      an->accumulate(on->grad.cwiseQuotient(bn->value));
      bn->accumulate(-on->grad.cwiseProduct(on->value).cwiseQuotient(bn->value));
    };
  }
  return out;
}

Var scale(Var a, double c) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value() * c, req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on, c] { an->accumulate(on->grad * c); };
  }
  return out;
}

Var add_scalar(Var a, double c) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value().array() + c, req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] { an->accumulate(on->grad); };
  }
  return out;
}

Var matmul(Var a, Var b) {
  check_same_graph(a, b, "matmul");
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad || b.node()->requires_grad;
  Var out = g.make(a.value() * b.value(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backfn = [an, bn, on] {
      an->accumulate(on->grad * bn->value.transpose());
      bn->accumulate(an->value.transpose() * on->grad);
    };
  }
  return out;
}

Var transpose(Var a) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value().transpose(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] { an->accumulate(on->grad.transpose()); };
  }
  return out;
}

Var exp(Var a) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value().array().exp(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] { an->accumulate(on->grad.cwiseProduct(on->value)); };
  }
  return out;
}

Var log(Var a) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value().array().log(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] { an->accumulate(on->grad.cwiseQuotient(an->value)); };
  }
  return out;
}

Var sqrt(Var a) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value().array().sqrt(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] {
      an->accumulate((on->grad.array() / (2.0 * on->value.array())).matrix());
    };
  }
  return out;
}

Var abs(Var a) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value().array().abs(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] {
      const Eigen::ArrayXXd sign =
          (an->value.array() > 0.0).cast<double>() - (an->value.array() < 0.0).cast<double>();
      an->accumulate((on->grad.array() * sign).matrix());
    };
  }
  return out;
}

Var sigmoid(Var a) {
  Graph& g = *a.graph();
  // Two-branch form avoids overflow of exp for large |x|.
  Eigen::MatrixXd v = a.value().unaryExpr([](double x) {
    if (x >= 0.0) {
      return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  bool req = a.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] {
      const Eigen::ArrayXXd s = on->value.array();
      an->accumulate((on->grad.array() * s * (1.0 - s)).matrix());
    };
  }
  return out;
}

Var leaky_relu(Var a, double slope) {
  Graph& g = *a.graph();
  Eigen::MatrixXd v =
      a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  bool req = a.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on, slope] {
      const Eigen::ArrayXXd d =
          (an->value.array() > 0.0).select(Eigen::ArrayXXd::Ones(an->value.rows(), an->value.cols()),
                                           Eigen::ArrayXXd::Constant(an->value.rows(), an->value.cols(), slope));
      an->accumulate((on->grad.array() * d).matrix());
    };
  }
  return out;
}

Var elu(Var a) {
  Graph& g = *a.graph();
  Eigen::MatrixXd v =
      a.value().unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  bool req = a.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] {
      // d/dx = 1 for x > 0, e^x = value + 1 for x <= 0.
      const Eigen::ArrayXXd d = (an->value.array() > 0.0)
                                    .select(Eigen::ArrayXXd::Ones(an->value.rows(), an->value.cols()),
                                            on->value.array() + 1.0);
      an->accumulate((on->grad.array() * d).matrix());
    };
  }
  return out;
}

Var clamp(Var a, double lo, double hi) {
  require(lo < hi, "clamp: lo must be < hi");
  Graph& g = *a.graph();
  Eigen::MatrixXd v = a.value().cwiseMax(lo).cwiseMin(hi);
  bool req = a.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on, lo, hi] {
      const Eigen::ArrayXXd inside =
          ((an->value.array() > lo) && (an->value.array() < hi)).cast<double>();
      an->accumulate((on->grad.array() * inside).matrix());
    };
  }
  return out;
}

Var sum_all(Var a) {
  Graph& g = *a.graph();
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().sum();
  bool req = a.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] {
      an->accumulate(Eigen::MatrixXd::Constant(an->value.rows(), an->value.cols(), on->grad(0, 0)));
    };
  }
  return out;
}

Var row_sum(Var a) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value().rowwise().sum(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] {
      an->accumulate(on->grad * Eigen::MatrixXd::Ones(1, an->value.cols()));
    };
  }
  return out;
}

Var col_sum(Var a) {
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value().colwise().sum(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] {
      an->accumulate(Eigen::MatrixXd::Ones(an->value.rows(), 1) * on->grad);
    };
  }
  return out;
}

Var broadcast_col(Var a, int cols) {
  require(a.cols() == 1, "broadcast_col: input must be Nx1");
  require(cols >= 1, "broadcast_col: cols must be >= 1");
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(a.value() * Eigen::MatrixXd::Ones(1, cols), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] { an->accumulate(on->grad.rowwise().sum()); };
  }
  return out;
}

Var broadcast_row(Var a, int rows) {
  require(a.rows() == 1, "broadcast_row: input must be 1xD");
  require(rows >= 1, "broadcast_row: rows must be >= 1");
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(Eigen::MatrixXd::Ones(rows, 1) * a.value(), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] { an->accumulate(on->grad.colwise().sum()); };
  }
  return out;
}

Var expand(Var a, int rows, int cols) {
  require(a.rows() == 1 && a.cols() == 1, "expand: input must be 1x1");
  require(rows >= 1 && cols >= 1, "expand: target shape must be positive");
  Graph& g = *a.graph();
  bool req = a.node()->requires_grad;
  Var out = g.make(Eigen::MatrixXd::Constant(rows, cols, a.value()(0, 0)), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on] {
      Eigen::MatrixXd s(1, 1);
      s(0, 0) = on->grad.sum();
      an->accumulate(s);
    };
  }
  return out;
}

Var gather_rows(Var a, const std::vector<int>& idx) {
  Graph& g = *a.graph();
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= -1 && idx[i] < n, "gather_rows: index out of range");
    if (idx[i] < 0) {
      v.row(static_cast<Eigen::Index>(i)).setZero();
    } else {
      v.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
    }
  }
  bool req = a.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on, idx] {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(an->value.rows(), an->value.cols());
      for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= 0) acc.row(idx[i]) += on->grad.row(static_cast<Eigen::Index>(i));
      }
      an->accumulate(acc);
    };
  }
  return out;
}

Var segment_sum(Var a, const std::vector<int>& seg, int n_segments) {
  require(static_cast<size_t>(a.rows()) == seg.size(), "segment_sum: one id per row required");
  require(n_segments >= 1, "segment_sum: n_segments must be >= 1");
  Graph& g = *a.graph();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n_segments, a.cols());
  for (size_t i = 0; i < seg.size(); ++i) {
    require(seg[i] >= 0 && seg[i] < n_segments, "segment_sum: segment id out of range");
    v.row(seg[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  bool req = a.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on, seg] {
      Eigen::MatrixXd acc(an->value.rows(), an->value.cols());
      for (size_t i = 0; i < seg.size(); ++i) {
        acc.row(static_cast<Eigen::Index>(i)) = on->grad.row(seg[i]);
      }
      an->accumulate(acc);
    };
  }
  return out;
}

Var vcat(Var a, Var b) {
  check_same_graph(a, b, "vcat");
  require(a.cols() == b.cols(), "vcat: column count mismatch");
  Graph& g = *a.graph();
  Eigen::MatrixXd v(a.rows() + b.rows(), a.cols());
  v.topRows(a.rows()) = a.value();
  v.bottomRows(b.rows()) = b.value();
  bool req = a.node()->requires_grad || b.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    const Eigen::Index ra = a.rows();
    const Eigen::Index rb = b.rows();
    on->backfn = [an, bn, on, ra, rb] {
      an->accumulate(on->grad.topRows(ra));
      bn->accumulate(on->grad.bottomRows(rb));
    };
  }
  return out;
}

Var hcat(Var a, Var b) {
  check_same_graph(a, b, "hcat");
  require(a.rows() == b.rows(), "hcat: row count mismatch");
  Graph& g = *a.graph();
  Eigen::MatrixXd v(a.rows(), a.cols() + b.cols());
  v.leftCols(a.cols()) = a.value();
  v.rightCols(b.cols()) = b.value();
  bool req = a.node()->requires_grad || b.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    const Eigen::Index ca = a.cols();
    const Eigen::Index cb = b.cols();
    on->backfn = [an, bn, on, ca, cb] {
      an->accumulate(on->grad.leftCols(ca));
      bn->accumulate(on->grad.rightCols(cb));
    };
  }
  return out;
}

Var col_max(Var a) {
  require(a.rows() >= 1, "col_max: empty input");
  Graph& g = *a.graph();
  const Eigen::Index cols = a.cols();
  Eigen::MatrixXd v(1, cols);
  std::vector<Eigen::Index> argmax(static_cast<size_t>(cols));
  for (Eigen::Index c = 0; c < cols; ++c) {
    Eigen::Index r = 0;
    v(0, c) = a.value().col(c).maxCoeff(&r);
    argmax[static_cast<size_t>(c)] = r;
  }
  bool req = a.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* an = a.node();
    Node* on = out.node();
    on->backfn = [an, on, argmax] {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(an->value.rows(), an->value.cols());
      for (Eigen::Index c = 0; c < acc.cols(); ++c) {
        acc(argmax[static_cast<size_t>(c)], c) = on->grad(0, c);
      }
      an->accumulate(acc);
    };
  }
  return out;
}

namespace {

// Windowed low-pass tap at offset m from center: g(f, m) = sin(2*pi*f*m)/(pi*m)
// for m != 0, g(f, 0) = 2f. dg/df = 2*cos(2*pi*f*m) covers both cases.
double sinc_tap(double f, int m) {
  if (m == 0) return 2.0 * f;
  return std::sin(2.0 * kPi * f * m) / (kPi * m);
}

double sinc_tap_df(double f, int m) { return 2.0 * std::cos(2.0 * kPi * f * m); }

double hamming(int n, int K) {
  return 0.54 - 0.46 * std::cos(2.0 * kPi * n / (K - 1));
}

}  // namespace

Var sinc_bandpass_kernels(Var cutoffs, int K) {
  require(cutoffs.cols() == 2, "sinc_bandpass_kernels: cutoffs must be Fx2");
  require(K >= 3 && K % 2 == 1, "sinc_bandpass_kernels: K must be odd and >= 3");
  Graph& g = *cutoffs.graph();
  const Eigen::Index F = cutoffs.rows();
  const int center = (K - 1) / 2;
  Eigen::MatrixXd v(F, K);
  for (Eigen::Index f = 0; f < F; ++f) {
    const double lo = cutoffs.value()(f, 0);
    const double hi = cutoffs.value()(f, 1);
    for (int n = 0; n < K; ++n) {
      const int m = n - center;
      v(f, n) = hamming(n, K) * (sinc_tap(hi, m) - sinc_tap(lo, m));
    }
  }
  bool req = cutoffs.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* cn = cutoffs.node();
    Node* on = out.node();
    on->backfn = [cn, on, K, center] {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(cn->value.rows(), 2);
      for (Eigen::Index f = 0; f < cn->value.rows(); ++f) {
        const double lo = cn->value(f, 0);
        const double hi = cn->value(f, 1);
        for (int n = 0; n < K; ++n) {
          const int m = n - center;
          const double w = hamming(n, K) * on->grad(f, n);
          acc(f, 0) -= w * sinc_tap_df(lo, m);
          acc(f, 1) += w * sinc_tap_df(hi, m);
        }
      }
      cn->accumulate(acc);
    };
  }
  return out;
}

Var depthwise_conv1d(Var x, Var kernels) {
  check_same_graph(x, kernels, "depthwise_conv1d");
  require(x.cols() == kernels.rows(), "depthwise_conv1d: channel count mismatch");
  const int K = static_cast<int>(kernels.cols());
  require(K >= 1 && K % 2 == 1, "depthwise_conv1d: kernel length must be odd");
  Graph& g = *x.graph();
  const Eigen::Index T = x.rows();
  const Eigen::Index C = x.cols();
  const int center = (K - 1) / 2;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(T, C);
  for (Eigen::Index c = 0; c < C; ++c) {
    for (Eigen::Index t = 0; t < T; ++t) {
      double s = 0.0;
      for (int m = 0; m < K; ++m) {
        const Eigen::Index src = t + m - center;
        if (src >= 0 && src < T) s += kernels.value()(c, m) * x.value()(src, c);
      }
      v(t, c) = s;
    }
  }
  bool req = x.node()->requires_grad || kernels.node()->requires_grad;
  Var out = g.make(std::move(v), req, nullptr);
  if (req) {
    Node* xn = x.node();
    Node* kn = kernels.node();
    Node* on = out.node();
    on->backfn = [xn, kn, on, K, center] {
      const Eigen::Index T = xn->value.rows();
      const Eigen::Index C = xn->value.cols();
      Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(T, C);
      Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(C, K);
      for (Eigen::Index c = 0; c < C; ++c) {
        for (Eigen::Index t = 0; t < T; ++t) {
          const double go = on->grad(t, c);
          if (go == 0.0) continue;
          for (int m = 0; m < K; ++m) {
            const Eigen::Index src = t + m - center;
            if (src >= 0 && src < T) {
              dx(src, c) += go * kn->value(c, m);
              dk(c, m) += go * xn->value(src, c);
            }
          }
        }
      }
      xn->accumulate(dx);
      kn->accumulate(dk);
    };
  }
  return out;
}

Var row_mean(Var a) { return scale(row_sum(a), 1.0 / static_cast<double>(a.cols())); }

Var col_mean(Var a) { return scale(col_sum(a), 1.0 / static_cast<double>(a.rows())); }

Var mean_all(Var a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require(gain.rows() == 1 && gain.cols() == x.cols(), "layer_norm: gain must be 1xD");
  require(bias.rows() == 1 && bias.cols() == x.cols(), "layer_norm: bias must be 1xD");
  const int D = static_cast<int>(x.cols());
  const int T = static_cast<int>(x.rows());
  Var mu = row_mean(x);
  Var xc = sub(x, broadcast_col(mu, D));
  Var var = row_mean(cmul(xc, xc));
  Var denom = sqrt(add_scalar(var, eps));
  Var normed = cdiv(xc, broadcast_col(denom, D));
  return add(cmul(normed, broadcast_row(gain, T)), broadcast_row(bias, T));
}

Var softmax_cross_entropy(Var logits, int label) {
  require(logits.rows() == 1, "softmax_cross_entropy: logits must be a row");
  require(label >= 0 && label < logits.cols(), "softmax_cross_entropy: label out of range");
  Graph& g = *logits.graph();
  // Detached max shift: lse(x) = m + log(sum exp(x - m)) holds for any
  // constant m, and the gradient is the exact softmax either way.
  const double m = logits.value().maxCoeff();
  Var shifted = add_scalar(logits, -m);
  Var lse = add_scalar(log(sum_all(exp(shifted))), m);
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(logits.cols(), 1);
  onehot(label, 0) = 1.0;
  Var picked = matmul(logits, g.constant(onehot));
  return sub(lse, picked);
}

Var segment_softmax(Var e, const std::vector<int>& seg, int n_segments) {
  require(e.cols() == 1, "segment_softmax: logits must be Ex1");
  require(static_cast<size_t>(e.rows()) == seg.size(), "segment_softmax: one id per logit");
  Graph& g = *e.graph();
  // Detached per-segment max shift; softmax value and gradient are invariant
  // to it.
  std::vector<double> m(static_cast<size_t>(n_segments), -std::numeric_limits<double>::infinity());
  for (size_t i = 0; i < seg.size(); ++i) {
    require(seg[i] >= 0 && seg[i] < n_segments, "segment_softmax: segment id out of range");
    m[static_cast<size_t>(seg[i])] = std::max(m[static_cast<size_t>(seg[i])], e.value()(static_cast<Eigen::Index>(i), 0));
  }
  Eigen::MatrixXd shift(e.rows(), 1);
  for (size_t i = 0; i < seg.size(); ++i) {
    shift(static_cast<Eigen::Index>(i), 0) = m[static_cast<size_t>(seg[i])];
  }
  Var ex = exp(sub(e, g.constant(shift)));
  Var denom = segment_sum(ex, seg, n_segments);
  Var per_edge = gather_rows(denom, seg);
  return cdiv(ex, per_edge);
}

Var cosine_rows(Var a, Var b, double eps) {
  check_same_shape(a, b, "cosine_rows");
  Var dot = row_sum(cmul(a, b));
  Var na = add_scalar(sqrt(row_sum(cmul(a, a))), eps);
  Var nb = add_scalar(sqrt(row_sum(cmul(b, b))), eps);
  return cdiv(dot, cmul(na, nb));
}

}  // namespace eai::ad
