#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <vector>

namespace eai::ad {

// Define-by-run reverse-mode tape over matrix-valued nodes. A Graph owns the
// nodes (deque keeps addresses stable); Var is a cheap handle. Nodes are
// appended in topological order, so backward() is one reverse sweep. Gradients
// are allocated lazily on first accumulation; a Graph is single-use: build,
// backward once, discard.
class Graph;

struct Node {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::function<void()> backfn;

  void accumulate(const Eigen::MatrixXd& g);
};

class Var {
 public:
  Var() = default;
  Var(Node* node, Graph* graph) : node_(node), graph_(graph) {}

  const Eigen::MatrixXd& value() const { return node_->value; }
  // Zero matrix when no adjoint reached this node.
  Eigen::MatrixXd grad() const;
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  // Scalar convenience for 1x1 nodes.
  double item() const;

  Node* node() const { return node_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return node_ != nullptr; }

 private:
  Node* node_ = nullptr;
  Graph* graph_ = nullptr;
};

class Graph {
 public:
  Var leaf(const Eigen::MatrixXd& value);      // differentiable input
  Var constant(const Eigen::MatrixXd& value);  // gradient never flows
  Var scalar(double value);                    // 1x1 constant

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and sweeps the tape in
  // reverse creation order.
  void backward(Var root);

  size_t size() const { return nodes_.size(); }

  Var make(Eigen::MatrixXd value, bool requires_grad, std::function<void()> backfn);

 private:
  std::deque<Node> nodes_;
  bool swept_ = false;
};

// Elementwise and structural primitives. All ops check shapes and throw
// ValidationError on mismatch.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var cmul(Var a, Var b);  // componentwise product
Var cdiv(Var a, Var b);  // componentwise quotient
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var matmul(Var a, Var b);
Var transpose(Var a);

Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var abs(Var a);
Var sigmoid(Var a);
Var leaky_relu(Var a, double slope);
Var elu(Var a);
Var clamp(Var a, double lo, double hi);

Var sum_all(Var a);                    // -> 1x1
Var row_sum(Var a);                    // NxD -> Nx1
Var col_sum(Var a);                    // NxD -> 1xD
Var broadcast_col(Var a, int cols);    // Nx1 -> N x cols
Var broadcast_row(Var a, int rows);    // 1xD -> rows x D
Var expand(Var a, int rows, int cols); // 1x1 -> rows x cols

// Row selection; index -1 yields a zero row. Adjoint scatter-adds.
Var gather_rows(Var a, const std::vector<int>& idx);
// Sums rows sharing a segment id into out(seg[i], :); ids in [0, n_segments).
Var segment_sum(Var a, const std::vector<int>& seg, int n_segments);
Var vcat(Var a, Var b);
Var hcat(Var a, Var b);
// Per-column max over rows with argmax-routed adjoint (first max on ties).
Var col_max(Var a);

// Hamming-windowed sinc band-pass FIR bank. cutoffs is Fx2 (low, high in
// cycles/sample, 0 < low < high <= 0.5); returns FxK taps, K odd. The
// difference-of-sincs tap and its cutoff derivative are smooth in the
// frequencies, including the center tap.
Var sinc_bandpass_kernels(Var cutoffs, int K);

// Per-channel temporal cross-correlation with zero padding ("same" length):
// out(t,c) = sum_m k(c,m) * x(t + m - (K-1)/2, c), K odd.
Var depthwise_conv1d(Var x, Var kernels);

// Composites (built from primitives, gradients follow automatically).
Var row_mean(Var a);
Var col_mean(Var a);
Var mean_all(Var a);
// Per-row normalization over the feature axis: gain/bias are 1xD.
Var layer_norm(Var x, Var gain, Var bias, double eps);
// -log softmax(logits)[label] for a 1xC logits row; max-shifted for stability.
Var softmax_cross_entropy(Var logits, int label);
// Softmax over edges grouped by segment id (per-destination attention).
Var segment_softmax(Var e, const std::vector<int>& seg, int n_segments);
// Per-row cosine similarity; eps added to each norm before dividing.
Var cosine_rows(Var a, Var b, double eps);

}  // namespace eai::ad
