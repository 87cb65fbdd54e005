#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "csifb/tensor.hpp"

namespace csifb {

using VarId = int;

/// Reverse-mode tape. Nodes are appended in creation order, which is a
/// valid topological order of the compute graph; backward() walks the tape
/// in exact reverse order.
///
/// Leaf semantics: param() binds a node to an external Tensor. The node
/// keeps its own per-pass gradient; backward() adds the pass gradient into
/// the external tensor's .g, so repeated backward calls accumulate
/// additively and explicit zero_grad() on the parameters is the only reset.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Trainable leaf. Values are snapshotted; gradients flow back into p.g.
  VarId param(Tensor& p);

  /// Constant leaf: participates in the forward pass, receives no gradient.
  VarId input(const Tensor& t);
  VarId input(std::vector<int> shape, std::vector<double> values);

  const Tensor& value(VarId id) const { return nodes_[id].t; }
  const std::vector<double>& grad(VarId id) const { return nodes_[id].t.g; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // ---- elementwise / structural ops ----
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);  // hadamard
  VarId scale(VarId a, double c);
  VarId shift(VarId a, double c);  // x + c
  VarId sum(VarId a);              // -> scalar
  VarId concat(VarId a, VarId b);  // flattened concatenation
  VarId reshape(VarId a, std::vector<int> shape);
  VarId flatten(VarId a) { return reshape(a, {static_cast<int>(nodes_[a].t.size())}); }

  // ---- activations ----
  enum class Act { kLeakyRelu, kSigmoid, kTanh };
  VarId activation(VarId a, Act kind);
  VarId leaky_relu(VarId a) { return activation(a, Act::kLeakyRelu); }
  VarId sigmoid(VarId a) { return activation(a, Act::kSigmoid); }
  VarId tanh(VarId a) { return activation(a, Act::kTanh); }

  // ---- linear algebra ----
  /// y = W x + b. W: [m,n], x: [n], b: [m].
  VarId dense(VarId W, VarId x, VarId b);

  /// 3x3 same-padding convolution. in: [C,H,W], k: [C',C,3,3], b: [C'].
  VarId conv2d(VarId in, VarId k, VarId b);

  // ---- recurrent cell ----
  struct LstmCellParams {
    VarId w_in, w_forget, w_cell, w_out;  // each [d, n+d]
    VarId b_in, b_forget, b_cell, b_out;  // each [d]
  };
  /// Standard LSTM recurrence: i,f,o = sigmoid(gates), g = tanh(gate),
  /// c' = f*c + i*g, h' = o*tanh(c'). Returns (h', c').
  std::pair<VarId, VarId> lstm_cell(VarId x, VarId h, VarId c, const LstmCellParams& p);

  // ---- loss ----
  /// sum((pred - target)^2), target held constant.
  VarId sq_diff_sum(VarId pred, const Tensor& target);
  /// Batched MSE: sum of squared differences divided by sample_count
  /// (per-sample sums over all remaining dims and time steps).
  VarId mse_loss(VarId pred, const Tensor& target, int sample_count);

  /// Reverse pass from a scalar loss. Per-pass node gradients start at
  /// zero; external parameter gradients accumulate additively.
  /// sink_params=false computes node gradients only (the trainer sinks
  /// per-sample gradients in a fixed order itself).
  void backward(VarId loss, bool sink_params = true);
  /// Adds the tape's leaf gradients into their bound external tensors.
  void sink_param_grads();

  /// Test hook: scales the backward contribution of every dense op,
  /// deliberately corrupting gradients. Used by the gradcheck harness
  /// self-test only.
  static void inject_dense_fault(double factor);

 private:
  struct Node {
    Tensor t;
    std::function<void()> back;  // empty for leaves/constants
    Tensor* sink = nullptr;      // external parameter, if any
  };

  VarId push(Tensor t, std::function<void()> back = {}, Tensor* sink = nullptr);
  Node& at(VarId id) { return nodes_[id]; }

  std::vector<Node> nodes_;
  static double dense_fault_;
};

}  // namespace csifb
