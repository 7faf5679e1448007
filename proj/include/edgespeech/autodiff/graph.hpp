// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgespeech/core/tensor.hpp"

namespace edgespeech::autodiff {

using NodeId = uint32_t;

enum class Op : uint8_t {
  kInput, kParam, kConst,
  kMatMul, kConv1d,
  kAdd, kSub, kMul, kScale,
  kRelu, kSigmoid, kTanh, kLog,
  kMean, kSum, kL2SqRows,
  kSoftmax, kLogSumExp,
  kConcat, kSliceRows, kRows,
  kTranspose, kReshape, kUpsample2,
  kVqQuantize, kCodebookLookup, kStopGrad,
};

const char* op_name(Op op);

struct GradResult {
  std::map<std::string, Tensor> param_grads;  // one entry per parameter
  std::set<std::string> detached;             // parameters with no path to the output
};

// Reverse-mode tape over a fixed primitive set. Nodes are appended in
// topological order by construction; evaluation and gradient accumulation
// both walk that order, so results are bit-stable run to run. Shapes are
// validated when a node is added.
class Graph {
 public:
  NodeId input(const std::string& name, std::vector<size_t> shape);
  NodeId param(const std::string& name, Tensor init);
  NodeId constant(Tensor value);

  // out = a @ b for a [M,K], b [K,N].
  NodeId matmul(NodeId a, NodeId b);
  // x [Cin,L], w [Cout,Cin,K], optional bias [Cout]; zero padding, stride.
  NodeId conv1d(NodeId x, NodeId w, std::optional<NodeId> bias, size_t stride,
                size_t pad_left, size_t pad_right);

  NodeId add(NodeId a, NodeId b);  // same shape, or [T,F]+[F] row broadcast
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);

  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId tanh_(NodeId x);
  NodeId log_(NodeId x);

  NodeId mean(NodeId x);  // scalar
  NodeId sum(NodeId x);   // scalar
  // Per-row squared Euclidean distance of two [T,D] tensors -> [T].
  NodeId l2sq_rows(NodeId a, NodeId b);

  NodeId softmax(NodeId x);    // rank 1, or rank 2 rowwise; max-subtracted
  NodeId logsumexp(NodeId x);  // rank 1 -> scalar; max-subtracted

  NodeId concat(const std::vector<NodeId>& parts);        // along axis 0
  NodeId slice_rows(NodeId x, size_t begin, size_t end);  // rows [begin,end)
  NodeId rows(NodeId x, std::vector<uint32_t> indices);   // static gather
  NodeId transpose(NodeId x);
  NodeId reshape(NodeId x, std::vector<size_t> shape);
  NodeId upsample2(NodeId x);  // [C,L] -> [C,2L], repeat along axis 1

  // Nearest-codebook lookup with a straight-through gradient: forward emits
  // the selected codebook rows; backward copies the incoming gradient to z_e
  // unchanged and sends nothing to the codebook.
  NodeId vq_quantize(NodeId z_e, NodeId codebook);
  // The same selected rows as a differentiable function of the codebook
  // (scatter-add backward); indices are read from the paired vq node.
  NodeId codebook_lookup(NodeId codebook, NodeId vq_node);
  NodeId stop_grad(NodeId x);

  void name_output(NodeId node, const std::string& name);

  void set_input(const std::string& name, Tensor value);
  void set_param(const std::string& name, Tensor value);
  Tensor& param_value(const std::string& name);
  const std::vector<std::string>& param_names() const { return param_order_; }
  NodeId param_id(const std::string& name) const;

  // Forward pass over every node; throws if any node yields a non-finite
  // value, naming the node.
  void forward();
  std::map<std::string, Tensor> evaluate(
      const std::map<std::string, Tensor>& inputs);

  // Reverse pass from a scalar output; gradient accumulation order is fixed
  // by node index.
  GradResult backward(NodeId output);

  const Tensor& value(NodeId id) const;
  const Tensor& grad(NodeId id) const;  // valid after backward
  const std::vector<size_t>& shape(NodeId id) const;
  const std::vector<uint32_t>& vq_indices(NodeId vq_node) const;

  // Pins every vq node at its last forward state: indices are held fixed and
  // z_q is linearized as captured_cq + (z_e - captured_ze), the function the
  // straight-through estimator differentiates exactly. Used by the finite-
  // difference oracle.
  void freeze_quantizers();
  void unfreeze_quantizers();

  size_t node_count() const { return nodes_.size(); }
  const std::string& node_label(NodeId id) const;

 private:
  struct Node {
    Op op;
    std::string label;
    std::vector<NodeId> in;
    std::vector<size_t> shape;
    Tensor val;
    Tensor grad;
    // op-specific attributes
    size_t stride = 1, pad_left = 0, pad_right = 0;
    size_t begin = 0, end = 0;
    double factor = 1.0;
    std::vector<uint32_t> indices;       // kRows; kVqQuantize forward state
    std::vector<uint32_t> frozen_idx;    // vq freeze state
    Tensor frozen_ze, frozen_cq;
    bool frozen = false;
  };

  NodeId push(Node n);
  Node& at(NodeId id);
  const Node& at(NodeId id) const;
  void forward_node(Node& n);
  void backward_node(Node& n);
  void check_rank(const Node& n, NodeId in, size_t rank) const;

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> inputs_;
  std::map<std::string, NodeId> params_;
  std::vector<std::string> param_order_;
  std::map<std::string, NodeId> outputs_;
  bool forward_done_ = false;
};

// Central finite differences, (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double eps);

// max |a-b| / max(|a|,|b|,floor) over elements; the gradient-check metric.
double max_rel_err(const Tensor& a, const Tensor& b, double floor = 1e-8);

}  // namespace edgespeech::autodiff
