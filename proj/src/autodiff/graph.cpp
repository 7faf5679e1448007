// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>

#include "edgespeech/core/error.hpp"
#include "edgespeech/kernels/kernels.hpp"

namespace edgespeech::autodiff {

namespace k = edgespeech::kernels;

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kConst: return "const";
    case Op::kMatMul: return "matmul";
    case Op::kConv1d: return "conv1d";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kLog: return "log";
    case Op::kMean: return "mean";
    case Op::kSum: return "sum";
    case Op::kL2SqRows: return "l2sq_rows";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSumExp: return "logsumexp";
    case Op::kConcat: return "concat";
    case Op::kSliceRows: return "slice_rows";
    case Op::kRows: return "rows";
    case Op::kTranspose: return "transpose";
    case Op::kReshape: return "reshape";
    case Op::kUpsample2: return "upsample2";
    case Op::kVqQuantize: return "vq_quantize";
    case Op::kCodebookLookup: return "codebook_lookup";
    case Op::kStopGrad: return "stop_grad";
  }
  return "?";
}

namespace {
std::string shape_str_of(const std::vector<size_t>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}
}  // namespace

NodeId Graph::push(Node n) {
  NodeId id = static_cast<NodeId>(nodes_.size());
  if (n.label.empty())
    n.label = std::string(op_name(n.op)) + "#" + std::to_string(id);
  nodes_.push_back(std::move(n));
  forward_done_ = false;
  return id;
}

Graph::Node& Graph::at(NodeId id) { return nodes_.at(id); }
const Graph::Node& Graph::at(NodeId id) const { return nodes_.at(id); }
const std::string& Graph::node_label(NodeId id) const { return at(id).label; }

void Graph::check_rank(const Node& n, NodeId in, size_t rank) const {
  require(at(in).shape.size() == rank,
          n.label + ": operand " + at(in).label + " must have rank " +
              std::to_string(rank) + ", got shape " + shape_str_of(at(in).shape));
}

// ---------------------------------------------------------------------------
// graph construction

NodeId Graph::input(const std::string& name, std::vector<size_t> shape) {
  require(!inputs_.count(name) && !params_.count(name),
          "duplicate leaf name: " + name);
  Node n;
  n.op = Op::kInput;
  n.label = name;
  n.shape = shape;
  n.val = Tensor::zeros(shape);
  NodeId id = push(std::move(n));
  inputs_[name] = id;
  return id;
}

NodeId Graph::param(const std::string& name, Tensor init) {
  require(!inputs_.count(name) && !params_.count(name),
          "duplicate leaf name: " + name);
  Node n;
  n.op = Op::kParam;
  n.label = name;
  n.shape = init.shape;
  n.val = std::move(init);
  NodeId id = push(std::move(n));
  params_[name] = id;
  param_order_.push_back(name);
  return id;
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConst;
  n.shape = value.shape;
  n.val = std::move(value);
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatMul;
  n.in = {a, b};
  n.label = std::string("matmul#") + std::to_string(nodes_.size());
  check_rank(n, a, 2);
  check_rank(n, b, 2);
  require(at(a).shape[1] == at(b).shape[0],
          n.label + ": inner dimensions " + std::to_string(at(a).shape[1]) +
              " vs " + std::to_string(at(b).shape[0]));
  n.shape = {at(a).shape[0], at(b).shape[1]};
  return push(std::move(n));
}

NodeId Graph::conv1d(NodeId x, NodeId w, std::optional<NodeId> bias,
                     size_t stride, size_t pad_left, size_t pad_right) {
  Node n;
  n.op = Op::kConv1d;
  n.in = {x, w};
  if (bias) n.in.push_back(*bias);
  n.label = std::string("conv1d#") + std::to_string(nodes_.size());
  check_rank(n, x, 2);
  check_rank(n, w, 3);
  require(stride >= 1, n.label + ": stride must be >= 1");
  const auto& xs = at(x).shape;
  const auto& ws = at(w).shape;
  require(xs[0] == ws[1], n.label + ": input channels " +
                              std::to_string(xs[0]) + " != weight channels " +
                              std::to_string(ws[1]));
  if (bias) {
    check_rank(n, *bias, 1);
    require(at(*bias).shape[0] == ws[0], n.label + ": bias size mismatch");
  }
  size_t padded = xs[1] + pad_left + pad_right;
  require(padded >= ws[2], n.label + ": input shorter than kernel");
  n.stride = stride;
  n.pad_left = pad_left;
  n.pad_right = pad_right;
  n.shape = {ws[0], (padded - ws[2]) / stride + 1};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kAdd;
  n.in = {a, b};
  n.label = std::string("add#") + std::to_string(nodes_.size());
  bool broadcast = at(a).shape.size() == 2 && at(b).shape.size() == 1 &&
                   at(a).shape[1] == at(b).shape[0];
  require(at(a).shape == at(b).shape || broadcast,
          n.label + ": shape mismatch " + shape_str_of(at(a).shape) + " vs " +
              shape_str_of(at(b).shape));
  n.shape = at(a).shape;
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kSub;
  n.in = {a, b};
  n.label = std::string("sub#") + std::to_string(nodes_.size());
  require(at(a).shape == at(b).shape,
          n.label + ": shape mismatch " + shape_str_of(at(a).shape) + " vs " +
              shape_str_of(at(b).shape));
  n.shape = at(a).shape;
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMul;
  n.in = {a, b};
  n.label = std::string("mul#") + std::to_string(nodes_.size());
  require(at(a).shape == at(b).shape,
          n.label + ": shape mismatch " + shape_str_of(at(a).shape) + " vs " +
              shape_str_of(at(b).shape));
  n.shape = at(a).shape;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double factor) {
  Node n;
  n.op = Op::kScale;
  n.in = {a};
  n.factor = factor;
  n.shape = at(a).shape;
  return push(std::move(n));
}

#define EDGESPEECH_UNARY(fn, opcode)          \
  NodeId Graph::fn(NodeId x) {                \
    Node n;                                   \
    n.op = opcode;                            \
    n.in = {x};                               \
    n.shape = at(x).shape;                    \
    return push(std::move(n));                \
  }
EDGESPEECH_UNARY(relu, Op::kRelu)
EDGESPEECH_UNARY(sigmoid, Op::kSigmoid)
EDGESPEECH_UNARY(tanh_, Op::kTanh)
EDGESPEECH_UNARY(log_, Op::kLog)
EDGESPEECH_UNARY(stop_grad, Op::kStopGrad)
#undef EDGESPEECH_UNARY

NodeId Graph::mean(NodeId x) {
  Node n;
  n.op = Op::kMean;
  n.in = {x};
  require(shape_numel(at(x).shape) > 0, "mean: empty operand");
  n.shape = {};
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.op = Op::kSum;
  n.in = {x};
  n.shape = {};
  return push(std::move(n));
}

NodeId Graph::l2sq_rows(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kL2SqRows;
  n.in = {a, b};
  n.label = std::string("l2sq_rows#") + std::to_string(nodes_.size());
  check_rank(n, a, 2);
  require(at(a).shape == at(b).shape,
          n.label + ": shape mismatch " + shape_str_of(at(a).shape) + " vs " +
              shape_str_of(at(b).shape));
  n.shape = {at(a).shape[0]};
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId x) {
  Node n;
  n.op = Op::kSoftmax;
  n.in = {x};
  n.label = std::string("softmax#") + std::to_string(nodes_.size());
  size_t r = at(x).shape.size();
  require(r == 1 || r == 2, n.label + ": rank must be 1 or 2");
  n.shape = at(x).shape;
  return push(std::move(n));
}

NodeId Graph::logsumexp(NodeId x) {
  Node n;
  n.op = Op::kLogSumExp;
  n.in = {x};
  n.label = std::string("logsumexp#") + std::to_string(nodes_.size());
  check_rank(n, x, 1);
  require(at(x).shape[0] > 0, n.label + ": empty operand");
  n.shape = {};
  return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& parts) {
  Node n;
  n.op = Op::kConcat;
  n.in = parts;
  n.label = std::string("concat#") + std::to_string(nodes_.size());
  require(!parts.empty(), n.label + ": needs at least one part");
  const auto& first = at(parts[0]).shape;
  require(first.size() == 1 || first.size() == 2,
          n.label + ": rank must be 1 or 2");
  size_t rows = 0;
  for (NodeId p : parts) {
    const auto& s = at(p).shape;
    require(s.size() == first.size() &&
                (s.size() == 1 || s[1] == first[1]),
            n.label + ": incompatible part shape " + shape_str_of(at(p).shape));
    rows += s[0];
  }
  n.shape = first;
  n.shape[0] = rows;
  return push(std::move(n));
}

NodeId Graph::slice_rows(NodeId x, size_t begin, size_t end) {
  Node n;
  n.op = Op::kSliceRows;
  n.in = {x};
  n.label = std::string("slice_rows#") + std::to_string(nodes_.size());
  const auto& s = at(x).shape;
  require(s.size() == 1 || s.size() == 2, n.label + ": rank must be 1 or 2");
  require(begin < end && end <= s[0],
          n.label + ": range [" + std::to_string(begin) + "," +
              std::to_string(end) + ") out of bounds for " +
              std::to_string(s[0]) + " rows");
  n.begin = begin;
  n.end = end;
  n.shape = s;
  n.shape[0] = end - begin;
  return push(std::move(n));
}

NodeId Graph::rows(NodeId x, std::vector<uint32_t> indices) {
  Node n;
  n.op = Op::kRows;
  n.in = {x};
  n.label = std::string("rows#") + std::to_string(nodes_.size());
  check_rank(n, x, 2);
  for (uint32_t i : indices)
    require(i < at(x).shape[0], n.label + ": row index out of range");
  n.indices = std::move(indices);
  n.shape = {n.indices.size(), at(x).shape[1]};
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId x) {
  Node n;
  n.op = Op::kTranspose;
  n.in = {x};
  n.label = std::string("transpose#") + std::to_string(nodes_.size());
  check_rank(n, x, 2);
  n.shape = {at(x).shape[1], at(x).shape[0]};
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, std::vector<size_t> shape) {
  Node n;
  n.op = Op::kReshape;
  n.in = {x};
  n.label = std::string("reshape#") + std::to_string(nodes_.size());
  require(shape_numel(shape) == shape_numel(at(x).shape),
          n.label + ": element count mismatch");
  n.shape = std::move(shape);
  return push(std::move(n));
}

NodeId Graph::upsample2(NodeId x) {
  Node n;
  n.op = Op::kUpsample2;
  n.in = {x};
  n.label = std::string("upsample2#") + std::to_string(nodes_.size());
  check_rank(n, x, 2);
  n.shape = {at(x).shape[0], at(x).shape[1] * 2};
  return push(std::move(n));
}

NodeId Graph::vq_quantize(NodeId z_e, NodeId codebook) {
  Node n;
  n.op = Op::kVqQuantize;
  n.in = {z_e, codebook};
  n.label = std::string("vq_quantize#") + std::to_string(nodes_.size());
  check_rank(n, z_e, 2);
  check_rank(n, codebook, 2);
  require(at(z_e).shape[1] == at(codebook).shape[1],
          n.label + ": embedding width " + std::to_string(at(z_e).shape[1]) +
              " != codebook width " + std::to_string(at(codebook).shape[1]));
  n.shape = at(z_e).shape;
  return push(std::move(n));
}

NodeId Graph::codebook_lookup(NodeId codebook, NodeId vq_node) {
  Node n;
  n.op = Op::kCodebookLookup;
  n.in = {codebook, vq_node};
  n.label = std::string("codebook_lookup#") + std::to_string(nodes_.size());
  require(at(vq_node).op == Op::kVqQuantize,
          n.label + ": second operand must be a vq_quantize node");
  n.shape = at(vq_node).shape;
  return push(std::move(n));
}

void Graph::name_output(NodeId node, const std::string& name) {
  outputs_[name] = node;
}

// ---------------------------------------------------------------------------
// leaves

void Graph::set_input(const std::string& name, Tensor value) {
  auto it = inputs_.find(name);
  require(it != inputs_.end(), "no such input: " + name);
  Node& n = at(it->second);
  require(value.shape == n.shape, "input " + name + ": expected shape " +
                                      n.val.shape_str() + ", got " +
                                      value.shape_str());
  n.val = std::move(value);
  forward_done_ = false;
}

void Graph::set_param(const std::string& name, Tensor value) {
  auto it = params_.find(name);
  require(it != params_.end(), "no such parameter: " + name);
  Node& n = at(it->second);
  require(value.shape == n.shape, "parameter " + name + ": shape mismatch");
  n.val = std::move(value);
  forward_done_ = false;
}

Tensor& Graph::param_value(const std::string& name) {
  auto it = params_.find(name);
  require(it != params_.end(), "no such parameter: " + name);
  return at(it->second).val;
}

NodeId Graph::param_id(const std::string& name) const {
  auto it = params_.find(name);
  require(it != params_.end(), "no such parameter: " + name);
  return it->second;
}

// ---------------------------------------------------------------------------
// forward

namespace {
void softmax_row(const double* x, double* y, size_t n) {
  double m = x[0];
  for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  double z = 0.0;
  for (size_t i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - m);
    z += y[i];
  }
  for (size_t i = 0; i < n; ++i) y[i] /= z;
}
}  // namespace

void Graph::forward_node(Node& n) {
  switch (n.op) {
    case Op::kInput:
    case Op::kParam:
    case Op::kConst:
      return;
    case Op::kMatMul: {
      const Tensor& a = at(n.in[0]).val;
      const Tensor& b = at(n.in[1]).val;
      n.val = Tensor::zeros(n.shape);
      k::matmul(a.data.data(), b.data.data(), n.val.data.data(), a.shape[0],
                a.shape[1], b.shape[1], false, false, false);
      break;
    }
    case Op::kConv1d: {
      const Tensor& x = at(n.in[0]).val;
      const Tensor& w = at(n.in[1]).val;
      const double* bias = n.in.size() > 2 ? at(n.in[2]).val.data.data() : nullptr;
      n.val = Tensor::zeros(n.shape);
      k::conv1d_forward(x.data.data(), x.shape[0], x.shape[1], w.data.data(),
                        w.shape[0], w.shape[2], n.stride, n.pad_left, bias,
                        n.val.data.data(), n.shape[1]);
      break;
    }
    case Op::kAdd: {
      const Tensor& a = at(n.in[0]).val;
      const Tensor& b = at(n.in[1]).val;
      n.val = Tensor::zeros(n.shape);
      if (a.shape == b.shape) {
        k::add(a.data.data(), b.data.data(), n.val.data.data(), a.numel());
      } else {  // [T,F] + [F]
        size_t rows = a.shape[0], cols = a.shape[1];
        for (size_t r = 0; r < rows; ++r)
          for (size_t c = 0; c < cols; ++c)
            n.val.data[r * cols + c] = a.data[r * cols + c] + b.data[c];
      }
      break;
    }
    case Op::kSub: {
      n.val = Tensor::zeros(n.shape);
      k::sub(at(n.in[0]).val.data.data(), at(n.in[1]).val.data.data(),
             n.val.data.data(), n.val.numel());
      break;
    }
    case Op::kMul: {
      n.val = Tensor::zeros(n.shape);
      k::mul(at(n.in[0]).val.data.data(), at(n.in[1]).val.data.data(),
             n.val.data.data(), n.val.numel());
      break;
    }
    case Op::kScale: {
      n.val = Tensor::zeros(n.shape);
      k::scale(at(n.in[0]).val.data.data(), n.factor, n.val.data.data(),
               n.val.numel());
      break;
    }
    case Op::kRelu: {
      n.val = Tensor::zeros(n.shape);
      k::relu(at(n.in[0]).val.data.data(), n.val.data.data(), n.val.numel());
      break;
    }
    case Op::kSigmoid: {
      n.val = Tensor::zeros(n.shape);
      k::sigmoid(at(n.in[0]).val.data.data(), n.val.data.data(), n.val.numel());
      break;
    }
    case Op::kTanh: {
      n.val = Tensor::zeros(n.shape);
      k::tanh_map(at(n.in[0]).val.data.data(), n.val.data.data(),
                  n.val.numel());
      break;
    }
    case Op::kLog: {
      const Tensor& x = at(n.in[0]).val;
      n.val = Tensor::zeros(n.shape);
      for (size_t i = 0; i < x.numel(); ++i) n.val.data[i] = std::log(x.data[i]);
      break;
    }
    case Op::kMean: {
      const Tensor& x = at(n.in[0]).val;
      n.val = Tensor::scalar(k::sum(x.data.data(), x.numel()) /
                             static_cast<double>(x.numel()));
      break;
    }
    case Op::kSum: {
      const Tensor& x = at(n.in[0]).val;
      n.val = Tensor::scalar(k::sum(x.data.data(), x.numel()));
      break;
    }
    case Op::kL2SqRows: {
      const Tensor& a = at(n.in[0]).val;
      const Tensor& b = at(n.in[1]).val;
      size_t rows = a.shape[0], cols = a.shape[1];
      n.val = Tensor::zeros(n.shape);
      for (size_t r = 0; r < rows; ++r)
        n.val.data[r] =
            k::sq_dist(a.data.data() + r * cols, b.data.data() + r * cols, cols);
      break;
    }
    case Op::kSoftmax: {
      const Tensor& x = at(n.in[0]).val;
      n.val = Tensor::zeros(n.shape);
      size_t rows = x.rank() == 2 ? x.shape[0] : 1;
      size_t cols = x.rank() == 2 ? x.shape[1] : x.shape[0];
      for (size_t r = 0; r < rows; ++r)
        softmax_row(x.data.data() + r * cols, n.val.data.data() + r * cols,
                    cols);
      break;
    }
    case Op::kLogSumExp: {
      const Tensor& x = at(n.in[0]).val;
      double m = x.data[0];
      for (double v : x.data) m = std::max(m, v);
      double z = 0.0;
      for (double v : x.data) z += std::exp(v - m);
      n.val = Tensor::scalar(m + std::log(z));
      break;
    }
    case Op::kConcat: {
      n.val = Tensor::zeros(n.shape);
      size_t off = 0;
      for (NodeId p : n.in) {
        const Tensor& v = at(p).val;
        std::copy(v.data.begin(), v.data.end(), n.val.data.begin() + off);
        off += v.numel();
      }
      break;
    }
    case Op::kSliceRows: {
      const Tensor& x = at(n.in[0]).val;
      size_t cols = x.rank() == 2 ? x.shape[1] : 1;
      n.val = Tensor::zeros(n.shape);
      std::copy(x.data.begin() + n.begin * cols, x.data.begin() + n.end * cols,
                n.val.data.begin());
      break;
    }
    case Op::kRows: {
      const Tensor& x = at(n.in[0]).val;
      size_t cols = x.shape[1];
      n.val = Tensor::zeros(n.shape);
      for (size_t i = 0; i < n.indices.size(); ++i)
        std::copy(x.data.begin() + n.indices[i] * cols,
                  x.data.begin() + (n.indices[i] + 1) * cols,
                  n.val.data.begin() + i * cols);
      break;
    }
    case Op::kTranspose: {
      const Tensor& x = at(n.in[0]).val;
      size_t r = x.shape[0], c = x.shape[1];
      n.val = Tensor::zeros(n.shape);
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j)
          n.val.data[j * r + i] = x.data[i * c + j];
      break;
    }
    case Op::kReshape: {
      n.val = Tensor(n.shape, at(n.in[0]).val.data);
      break;
    }
    case Op::kUpsample2: {
      const Tensor& x = at(n.in[0]).val;
      size_t c = x.shape[0], l = x.shape[1];
      n.val = Tensor::zeros(n.shape);
      for (size_t i = 0; i < c; ++i)
        for (size_t j = 0; j < l; ++j) {
          n.val.data[i * 2 * l + 2 * j] = x.data[i * l + j];
          n.val.data[i * 2 * l + 2 * j + 1] = x.data[i * l + j];
        }
      break;
    }
    case Op::kVqQuantize: {
      const Tensor& ze = at(n.in[0]).val;
      const Tensor& cb = at(n.in[1]).val;
      size_t rows = ze.shape[0], dim = ze.shape[1];
      n.val = Tensor::zeros(n.shape);
      if (n.frozen) {
        // Linearized at the freeze point: z_q = cq0 + (z_e - ze0).
        for (size_t i = 0; i < n.val.numel(); ++i)
          n.val.data[i] =
              n.frozen_cq.data[i] + (ze.data[i] - n.frozen_ze.data[i]);
        n.indices = n.frozen_idx;
      } else {
        n.indices.resize(rows);
        k::nearest_rows(ze.data.data(), rows, cb.data.data(), cb.shape[0], dim,
                        n.indices.data(), nullptr);
        for (size_t r = 0; r < rows; ++r)
          std::copy(cb.data.begin() + n.indices[r] * dim,
                    cb.data.begin() + (n.indices[r] + 1) * dim,
                    n.val.data.begin() + r * dim);
      }
      break;
    }
    case Op::kCodebookLookup: {
      const Tensor& cb = at(n.in[0]).val;
      const Node& vq = at(n.in[1]);
      size_t dim = cb.shape[1];
      n.val = Tensor::zeros(n.shape);
      for (size_t r = 0; r < vq.indices.size(); ++r)
        std::copy(cb.data.begin() + vq.indices[r] * dim,
                  cb.data.begin() + (vq.indices[r] + 1) * dim,
                  n.val.data.begin() + r * dim);
      break;
    }
    case Op::kStopGrad: {
      n.val = at(n.in[0]).val;
      break;
    }
  }
}

void Graph::forward() {
  for (Node& n : nodes_) {
    forward_node(n);
    if (n.op != Op::kInput && n.op != Op::kParam && n.op != Op::kConst)
      require(n.val.all_finite(), n.label + " produced non-finite values");
  }
  forward_done_ = true;
}

std::map<std::string, Tensor> Graph::evaluate(
    const std::map<std::string, Tensor>& inputs) {
  for (const auto& [name, t] : inputs) set_input(name, t);
  forward();
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : outputs_) out[name] = at(id).val;
  return out;
}

// ---------------------------------------------------------------------------
// backward

void Graph::backward_node(Node& n) {
  auto g_in = [&](size_t i) -> Tensor& { return at(n.in[i]).grad; };
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::kInput:
    case Op::kParam:
    case Op::kConst:
    case Op::kStopGrad:
      return;
    case Op::kMatMul: {
      const Tensor& a = at(n.in[0]).val;
      const Tensor& b = at(n.in[1]).val;
      // dA += g * B^T ; dB += A^T * g
      k::matmul(g.data.data(), b.data.data(), g_in(0).data.data(), a.shape[0],
                b.shape[1], a.shape[1], false, true, true);
      k::matmul(a.data.data(), g.data.data(), g_in(1).data.data(), a.shape[1],
                a.shape[0], b.shape[1], true, false, true);
      return;
    }
    case Op::kConv1d: {
      const Tensor& x = at(n.in[0]).val;
      const Tensor& w = at(n.in[1]).val;
      Tensor gx = Tensor::zeros(x.shape);
      k::conv1d_grad_input(g.data.data(), w.shape[0], n.shape[1],
                           w.data.data(), w.shape[1], w.shape[2], n.stride,
                           n.pad_left, gx.data.data(), x.shape[1]);
      k::axpy(1.0, gx.data.data(), g_in(0).data.data(), gx.numel());
      Tensor gw = Tensor::zeros(w.shape);
      k::conv1d_grad_weight(g.data.data(), w.shape[0], n.shape[1],
                            x.data.data(), w.shape[1], x.shape[1], w.shape[2],
                            n.stride, n.pad_left, gw.data.data());
      k::axpy(1.0, gw.data.data(), g_in(1).data.data(), gw.numel());
      if (n.in.size() > 2) {
        Tensor gb = Tensor::zeros({w.shape[0]});
        k::conv1d_grad_bias(g.data.data(), w.shape[0], n.shape[1],
                            gb.data.data());
        k::axpy(1.0, gb.data.data(), g_in(2).data.data(), gb.numel());
      }
      return;
    }
    case Op::kAdd: {
      k::axpy(1.0, g.data.data(), g_in(0).data.data(), g.numel());
      Tensor& gb = g_in(1);
      if (gb.shape == g.shape) {
        k::axpy(1.0, g.data.data(), gb.data.data(), g.numel());
      } else {  // broadcast: column sums, fixed row order
        size_t rows = n.shape[0], cols = n.shape[1];
        for (size_t r = 0; r < rows; ++r)
          for (size_t c = 0; c < cols; ++c) gb.data[c] += g.data[r * cols + c];
      }
      return;
    }
    case Op::kSub: {
      k::axpy(1.0, g.data.data(), g_in(0).data.data(), g.numel());
      k::axpy(-1.0, g.data.data(), g_in(1).data.data(), g.numel());
      return;
    }
    case Op::kMul: {
      const Tensor& a = at(n.in[0]).val;
      const Tensor& b = at(n.in[1]).val;
      for (size_t i = 0; i < g.numel(); ++i) {
        g_in(0).data[i] += g.data[i] * b.data[i];
        g_in(1).data[i] += g.data[i] * a.data[i];
      }
      return;
    }
    case Op::kScale: {
      k::axpy(n.factor, g.data.data(), g_in(0).data.data(), g.numel());
      return;
    }
    case Op::kRelu: {
      const Tensor& x = at(n.in[0]).val;
      for (size_t i = 0; i < g.numel(); ++i)
        if (x.data[i] > 0.0) g_in(0).data[i] += g.data[i];
      return;
    }
    case Op::kSigmoid: {
      for (size_t i = 0; i < g.numel(); ++i)
        g_in(0).data[i] += g.data[i] * n.val.data[i] * (1.0 - n.val.data[i]);
      return;
    }
    case Op::kTanh: {
      for (size_t i = 0; i < g.numel(); ++i)
        g_in(0).data[i] +=
            g.data[i] * (1.0 - n.val.data[i] * n.val.data[i]);
      return;
    }
    case Op::kLog: {
      const Tensor& x = at(n.in[0]).val;
      for (size_t i = 0; i < g.numel(); ++i)
        g_in(0).data[i] += g.data[i] / x.data[i];
      return;
    }
    case Op::kMean: {
      double gv = g.data[0] / static_cast<double>(at(n.in[0]).val.numel());
      Tensor& gx = g_in(0);
      for (double& v : gx.data) v += gv;
      return;
    }
    case Op::kSum: {
      double gv = g.data[0];
      Tensor& gx = g_in(0);
      for (double& v : gx.data) v += gv;
      return;
    }
    case Op::kL2SqRows: {
      const Tensor& a = at(n.in[0]).val;
      const Tensor& b = at(n.in[1]).val;
      size_t rows = a.shape[0], cols = a.shape[1];
      for (size_t r = 0; r < rows; ++r) {
        double gr = g.data[r];
        for (size_t c = 0; c < cols; ++c) {
          double d = 2.0 * (a.data[r * cols + c] - b.data[r * cols + c]) * gr;
          g_in(0).data[r * cols + c] += d;
          g_in(1).data[r * cols + c] -= d;
        }
      }
      return;
    }
    case Op::kSoftmax: {
      const Tensor& y = n.val;
      size_t rows = y.rank() == 2 ? y.shape[0] : 1;
      size_t cols = y.rank() == 2 ? y.shape[1] : y.shape[0];
      for (size_t r = 0; r < rows; ++r) {
        const double* yr = y.data.data() + r * cols;
        const double* gr = g.data.data() + r * cols;
        double dot = 0.0;
        for (size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
        for (size_t c = 0; c < cols; ++c)
          g_in(0).data[r * cols + c] += yr[c] * (gr[c] - dot);
      }
      return;
    }
    case Op::kLogSumExp: {
      const Tensor& x = at(n.in[0]).val;
      double out = n.val.data[0];
      for (size_t i = 0; i < x.numel(); ++i)
        g_in(0).data[i] += g.data[0] * std::exp(x.data[i] - out);
      return;
    }
    case Op::kConcat: {
      size_t off = 0;
      for (NodeId p : n.in) {
        Tensor& gp = at(p).grad;
        for (size_t i = 0; i < gp.numel(); ++i) gp.data[i] += g.data[off + i];
        off += gp.numel();
      }
      return;
    }
    case Op::kSliceRows: {
      const Tensor& x = at(n.in[0]).val;
      size_t cols = x.rank() == 2 ? x.shape[1] : 1;
      for (size_t i = 0; i < g.numel(); ++i)
        g_in(0).data[n.begin * cols + i] += g.data[i];
      return;
    }
    case Op::kRows: {
      size_t cols = n.shape[1];
      for (size_t i = 0; i < n.indices.size(); ++i)
        for (size_t c = 0; c < cols; ++c)
          g_in(0).data[n.indices[i] * cols + c] += g.data[i * cols + c];
      return;
    }
    case Op::kTranspose: {
      size_t r = n.shape[0], c = n.shape[1];  // shape of this node's output
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j)
          g_in(0).data[j * r + i] += g.data[i * c + j];
      return;
    }
    case Op::kReshape: {
      k::axpy(1.0, g.data.data(), g_in(0).data.data(), g.numel());
      return;
    }
    case Op::kUpsample2: {
      size_t c = at(n.in[0]).val.shape[0], l = at(n.in[0]).val.shape[1];
      for (size_t i = 0; i < c; ++i)
        for (size_t j = 0; j < l; ++j)
          g_in(0).data[i * l + j] +=
              g.data[i * 2 * l + 2 * j] + g.data[i * 2 * l + 2 * j + 1];
      return;
    }
    case Op::kVqQuantize: {
      // Straight-through: the incoming gradient reaches z_e unchanged and
      // the codebook receives nothing here.
      k::axpy(1.0, g.data.data(), g_in(0).data.data(), g.numel());
      return;
    }
    case Op::kCodebookLookup: {
      const Node& vq = at(n.in[1]);
      size_t dim = n.shape[1];
      for (size_t r = 0; r < vq.indices.size(); ++r)
        for (size_t c = 0; c < dim; ++c)
          g_in(0).data[vq.indices[r] * dim + c] += g.data[r * dim + c];
      return;
    }
  }
}

GradResult Graph::backward(NodeId output) {
  require(forward_done_, "backward: run forward first");
  require(at(output).val.numel() == 1,
          "backward: output " + at(output).label + " is not scalar (shape " +
              at(output).val.shape_str() + ")");

  for (Node& n : nodes_) n.grad = Tensor::zeros(n.shape);
  at(output).grad.data[0] = 1.0;

  // Reachability determines which parameters are attached to this output.
  std::vector<char> reach(nodes_.size(), 0);
  std::vector<NodeId> stack = {output};
  reach[output] = 1;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    const Node& n = at(id);
    for (NodeId p : n.in) {
      // vq_quantize contributes no codebook gradient; stop_grad cuts the path.
      if (n.op == Op::kStopGrad) continue;
      if (n.op == Op::kVqQuantize && p == n.in[1]) continue;
      if (!reach[p]) {
        reach[p] = 1;
        stack.push_back(p);
      }
    }
  }

  for (size_t i = nodes_.size(); i-- > 0;) {
    if (!reach[i]) continue;
    backward_node(nodes_[i]);
  }

  GradResult result;
  for (const auto& name : param_order_) {
    NodeId id = params_.at(name);
    result.param_grads[name] = at(id).grad;
    if (!reach[id]) result.detached.insert(name);
  }
  return result;
}

const Tensor& Graph::value(NodeId id) const { return at(id).val; }
const Tensor& Graph::grad(NodeId id) const { return at(id).grad; }
const std::vector<size_t>& Graph::shape(NodeId id) const { return at(id).shape; }

const std::vector<uint32_t>& Graph::vq_indices(NodeId vq_node) const {
  const Node& n = at(vq_node);
  require(n.op == Op::kVqQuantize, "vq_indices: not a vq node");
  return n.indices;
}

void Graph::freeze_quantizers() {
  require(forward_done_, "freeze_quantizers: run forward first");
  for (Node& n : nodes_) {
    if (n.op != Op::kVqQuantize) continue;
    n.frozen_idx = n.indices;
    n.frozen_ze = at(n.in[0]).val;
    n.frozen_cq = n.val;
    n.frozen = true;
  }
}

void Graph::unfreeze_quantizers() {
  for (Node& n : nodes_) {
    if (n.op != Op::kVqQuantize) continue;
    n.frozen = false;
    n.frozen_idx.clear();
    n.frozen_ze = Tensor();
    n.frozen_cq = Tensor();
  }
}

// ---------------------------------------------------------------------------
// finite differences

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double eps) {
  require(eps > 0.0, "finite_difference_gradient: eps must be positive");
  Tensor grad = Tensor::zeros(x.shape);
  Tensor probe = x;
  for (size_t i = 0; i < x.numel(); ++i) {
    double orig = probe.data[i];
    probe.data[i] = orig + eps;
    double hi = f(probe);
    probe.data[i] = orig - eps;
    double lo = f(probe);
    probe.data[i] = orig;
    require(std::isfinite(hi) && std::isfinite(lo),
            "finite_difference_gradient: non-finite function value");
    grad.data[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

double max_rel_err(const Tensor& a, const Tensor& b, double floor) {
  double worst = 0.0;
  for (size_t i = 0; i < a.numel(); ++i) {
    double denom =
        std::max({std::abs(a.data[i]), std::abs(b.data[i]), floor});
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

}  // namespace edgespeech::autodiff
