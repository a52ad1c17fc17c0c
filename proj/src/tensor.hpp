#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace prism {

// Dense row-major double array. Rank 1 and 2 cover almost everything; rank 3
// is used for the per-relation bilinear weight stack.
struct Value {
  std::vector<int> shape;
  std::vector<double> data;

  Value() = default;
  explicit Value(std::vector<int> s);

  static Value zeros(std::vector<int> s) { return Value(std::move(s)); }
  static Value full(std::vector<int> s, double v);
  static Value row(std::vector<double> v);                  // [1 x n]
  static Value matrix(int r, int c, std::vector<double> v);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const;
  int cols() const;
  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }
  double scalar() const;

  bool same_shape(const Value& o) const { return shape == o.shape; }
};

std::string shape_str(const std::vector<int>& shape);

// Learnable array plus its gradient accumulator. Gradients are zero after
// reset and before any backward pass; Tape::backward adds into them.
struct Parameter {
  std::string name;
  Value value;
  Value grad;

  Parameter(std::string n, std::vector<int> shape)
      : name(std::move(n)), value(Value::zeros(shape)), grad(Value::zeros(shape)) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Ordered parameter collection. Order is creation order and is the canonical
// order for checkpoints, gradient norms and optimizer state.
class ParamStore {
 public:
  Parameter& create(const std::string& name, std::vector<int> shape);
  Parameter& at(const std::string& name) const;
  Parameter* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  size_t size() const { return params_.size(); }
  int64_t scalar_count() const;
  void zero_grads();
  double grad_norm() const;  // global L2 over every parameter
  std::vector<Value> snapshot_values() const;
  void restore_values(const std::vector<Value>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> index_;
};

// Handle into a Tape node.
struct Tensor {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Append-only computation record for one forward pass. Nodes are stored in
// topological (creation) order; backward() walks them in reverse and
// accumulates into every reachable Parameter's gradient. A record is
// single-threaded; run one per thread for parallel evaluation.
class Tape {
 public:
  Tensor constant(Value v);
  Tensor leaf(Parameter& p);

  Tensor matmul(Tensor a, Tensor b);     // [m x k] * [k x n]
  Tensor matmul_nt(Tensor a, Tensor b);  // [m x k] * [n x k]^T
  Tensor add(Tensor a, Tensor b);
  Tensor add_row(Tensor m, Tensor row);  // broadcast [1 x c] over rows
  Tensor mul(Tensor a, Tensor b);
  Tensor scale(Tensor a, double c);
  Tensor tanh(Tensor a);
  Tensor sigmoid(Tensor a);
  Tensor softmax_rows(Tensor a);
  Tensor layer_norm_rows(Tensor x, Tensor gain, Tensor bias);
  Tensor logsumexp_rows(Tensor a);  // [k x d] -> [1 x d], overflow-safe
  Tensor gather_rows(Tensor a, std::vector<int> idx);
  Tensor slice_cols(Tensor a, int lo, int len);
  Tensor concat_cols(Tensor a, Tensor b);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor dropout(Tensor a, double rate, Rng& rng);
  // Pairwise cosine of the rows of a [p x d] and b [r x d] -> [p x r].
  // Rows with norm below 1e-12 yield 0 with zero gradient.
  Tensor cosine_matrix(Tensor a, Tensor b);
  Tensor cosine(Tensor a, Tensor b);  // [1 x d], [1 x d] -> [1 x 1]
  // s[p][r] = zh_p^T W_r zt_p + b_r  with W shaped {r, h, h}, b [1 x r].
  Tensor bilinear(Tensor zh, Tensor zt, Tensor w, Tensor b);
  // Sum of elementwise binary cross-entropy; p clamped to [1e-12, 1 - 1e-12].
  Tensor bce_sum(Tensor p, Value targets);
  Tensor sum_all(Tensor a);

  // Stable for the lifetime of the record: appending further nodes never
  // invalidates the returned reference.
  const Value& val(Tensor t) const;
  // Gradient of the last backward() w.r.t. a node (zeros if unreachable).
  const Value& grad(Tensor t) const;

  void backward(Tensor loss, double seed = 1.0);
  void reset();
  size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Constant,
    Leaf,
    Matmul,
    MatmulNT,
    Add,
    AddRow,
    Mul,
    Scale,
    Tanh,
    Sigmoid,
    SoftmaxRows,
    LayerNormRows,
    LogsumexpRows,
    GatherRows,
    SliceCols,
    ConcatCols,
    ConcatRows,
    Dropout,
    CosineMatrix,
    Bilinear,
    BceSum,
    SumAll,
  };

  struct Node {
    Op op;
    std::vector<int> in;
    Value out;
    Parameter* param = nullptr;
    double scalar = 0.0;
    std::vector<int> ints;
    Value aux;   // op-specific saved state (masks, norms, targets, ...)
    Value aux2;
  };

  int push(Node n);
  const Value& v(Tensor t) const;
  void check_finite(const Value& out, const char* op) const;
  void backprop_node(int id, std::vector<Value>& grads);

  std::deque<Node> nodes_;
  std::vector<Value> grads_;
  std::unordered_map<const Parameter*, int> leaf_cache_;
  bool backward_done_ = false;
};

}  // namespace prism
