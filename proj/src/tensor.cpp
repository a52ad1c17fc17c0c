#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kernels.hpp"

namespace prism {

namespace {
constexpr double kBceEps = 1e-12;
constexpr double kCosineEps = 1e-12;
constexpr double kLayerNormEps = 1e-5;

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}
}  // namespace

Value::Value(std::vector<int> s) : shape(std::move(s)) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (int d : shape)
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Value Value::full(std::vector<int> s, double v) {
  Value out(std::move(s));
  std::fill(out.data.begin(), out.data.end(), v);
  return out;
}

Value Value::row(std::vector<double> v) {
  Value out({1, static_cast<int>(v.size())});
  out.data = std::move(v);
  return out;
}

Value Value::matrix(int r, int c, std::vector<double> v) {
  Value out({r, c});
  if (static_cast<int64_t>(v.size()) != out.numel())
    throw ShapeError("matrix data length does not match " + shape_str(out.shape));
  out.data = std::move(v);
  return out;
}

int Value::rows() const {
  if (rank() != 2) throw ShapeError("rows() needs rank-2, got " + shape_str(shape));
  return shape[0];
}

int Value::cols() const {
  if (rank() != 2) throw ShapeError("cols() needs rank-2, got " + shape_str(shape));
  return shape[1];
}

double Value::scalar() const {
  if (numel() != 1) throw ShapeError("scalar() needs a single element, got " + shape_str(shape));
  return data[0];
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Parameter& ParamStore::create(const std::string& name, std::vector<int> shape) {
  if (index_.count(name)) throw StateError("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, std::move(shape)));
  index_[name] = params_.back().get();
  return *params_.back();
}

Parameter& ParamStore::at(const std::string& name) const {
  Parameter* p = find(name);
  if (!p) throw StateError("unknown parameter: " + name);
  return *p;
}

Parameter* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

int64_t ParamStore::scalar_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (const auto& p : params_) p->zero_grad();
}

double ParamStore::grad_norm() const {
  double ss = 0.0;
  for (const auto& p : params_)
    for (double g : p->grad.data) ss += g * g;
  return std::sqrt(ss);
}

std::vector<Value> ParamStore::snapshot_values() const {
  std::vector<Value> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParamStore::restore_values(const std::vector<Value>& values) {
  if (values.size() != params_.size())
    throw StateError("snapshot size does not match parameter store");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i]->value))
      throw ShapeError("snapshot shape mismatch for " + params_[i]->name);
    params_[i]->value = values[i];
  }
}

// ---------------------------------------------------------------------------
// Tape

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Value& Tape::v(Tensor t) const {
  if (!t.valid() || t.id >= static_cast<int>(nodes_.size()))
    throw StateError("tensor handle does not belong to this record");
  return nodes_[static_cast<size_t>(t.id)].out;
}

const Value& Tape::val(Tensor t) const { return v(t); }

const Value& Tape::grad(Tensor t) const {
  if (!backward_done_) throw StateError("no backward pass has run on this record");
  if (!t.valid() || t.id >= static_cast<int>(grads_.size()))
    throw StateError("tensor handle does not belong to this record");
  return grads_[static_cast<size_t>(t.id)];
}

void Tape::check_finite(const Value& out, const char* op) const {
  for (double x : out.data)
    if (!std::isfinite(x))
      throw NumericError(std::string("non-finite value produced by ") + op);
}

Tensor Tape::constant(Value val) {
  Node n;
  n.op = Op::Constant;
  n.out = std::move(val);
  check_finite(n.out, "constant");
  return {push(std::move(n))};
}

Tensor Tape::leaf(Parameter& p) {
  auto it = leaf_cache_.find(&p);
  if (it != leaf_cache_.end()) return {it->second};
  Node n;
  n.op = Op::Leaf;
  n.out = p.value;
  n.param = &p;
  check_finite(n.out, ("leaf " + p.name).c_str());
  const int id = push(std::move(n));
  leaf_cache_[&p] = id;
  return {id};
}

Tensor Tape::matmul(Tensor a, Tensor b) {
  const Value& av = v(a);
  const Value& bv = v(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
    throw ShapeError("matmul shape mismatch: " + shape_str(av.shape) + " * " + shape_str(bv.shape));
  Node n;
  n.op = Op::Matmul;
  n.in = {a.id, b.id};
  n.out = Value::zeros({av.rows(), bv.cols()});
  kernels::gemm_nn(av.data.data(), bv.data.data(), n.out.data.data(), av.rows(), av.cols(),
                   bv.cols());
  check_finite(n.out, "matmul");
  return {push(std::move(n))};
}

Tensor Tape::matmul_nt(Tensor a, Tensor b) {
  const Value& av = v(a);
  const Value& bv = v(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols())
    throw ShapeError("matmul_nt shape mismatch: " + shape_str(av.shape) + " * " +
                     shape_str(bv.shape) + "^T");
  Node n;
  n.op = Op::MatmulNT;
  n.in = {a.id, b.id};
  n.out = Value::zeros({av.rows(), bv.rows()});
  kernels::gemm_nt(av.data.data(), bv.data.data(), n.out.data.data(), av.rows(), av.cols(),
                   bv.rows());
  check_finite(n.out, "matmul_nt");
  return {push(std::move(n))};
}

Tensor Tape::add(Tensor a, Tensor b) {
  const Value& av = v(a);
  const Value& bv = v(b);
  if (!av.same_shape(bv))
    throw ShapeError("add shape mismatch: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Node n;
  n.op = Op::Add;
  n.in = {a.id, b.id};
  n.out = av;
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] += bv.data[i];
  check_finite(n.out, "add");
  return {push(std::move(n))};
}

Tensor Tape::add_row(Tensor m, Tensor row) {
  const Value& mv = v(m);
  const Value& rv = v(row);
  if (mv.rank() != 2 || rv.rank() != 2 || rv.rows() != 1 || rv.cols() != mv.cols())
    throw ShapeError("add_row shape mismatch: " + shape_str(mv.shape) + " vs " +
                     shape_str(rv.shape));
  Node n;
  n.op = Op::AddRow;
  n.in = {m.id, row.id};
  n.out = mv;
  const int c = mv.cols();
  for (int i = 0; i < mv.rows(); ++i)
    for (int j = 0; j < c; ++j) n.out.at(i, j) += rv.data[static_cast<size_t>(j)];
  check_finite(n.out, "add_row");
  return {push(std::move(n))};
}

Tensor Tape::mul(Tensor a, Tensor b) {
  const Value& av = v(a);
  const Value& bv = v(b);
  if (!av.same_shape(bv))
    throw ShapeError("mul shape mismatch: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Node n;
  n.op = Op::Mul;
  n.in = {a.id, b.id};
  n.out = av;
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] *= bv.data[i];
  check_finite(n.out, "mul");
  return {push(std::move(n))};
}

Tensor Tape::scale(Tensor a, double c) {
  Node n;
  n.op = Op::Scale;
  n.in = {a.id};
  n.scalar = c;
  n.out = v(a);
  for (double& x : n.out.data) x *= c;
  check_finite(n.out, "scale");
  return {push(std::move(n))};
}

Tensor Tape::tanh(Tensor a) {
  Node n;
  n.op = Op::Tanh;
  n.in = {a.id};
  n.out = v(a);
  for (double& x : n.out.data) x = std::tanh(x);
  check_finite(n.out, "tanh");
  return {push(std::move(n))};
}

Tensor Tape::sigmoid(Tensor a) {
  Node n;
  n.op = Op::Sigmoid;
  n.in = {a.id};
  n.out = v(a);
  for (double& x : n.out.data) {
    if (x >= 0.0) {
      x = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      x = e / (1.0 + e);
    }
  }
  check_finite(n.out, "sigmoid");
  return {push(std::move(n))};
}

Tensor Tape::softmax_rows(Tensor a) {
  const Value& av = v(a);
  if (av.rank() != 2) throw ShapeError("softmax_rows needs rank-2, got " + shape_str(av.shape));
  Node n;
  n.op = Op::SoftmaxRows;
  n.in = {a.id};
  n.out = av;
  const int r = av.rows(), c = av.cols();
  for (int i = 0; i < r; ++i) {
    double* row = n.out.data.data() + static_cast<int64_t>(i) * c;
    const double m = *std::max_element(row, row + c);
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - m);
      s += row[j];
    }
    for (int j = 0; j < c; ++j) row[j] /= s;
  }
  check_finite(n.out, "softmax_rows");
  return {push(std::move(n))};
}

Tensor Tape::layer_norm_rows(Tensor x, Tensor gain, Tensor bias) {
  const Value& xv = v(x);
  const Value& gv = v(gain);
  const Value& bv = v(bias);
  if (xv.rank() != 2) throw ShapeError("layer_norm needs rank-2, got " + shape_str(xv.shape));
  if (gv.rank() != 2 || gv.rows() != 1 || gv.cols() != xv.cols() || !gv.same_shape(bv))
    throw ShapeError("layer_norm gain/bias must be [1x" + std::to_string(xv.cols()) + "]");
  const int r = xv.rows(), c = xv.cols();
  Node n;
  n.op = Op::LayerNormRows;
  n.in = {x.id, gain.id, bias.id};
  n.out = Value::zeros({r, c});
  n.aux = Value::zeros({r, c});   // normalized activations
  n.aux2 = Value::zeros({r, 1});  // 1 / std per row
  for (int i = 0; i < r; ++i) {
    const double* xi = xv.data.data() + static_cast<int64_t>(i) * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += xi[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= c;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    n.aux2.data[static_cast<size_t>(i)] = inv_std;
    for (int j = 0; j < c; ++j) {
      const double xhat = (xi[j] - mean) * inv_std;
      n.aux.at(i, j) = xhat;
      n.out.at(i, j) = gv.data[static_cast<size_t>(j)] * xhat + bv.data[static_cast<size_t>(j)];
    }
  }
  check_finite(n.out, "layer_norm_rows");
  return {push(std::move(n))};
}

Tensor Tape::logsumexp_rows(Tensor a) {
  const Value& av = v(a);
  if (av.rank() != 2) throw ShapeError("logsumexp_rows needs rank-2, got " + shape_str(av.shape));
  const int k = av.rows(), d = av.cols();
  if (k < 1) throw DataError("logsumexp_rows over an empty pool");
  Node n;
  n.op = Op::LogsumexpRows;
  n.in = {a.id};
  n.out = Value::zeros({1, d});
  for (int j = 0; j < d; ++j) {
    double m = av.at(0, j);
    for (int i = 1; i < k; ++i) m = std::max(m, av.at(i, j));
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += std::exp(av.at(i, j) - m);
    n.out.data[static_cast<size_t>(j)] = m + std::log(s);
  }
  check_finite(n.out, "logsumexp_rows");
  return {push(std::move(n))};
}

Tensor Tape::gather_rows(Tensor a, std::vector<int> idx) {
  const Value& av = v(a);
  if (av.rank() != 2) throw ShapeError("gather_rows needs rank-2, got " + shape_str(av.shape));
  if (idx.empty()) throw ShapeError("gather_rows needs at least one index");
  for (int i : idx)
    if (i < 0 || i >= av.rows())
      throw ShapeError("gather_rows index " + std::to_string(i) + " outside " +
                       shape_str(av.shape));
  const int c = av.cols();
  Node n;
  n.op = Op::GatherRows;
  n.in = {a.id};
  n.out = Value::zeros({static_cast<int>(idx.size()), c});
  for (size_t i = 0; i < idx.size(); ++i)
    std::memcpy(n.out.data.data() + i * static_cast<size_t>(c),
                av.data.data() + static_cast<size_t>(idx[i]) * c, sizeof(double) * c);
  n.ints = std::move(idx);
  return {push(std::move(n))};
}

Tensor Tape::slice_cols(Tensor a, int lo, int len) {
  const Value& av = v(a);
  if (av.rank() != 2) throw ShapeError("slice_cols needs rank-2, got " + shape_str(av.shape));
  if (lo < 0 || len <= 0 || lo + len > av.cols())
    throw ShapeError("slice_cols [" + std::to_string(lo) + ", " + std::to_string(lo + len) +
                     ") outside " + shape_str(av.shape));
  Node n;
  n.op = Op::SliceCols;
  n.in = {a.id};
  n.ints = {lo, len};
  n.out = Value::zeros({av.rows(), len});
  for (int i = 0; i < av.rows(); ++i)
    std::memcpy(n.out.data.data() + static_cast<size_t>(i) * len,
                av.data.data() + static_cast<size_t>(i) * av.cols() + lo, sizeof(double) * len);
  return {push(std::move(n))};
}

Tensor Tape::concat_cols(Tensor a, Tensor b) {
  const Value& av = v(a);
  const Value& bv = v(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.rows() != bv.rows())
    throw ShapeError("concat_cols shape mismatch: " + shape_str(av.shape) + " | " +
                     shape_str(bv.shape));
  Node n;
  n.op = Op::ConcatCols;
  n.in = {a.id, b.id};
  const int ac = av.cols(), bc = bv.cols();
  n.out = Value::zeros({av.rows(), ac + bc});
  for (int i = 0; i < av.rows(); ++i) {
    std::memcpy(n.out.data.data() + static_cast<size_t>(i) * (ac + bc),
                av.data.data() + static_cast<size_t>(i) * ac, sizeof(double) * ac);
    std::memcpy(n.out.data.data() + static_cast<size_t>(i) * (ac + bc) + ac,
                bv.data.data() + static_cast<size_t>(i) * bc, sizeof(double) * bc);
  }
  return {push(std::move(n))};
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows needs at least one part");
  const int c = v(parts[0]).cols();
  int r = 0;
  for (Tensor t : parts) {
    const Value& tv = v(t);
    if (tv.rank() != 2 || tv.cols() != c)
      throw ShapeError("concat_rows column mismatch at " + shape_str(tv.shape));
    r += tv.rows();
  }
  Node n;
  n.op = Op::ConcatRows;
  n.out = Value::zeros({r, c});
  double* dst = n.out.data.data();
  for (Tensor t : parts) {
    const Value& tv = v(t);
    n.in.push_back(t.id);
    std::memcpy(dst, tv.data.data(), sizeof(double) * tv.data.size());
    dst += tv.data.size();
  }
  return {push(std::move(n))};
}

Tensor Tape::dropout(Tensor a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  const Value& av = v(a);
  Node n;
  n.op = Op::Dropout;
  n.in = {a.id};
  n.aux = Value::zeros(av.shape);  // mask, pre-scaled by 1/(1-rate)
  const double keep = 1.0 - rate;
  for (double& m : n.aux.data) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  n.out = av;
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] *= n.aux.data[i];
  check_finite(n.out, "dropout");
  return {push(std::move(n))};
}

Tensor Tape::cosine_matrix(Tensor a, Tensor b) {
  const Value& av = v(a);
  const Value& bv = v(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols())
    throw ShapeError("cosine_matrix shape mismatch: " + shape_str(av.shape) + " vs " +
                     shape_str(bv.shape));
  const int p = av.rows(), r = bv.rows(), d = av.cols();
  Node n;
  n.op = Op::CosineMatrix;
  n.in = {a.id, b.id};
  n.aux = Value::zeros({p, 1});
  n.aux2 = Value::zeros({r, 1});
  for (int i = 0; i < p; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += av.at(i, j) * av.at(i, j);
    n.aux.data[static_cast<size_t>(i)] = std::sqrt(s);
  }
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += bv.at(i, j) * bv.at(i, j);
    n.aux2.data[static_cast<size_t>(i)] = std::sqrt(s);
  }
  n.out = Value::zeros({p, r});
  for (int i = 0; i < p; ++i) {
    const double na = n.aux.data[static_cast<size_t>(i)];
    for (int j = 0; j < r; ++j) {
      const double nb = n.aux2.data[static_cast<size_t>(j)];
      if (na < kCosineEps || nb < kCosineEps) continue;  // defined as 0
      double dot = 0.0;
      for (int t = 0; t < d; ++t) dot += av.at(i, t) * bv.at(j, t);
      n.out.at(i, j) = std::clamp(dot / (na * nb), -1.0, 1.0);
    }
  }
  check_finite(n.out, "cosine_matrix");
  return {push(std::move(n))};
}

Tensor Tape::cosine(Tensor a, Tensor b) { return cosine_matrix(a, b); }

Tensor Tape::bilinear(Tensor zh, Tensor zt, Tensor w, Tensor b) {
  const Value& hv = v(zh);
  const Value& tv = v(zt);
  const Value& wv = v(w);
  const Value& bv = v(b);
  if (hv.rank() != 2 || tv.rank() != 2 || !hv.same_shape(tv))
    throw ShapeError("bilinear pair shape mismatch: " + shape_str(hv.shape) + " vs " +
                     shape_str(tv.shape));
  const int p = hv.rows(), h = hv.cols();
  if (wv.rank() != 3 || wv.shape[1] != h || wv.shape[2] != h)
    throw ShapeError("bilinear weight must be {r, " + std::to_string(h) + ", " +
                     std::to_string(h) + "}, got " + shape_str(wv.shape));
  const int r = wv.shape[0];
  if (bv.rank() != 2 || bv.rows() != 1 || bv.cols() != r)
    throw ShapeError("bilinear bias must be [1x" + std::to_string(r) + "], got " +
                     shape_str(bv.shape));
  Node n;
  n.op = Op::Bilinear;
  n.in = {zh.id, zt.id, w.id, b.id};
  n.out = Value::zeros({p, r});
  std::vector<double> tmp(static_cast<size_t>(p) * h);
  for (int rel = 0; rel < r; ++rel) {
    const double* wr = wv.data.data() + static_cast<int64_t>(rel) * h * h;
    kernels::gemm_nn(hv.data.data(), wr, tmp.data(), p, h, h);
    for (int i = 0; i < p; ++i) {
      double s = 0.0;
      const double* ti = tv.data.data() + static_cast<int64_t>(i) * h;
      const double* mi = tmp.data() + static_cast<int64_t>(i) * h;
      for (int j = 0; j < h; ++j) s += mi[j] * ti[j];
      n.out.at(i, rel) = s + bv.data[static_cast<size_t>(rel)];
    }
  }
  check_finite(n.out, "bilinear");
  return {push(std::move(n))};
}

Tensor Tape::bce_sum(Tensor p, Value targets) {
  const Value& pv = v(p);
  if (!pv.same_shape(targets))
    throw ShapeError("bce targets shape mismatch: " + shape_str(pv.shape) + " vs " +
                     shape_str(targets.shape));
  Node n;
  n.op = Op::BceSum;
  n.in = {p.id};
  n.aux = std::move(targets);
  double loss = 0.0;
  for (size_t i = 0; i < pv.data.size(); ++i) {
    const double pc = std::clamp(pv.data[i], kBceEps, 1.0 - kBceEps);
    const double y = n.aux.data[i];
    loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
  }
  n.out = Value::matrix(1, 1, {loss});
  check_finite(n.out, "bce");
  return {push(std::move(n))};
}

Tensor Tape::sum_all(Tensor a) {
  Node n;
  n.op = Op::SumAll;
  n.in = {a.id};
  double s = 0.0;
  for (double x : v(a).data) s += x;
  n.out = Value::matrix(1, 1, {s});
  check_finite(n.out, "sum_all");
  return {push(std::move(n))};
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  leaf_cache_.clear();
  backward_done_ = false;
}

void Tape::backward(Tensor loss, double seed) {
  if (backward_done_)
    throw StateError("backward() called twice on one record; reset() between passes");
  const Value& lv = v(loss);
  if (lv.numel() != 1)
    throw ShapeError("backward needs a scalar loss node, got " + shape_str(lv.shape));
  grads_.clear();
  grads_.reserve(nodes_.size());
  for (const Node& n : nodes_) grads_.push_back(Value::zeros(n.out.shape));
  grads_[static_cast<size_t>(loss.id)].data[0] = seed;
  for (int id = loss.id; id >= 0; --id) backprop_node(id, grads_);
  backward_done_ = true;
}

void Tape::backprop_node(int id, std::vector<Value>& grads) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const Value& g = grads[static_cast<size_t>(id)];
  auto in_val = [&](int slot) -> const Value& {
    return nodes_[static_cast<size_t>(n.in[static_cast<size_t>(slot)])].out;
  };
  auto in_grad = [&](int slot) -> Value& {
    return grads[static_cast<size_t>(n.in[static_cast<size_t>(slot)])];
  };

  switch (n.op) {
    case Op::Constant:
      break;
    case Op::Leaf:
      if (n.param)
        for (size_t i = 0; i < g.data.size(); ++i) n.param->grad.data[i] += g.data[i];
      break;
    case Op::Matmul: {
      const Value& a = in_val(0);
      const Value& b = in_val(1);
      // dA += dC * B^T ; dB += A^T * dC
      kernels::gemm_nt(g.data.data(), b.data.data(), in_grad(0).data.data(), a.rows(), b.cols(),
                       b.rows(), true);
      kernels::gemm_tn(a.data.data(), g.data.data(), in_grad(1).data.data(), a.cols(), a.rows(),
                       b.cols(), true);
      break;
    }
    case Op::MatmulNT: {
      const Value& a = in_val(0);
      const Value& b = in_val(1);
      // C = A B^T: dA += dC * B ; dB += dC^T * A
      kernels::gemm_nn(g.data.data(), b.data.data(), in_grad(0).data.data(), a.rows(), b.rows(),
                       b.cols(), true);
      kernels::gemm_tn(g.data.data(), a.data.data(), in_grad(1).data.data(), b.rows(), a.rows(),
                       a.cols(), true);
      break;
    }
    case Op::Add:
      for (size_t i = 0; i < g.data.size(); ++i) {
        in_grad(0).data[i] += g.data[i];
        in_grad(1).data[i] += g.data[i];
      }
      break;
    case Op::AddRow: {
      Value& dm = in_grad(0);
      Value& dr = in_grad(1);
      const int c = n.out.cols();
      for (int i = 0; i < n.out.rows(); ++i)
        for (int j = 0; j < c; ++j) {
          dm.at(i, j) += g.at(i, j);
          dr.data[static_cast<size_t>(j)] += g.at(i, j);
        }
      break;
    }
    case Op::Mul: {
      const Value& a = in_val(0);
      const Value& b = in_val(1);
      for (size_t i = 0; i < g.data.size(); ++i) {
        in_grad(0).data[i] += g.data[i] * b.data[i];
        in_grad(1).data[i] += g.data[i] * a.data[i];
      }
      break;
    }
    case Op::Scale:
      for (size_t i = 0; i < g.data.size(); ++i) in_grad(0).data[i] += g.data[i] * n.scalar;
      break;
    case Op::Tanh:
      for (size_t i = 0; i < g.data.size(); ++i) {
        const double y = n.out.data[i];
        in_grad(0).data[i] += g.data[i] * (1.0 - y * y);
      }
      break;
    case Op::Sigmoid:
      for (size_t i = 0; i < g.data.size(); ++i) {
        const double y = n.out.data[i];
        in_grad(0).data[i] += g.data[i] * y * (1.0 - y);
      }
      break;
    case Op::SoftmaxRows: {
      const int r = n.out.rows(), c = n.out.cols();
      Value& dx = in_grad(0);
      for (int i = 0; i < r; ++i) {
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += g.at(i, j) * n.out.at(i, j);
        for (int j = 0; j < c; ++j) dx.at(i, j) += n.out.at(i, j) * (g.at(i, j) - dot);
      }
      break;
    }
    case Op::LayerNormRows: {
      const Value& gv = in_val(1);
      const int r = n.out.rows(), c = n.out.cols();
      Value& dx = in_grad(0);
      Value& dgain = in_grad(1);
      Value& dbias = in_grad(2);
      for (int i = 0; i < r; ++i) {
        const double inv_std = n.aux2.data[static_cast<size_t>(i)];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < c; ++j) {
          const double dy = g.at(i, j);
          const double xhat = n.aux.at(i, j);
          const double dxhat = dy * gv.data[static_cast<size_t>(j)];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          dgain.data[static_cast<size_t>(j)] += dy * xhat;
          dbias.data[static_cast<size_t>(j)] += dy;
        }
        for (int j = 0; j < c; ++j) {
          const double dxhat = g.at(i, j) * gv.data[static_cast<size_t>(j)];
          const double xhat = n.aux.at(i, j);
          dx.at(i, j) +=
              inv_std * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / static_cast<double>(c));
        }
      }
      break;
    }
    case Op::LogsumexpRows: {
      const Value& x = in_val(0);
      const int k = x.rows(), d = x.cols();
      Value& dx = in_grad(0);
      for (int j = 0; j < d; ++j) {
        const double out_j = n.out.data[static_cast<size_t>(j)];
        const double gj = g.data[static_cast<size_t>(j)];
        for (int i = 0; i < k; ++i) dx.at(i, j) += gj * std::exp(x.at(i, j) - out_j);
      }
      break;
    }
    case Op::GatherRows: {
      Value& dx = in_grad(0);
      const int c = n.out.cols();
      for (size_t i = 0; i < n.ints.size(); ++i) {
        const int src = n.ints[i];
        for (int j = 0; j < c; ++j) dx.at(src, j) += g.at(static_cast<int>(i), j);
      }
      break;
    }
    case Op::SliceCols: {
      Value& dx = in_grad(0);
      const int lo = n.ints[0], len = n.ints[1];
      for (int i = 0; i < n.out.rows(); ++i)
        for (int j = 0; j < len; ++j) dx.at(i, lo + j) += g.at(i, j);
      break;
    }
    case Op::ConcatCols: {
      Value& da = in_grad(0);
      Value& db = in_grad(1);
      const int ac = da.cols(), bc = db.cols();
      for (int i = 0; i < n.out.rows(); ++i) {
        for (int j = 0; j < ac; ++j) da.at(i, j) += g.at(i, j);
        for (int j = 0; j < bc; ++j) db.at(i, j) += g.at(i, ac + j);
      }
      break;
    }
    case Op::ConcatRows: {
      int row0 = 0;
      for (size_t part = 0; part < n.in.size(); ++part) {
        Value& dp = grads[static_cast<size_t>(n.in[part])];
        for (int i = 0; i < dp.rows(); ++i)
          for (int j = 0; j < dp.cols(); ++j) dp.at(i, j) += g.at(row0 + i, j);
        row0 += dp.rows();
      }
      break;
    }
    case Op::Dropout:
      for (size_t i = 0; i < g.data.size(); ++i)
        in_grad(0).data[i] += g.data[i] * n.aux.data[i];
      break;
    case Op::CosineMatrix: {
      const Value& a = in_val(0);
      const Value& b = in_val(1);
      Value& da = in_grad(0);
      Value& db = in_grad(1);
      const int p = a.rows(), r = b.rows(), d = a.cols();
      for (int i = 0; i < p; ++i) {
        const double na = n.aux.data[static_cast<size_t>(i)];
        if (na < kCosineEps) continue;
        for (int j = 0; j < r; ++j) {
          const double nb = n.aux2.data[static_cast<size_t>(j)];
          if (nb < kCosineEps) continue;
          const double gij = g.at(i, j);
          if (gij == 0.0) continue;
          const double cos_ij = n.out.at(i, j);
          const double inv_ab = 1.0 / (na * nb);
          for (int t = 0; t < d; ++t) {
            da.at(i, t) += gij * (b.at(j, t) * inv_ab - cos_ij * a.at(i, t) / (na * na));
            db.at(j, t) += gij * (a.at(i, t) * inv_ab - cos_ij * b.at(j, t) / (nb * nb));
          }
        }
      }
      break;
    }
    case Op::Bilinear: {
      const Value& zh = in_val(0);
      const Value& zt = in_val(1);
      const Value& w = in_val(2);
      Value& dzh = in_grad(0);
      Value& dzt = in_grad(1);
      Value& dw = in_grad(2);
      Value& dbias = in_grad(3);
      const int p = zh.rows(), h = zh.cols(), r = w.shape[0];
      std::vector<double> scaled(static_cast<size_t>(p) * h);
      std::vector<double> tmp(static_cast<size_t>(p) * h);
      for (int rel = 0; rel < r; ++rel) {
        const double* wr = w.data.data() + static_cast<int64_t>(rel) * h * h;
        double* dwr = dw.data.data() + static_cast<int64_t>(rel) * h * h;
        // dzh += diag(g[:,rel]) * (zt * wr^T) ; dzt += diag(g[:,rel]) * (zh * wr)
        kernels::gemm_nt(zt.data.data(), wr, tmp.data(), p, h, h);
        for (int i = 0; i < p; ++i) {
          const double gi = g.at(i, rel);
          if (gi == 0.0) continue;
          for (int j = 0; j < h; ++j) dzh.at(i, j) += gi * tmp[static_cast<size_t>(i) * h + j];
        }
        kernels::gemm_nn(zh.data.data(), wr, tmp.data(), p, h, h);
        for (int i = 0; i < p; ++i) {
          const double gi = g.at(i, rel);
          if (gi == 0.0) continue;
          for (int j = 0; j < h; ++j) dzt.at(i, j) += gi * tmp[static_cast<size_t>(i) * h + j];
          dbias.data[static_cast<size_t>(rel)] += gi;
        }
        // dW_r += (zh scaled by g[:,rel])^T * zt
        for (int i = 0; i < p; ++i) {
          const double gi = g.at(i, rel);
          for (int j = 0; j < h; ++j) scaled[static_cast<size_t>(i) * h + j] = gi * zh.at(i, j);
        }
        kernels::gemm_tn(scaled.data(), zt.data.data(), dwr, h, p, h, true);
      }
      break;
    }
    case Op::BceSum: {
      const Value& pv = in_val(0);
      Value& dp = in_grad(0);
      const double gs = g.data[0];
      for (size_t i = 0; i < pv.data.size(); ++i) {
        const double p = pv.data[i];
        if (p <= kBceEps || p >= 1.0 - kBceEps) continue;  // clamp region: flat
        const double y = n.aux.data[i];
        dp.data[i] += gs * (p - y) / (p * (1.0 - p));
      }
      break;
    }
    case Op::SumAll:
      for (double& d : in_grad(0).data) d += g.data[0];
      break;
  }
}

}  // namespace prism
