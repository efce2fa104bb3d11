#pragma once

// Reverse-mode automatic differentiation over dense f64 tensors.
//
// Every tensor lives on a Tape. Values are computed eagerly when a node is
// recorded; backward() builds the adjoint computation out of the same
// primitive nodes, so gradients are themselves differentiable and a second
// backward pass yields second-order derivatives (needed for the gradient
// penalty term).

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace did {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OpKind {
  leaf,
  add, sub, mul, div_,
  matmul,     // A[m,k] * B[k,n]
  matmul_nt,  // A[m,k] * B[n,k]^T
  matmul_tn,  // A[k,m]^T * B[k,n]
  sum, mean, fill,
  row_sums, col_sums, bcast_rows, bcast_cols,
  scale, offset,
  square, sqrt_, abs_, sign_, lrelu, lrelu_mask, tanh_,
  concat_cols, slice_cols, pad_cols, slice_rows, pad_rows,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div_: return "div";
    case OpKind::matmul: return "matmul";
    case OpKind::matmul_nt: return "matmul_nt";
    case OpKind::matmul_tn: return "matmul_tn";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::fill: return "fill";
    case OpKind::row_sums: return "row_sums";
    case OpKind::col_sums: return "col_sums";
    case OpKind::bcast_rows: return "bcast_rows";
    case OpKind::bcast_cols: return "bcast_cols";
    case OpKind::scale: return "scale";
    case OpKind::offset: return "offset";
    case OpKind::square: return "square";
    case OpKind::sqrt_: return "sqrt";
    case OpKind::abs_: return "abs";
    case OpKind::sign_: return "sign";
    case OpKind::lrelu: return "leaky_relu";
    case OpKind::lrelu_mask: return "leaky_relu_mask";
    case OpKind::tanh_: return "tanh";
    case OpKind::concat_cols: return "concat";
    case OpKind::slice_cols: return "slice_cols";
    case OpKind::pad_cols: return "pad_cols";
    case OpKind::slice_rows: return "slice_rows";
    case OpKind::pad_rows: return "pad_rows";
  }
  return "?";
}

class Tape;

// Handle into a Tape. Cheap to copy; the node owns shape and values.
struct Tensor {
  Tape* tape = nullptr;
  int id = -1;

  const Shape& shape() const;
  const std::vector<double>& data() const;
  double scalar() const;
  std::size_t size() const { return numel(shape()); }
  bool all_finite() const;
};

class Tape {
 public:
  struct Node {
    OpKind op;
    int a = -1, b = -1;
    Shape shape;
    std::vector<double> val;
    double c = 0.0;          // scale factor / offset / lrelu alpha
    std::size_t p0 = 0, p1 = 0;  // slice/pad geometry
  };

  std::vector<Node> nodes;

  Tensor leaf(Shape shape, std::vector<double> data) {
    if (numel(shape) != data.size())
      throw ShapeError("leaf: shape " + shape_str(shape) + " does not match data length " +
                       std::to_string(data.size()));
    nodes.push_back(Node{OpKind::leaf, -1, -1, std::move(shape), std::move(data)});
    return Tensor{this, static_cast<int>(nodes.size() - 1)};
  }

  Tensor leaf_scalar(double v) { return leaf(Shape{}, {v}); }

  Tensor zeros(const Shape& shape) { return leaf(shape, std::vector<double>(numel(shape), 0.0)); }

  // ---- elementwise binary ----
  Tensor add(Tensor a, Tensor b) { return binary(OpKind::add, a, b); }
  Tensor sub(Tensor a, Tensor b) { return binary(OpKind::sub, a, b); }
  Tensor mul(Tensor a, Tensor b) { return binary(OpKind::mul, a, b); }
  Tensor div(Tensor a, Tensor b) { return binary(OpKind::div_, a, b); }

  // ---- matrix products ----
  Tensor matmul(Tensor a, Tensor b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const auto& sa = node(a).shape;
    const auto& sb = node(b).shape;
    if (sa[1] != sb[0])
      throw ShapeError(std::string("matmul: inner dims disagree, ") + shape_str(sa) + " vs " + shape_str(sb));
    return record(OpKind::matmul, a.id, b.id, Shape{sa[0], sb[1]});
  }
  Tensor matmul_nt(Tensor a, Tensor b) {
    require_rank(a, 2, "matmul_nt");
    require_rank(b, 2, "matmul_nt");
    const auto& sa = node(a).shape;
    const auto& sb = node(b).shape;
    if (sa[1] != sb[1])
      throw ShapeError(std::string("matmul_nt: inner dims disagree, ") + shape_str(sa) + " vs " + shape_str(sb));
    return record(OpKind::matmul_nt, a.id, b.id, Shape{sa[0], sb[0]});
  }
  Tensor matmul_tn(Tensor a, Tensor b) {
    require_rank(a, 2, "matmul_tn");
    require_rank(b, 2, "matmul_tn");
    const auto& sa = node(a).shape;
    const auto& sb = node(b).shape;
    if (sa[0] != sb[0])
      throw ShapeError(std::string("matmul_tn: inner dims disagree, ") + shape_str(sa) + " vs " + shape_str(sb));
    return record(OpKind::matmul_tn, a.id, b.id, Shape{sa[1], sb[1]});
  }

  // ---- reductions / broadcasts ----
  Tensor sum(Tensor a) { return record(OpKind::sum, a.id, -1, Shape{}); }
  Tensor mean(Tensor a) {
    if (node(a).val.empty()) throw ShapeError("mean: empty tensor");
    return record(OpKind::mean, a.id, -1, Shape{});
  }
  Tensor fill(Tensor scalar, Shape shape) {
    require_rank(scalar, 0, "fill");
    return record(OpKind::fill, scalar.id, -1, std::move(shape));
  }
  Tensor row_sums(Tensor a) {
    require_rank(a, 2, "row_sums");
    return record(OpKind::row_sums, a.id, -1, Shape{node(a).shape[0]});
  }
  Tensor col_sums(Tensor a) {
    require_rank(a, 2, "col_sums");
    return record(OpKind::col_sums, a.id, -1, Shape{node(a).shape[1]});
  }
  Tensor bcast_rows(Tensor v, std::size_t cols) {  // out[i][j] = v[i]
    require_rank(v, 1, "bcast_rows");
    return record(OpKind::bcast_rows, v.id, -1, Shape{node(v).shape[0], cols});
  }
  Tensor bcast_cols(Tensor v, std::size_t rows) {  // out[i][j] = v[j]
    require_rank(v, 1, "bcast_cols");
    return record(OpKind::bcast_cols, v.id, -1, Shape{rows, node(v).shape[0]});
  }

  // ---- scalar-constant ops ----
  Tensor scale(Tensor a, double c) { return record(OpKind::scale, a.id, -1, node(a).shape, c); }
  Tensor offset(Tensor a, double c) { return record(OpKind::offset, a.id, -1, node(a).shape, c); }
  Tensor neg(Tensor a) { return scale(a, -1.0); }

  // ---- elementwise unary ----
  Tensor square(Tensor a) { return record(OpKind::square, a.id, -1, node(a).shape); }
  Tensor sqrt(Tensor a) {
    for (double v : node(a).val)
      if (v < 0.0) throw ShapeError("sqrt: negative argument");
    return record(OpKind::sqrt_, a.id, -1, node(a).shape);
  }
  Tensor abs(Tensor a) { return record(OpKind::abs_, a.id, -1, node(a).shape); }
  Tensor sign(Tensor a) { return record(OpKind::sign_, a.id, -1, node(a).shape); }
  Tensor leaky_relu(Tensor a, double alpha) { return record(OpKind::lrelu, a.id, -1, node(a).shape, alpha); }
  Tensor leaky_relu_mask(Tensor a, double alpha) {
    return record(OpKind::lrelu_mask, a.id, -1, node(a).shape, alpha);
  }
  Tensor tanh(Tensor a) { return record(OpKind::tanh_, a.id, -1, node(a).shape); }

  // ---- structural ----
  Tensor concat_cols(Tensor a, Tensor b) {
    require_rank(a, 2, "concat");
    require_rank(b, 2, "concat");
    const auto& sa = node(a).shape;
    const auto& sb = node(b).shape;
    if (sa[0] != sb[0])
      throw ShapeError(std::string("concat: row counts disagree, ") + shape_str(sa) + " vs " + shape_str(sb));
    return record(OpKind::concat_cols, a.id, b.id, Shape{sa[0], sa[1] + sb[1]});
  }
  Tensor slice_cols(Tensor a, std::size_t start, std::size_t len) {
    require_rank(a, 2, "slice_cols");
    const auto& s = node(a).shape;
    if (start + len > s[1])
      throw ShapeError("slice_cols: [" + std::to_string(start) + "," + std::to_string(start + len) +
                       ") out of range for " + shape_str(s));
    return record(OpKind::slice_cols, a.id, -1, Shape{s[0], len}, 0.0, start, s[1]);
  }
  Tensor pad_cols(Tensor a, std::size_t start, std::size_t total) {
    require_rank(a, 2, "pad_cols");
    const auto& s = node(a).shape;
    if (start + s[1] > total) throw ShapeError("pad_cols: slice exceeds total width");
    return record(OpKind::pad_cols, a.id, -1, Shape{s[0], total}, 0.0, start, s[1]);
  }
  Tensor slice_rows(Tensor a, std::size_t start, std::size_t len) {
    require_rank(a, 2, "slice_rows");
    const auto& s = node(a).shape;
    if (start + len > s[0])
      throw ShapeError("slice_rows: [" + std::to_string(start) + "," + std::to_string(start + len) +
                       ") out of range for " + shape_str(s));
    return record(OpKind::slice_rows, a.id, -1, Shape{len, s[1]}, 0.0, start, s[0]);
  }
  Tensor pad_rows(Tensor a, std::size_t start, std::size_t total) {
    require_rank(a, 2, "pad_rows");
    const auto& s = node(a).shape;
    if (start + s[0] > total) throw ShapeError("pad_rows: slice exceeds total height");
    return record(OpKind::pad_rows, a.id, -1, Shape{total, s[1]}, 0.0, start, s[0]);
  }

  // ---- composites ----
  Tensor l2_norm(Tensor a) { return sqrt(sum(square(a))); }
  Tensor l2_norm_rows(Tensor a) { return sqrt(row_sums(square(a))); }

  // Gradient of a scalar output w.r.t. each tensor in `wrt`. The returned
  // tensors are tape nodes; with create_graph they admit a further backward
  // pass (with this implementation they always do, the flag documents intent
  // at call sites). Nodes unreachable from the output get zero gradients.
  std::vector<Tensor> backward(Tensor out, const std::vector<Tensor>& wrt, bool create_graph = false) {
    (void)create_graph;
    if (!node(out).shape.empty())
      throw ShapeError("backward: output must be scalar, got " + shape_str(node(out).shape));
    const int top = out.id;

    // nodes that feed the output
    std::vector<char> anc(nodes.size(), 0);
    anc[top] = 1;
    for (int i = top; i >= 0; --i) {
      if (!anc[i]) continue;
      if (nodes[i].a >= 0) anc[nodes[i].a] = 1;
      if (nodes[i].b >= 0) anc[nodes[i].b] = 1;
    }
    // nodes influenced by some wrt tensor
    std::vector<char> desc(nodes.size(), 0);
    for (const auto& w : wrt) {
      if (w.tape != this) throw ShapeError("backward: wrt tensor from a different tape");
      desc[w.id] = 1;
    }
    for (int i = 0; i <= top; ++i) {
      if (desc[i]) continue;
      if ((nodes[i].a >= 0 && desc[nodes[i].a]) || (nodes[i].b >= 0 && desc[nodes[i].b])) desc[i] = 1;
    }

    std::vector<int> adj(nodes.size(), -1);
    auto accum = [&](int nid, Tensor g) {
      if (adj[nid] < 0)
        adj[nid] = g.id;
      else
        adj[nid] = add(Tensor{this, adj[nid]}, g).id;
    };

    if (desc[top]) {
      adj[top] = leaf_scalar(1.0).id;
      for (int i = top; i >= 0; --i) {
        if (adj[i] < 0 || !anc[i] || !desc[i]) continue;
        // vjp calls below reallocate `nodes`; copy what we need up front
        const OpKind op = nodes[i].op;
        const int ia = nodes[i].a, ib = nodes[i].b;
        const double nc = nodes[i].c;
        const std::size_t np0 = nodes[i].p0, np1 = nodes[i].p1;
        Tensor g{this, adj[i]};
        Tensor ta{this, ia}, tb{this, ib};
        auto want_a = [&] { return ia >= 0 && desc[ia]; };
        auto want_b = [&] { return ib >= 0 && desc[ib]; };
        switch (op) {
          case OpKind::leaf:
            break;
          case OpKind::add:
            if (want_a()) accum(ia, g);
            if (want_b()) accum(ib, g);
            break;
          case OpKind::sub:
            if (want_a()) accum(ia, g);
            if (want_b()) accum(ib, neg(g));
            break;
          case OpKind::mul:
            if (want_a()) accum(ia, mul(g, tb));
            if (want_b()) accum(ib, mul(g, ta));
            break;
          case OpKind::div_:
            if (want_a()) accum(ia, div(g, tb));
            if (want_b()) accum(ib, neg(div(mul(g, Tensor{this, i}), tb)));
            break;
          case OpKind::matmul:
            if (want_a()) accum(ia, matmul_nt(g, tb));
            if (want_b()) accum(ib, matmul_tn(ta, g));
            break;
          case OpKind::matmul_nt:
            if (want_a()) accum(ia, matmul(g, tb));
            if (want_b()) accum(ib, matmul_tn(g, ta));
            break;
          case OpKind::matmul_tn:
            if (want_a()) accum(ia, matmul_nt(tb, g));
            if (want_b()) accum(ib, matmul(ta, g));
            break;
          case OpKind::sum:
            if (want_a()) accum(ia, fill(g, nodes[ia].shape));
            break;
          case OpKind::mean:
            if (want_a())
              accum(ia, scale(fill(g, nodes[ia].shape), 1.0 / static_cast<double>(numel(nodes[ia].shape))));
            break;
          case OpKind::fill:
            if (want_a()) accum(ia, sum(g));
            break;
          case OpKind::row_sums:
            if (want_a()) accum(ia, bcast_rows(g, nodes[ia].shape[1]));
            break;
          case OpKind::col_sums:
            if (want_a()) accum(ia, bcast_cols(g, nodes[ia].shape[0]));
            break;
          case OpKind::bcast_rows:
            if (want_a()) accum(ia, row_sums(g));
            break;
          case OpKind::bcast_cols:
            if (want_a()) accum(ia, col_sums(g));
            break;
          case OpKind::scale:
            if (want_a()) accum(ia, scale(g, nc));
            break;
          case OpKind::offset:
            if (want_a()) accum(ia, g);
            break;
          case OpKind::square:
            if (want_a()) accum(ia, scale(mul(g, ta), 2.0));
            break;
          case OpKind::sqrt_:
            if (want_a()) accum(ia, div(g, scale(Tensor{this, i}, 2.0)));
            break;
          case OpKind::abs_:
            if (want_a()) accum(ia, mul(g, sign(ta)));
            break;
          case OpKind::sign_:
          case OpKind::lrelu_mask:
            break;  // derivative defined as zero
          case OpKind::lrelu:
            if (want_a()) accum(ia, mul(g, leaky_relu_mask(ta, nc)));
            break;
          case OpKind::tanh_:
            if (want_a()) accum(ia, mul(g, offset(neg(square(Tensor{this, i})), 1.0)));
            break;
          case OpKind::concat_cols: {
            const std::size_t wa = nodes[ia].shape[1];
            if (want_a()) accum(ia, slice_cols(g, 0, wa));
            if (want_b()) accum(ib, slice_cols(g, wa, nodes[ib].shape[1]));
            break;
          }
          case OpKind::slice_cols:
            if (want_a()) accum(ia, pad_cols(g, np0, np1));
            break;
          case OpKind::pad_cols:
            if (want_a()) accum(ia, slice_cols(g, np0, np1));
            break;
          case OpKind::slice_rows:
            if (want_a()) accum(ia, pad_rows(g, np0, np1));
            break;
          case OpKind::pad_rows:
            if (want_a()) accum(ia, slice_rows(g, np0, np1));
            break;
        }
      }
    }

    std::vector<Tensor> grads;
    grads.reserve(wrt.size());
    for (const auto& w : wrt)
      grads.push_back(adj[w.id] >= 0 ? Tensor{this, adj[w.id]} : zeros(nodes[w.id].shape));
    return grads;
  }

  // Recompute every non-leaf value from current leaf values, in place.
  void replay() {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].op != OpKind::leaf) eval(nodes[i]);
  }

  const Node& node(Tensor t) const { return nodes[t.id]; }
  std::vector<double>& leaf_data(Tensor t) {
    if (nodes[t.id].op != OpKind::leaf) throw ShapeError("leaf_data: not a leaf");
    return nodes[t.id].val;
  }

 private:
  void require_rank(Tensor t, std::size_t r, const char* op) const {
    if (t.tape != this) throw ShapeError(std::string(op) + ": tensor from a different tape");
    if (node(t).shape.size() != r)
      throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                       shape_str(node(t).shape));
  }

  Tensor binary(OpKind op, Tensor a, Tensor b) {
    if (a.tape != this || b.tape != this)
      throw ShapeError(std::string(op_name(op)) + ": tensor from a different tape");
    if (node(a).shape != node(b).shape)
      throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + shape_str(node(a).shape) +
                       " vs " + shape_str(node(b).shape));
    return record(op, a.id, b.id, node(a).shape);
  }

  Tensor record(OpKind op, int a, int b, Shape shape, double c = 0.0, std::size_t p0 = 0,
                std::size_t p1 = 0) {
    Node n{op, a, b, std::move(shape), {}, c, p0, p1};
    n.val.resize(numel(n.shape));
    nodes.push_back(std::move(n));
    eval(nodes.back());
    return Tensor{this, static_cast<int>(nodes.size() - 1)};
  }

  void eval(Node& n) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<const RowMat>;
    using MMap = Eigen::Map<RowMat>;
    auto& out = n.val;
    out.resize(numel(n.shape));
    const std::vector<double>* av = n.a >= 0 ? &nodes[n.a].val : nullptr;
    const std::vector<double>* bv = n.b >= 0 ? &nodes[n.b].val : nullptr;
    switch (n.op) {
      case OpKind::leaf:
        break;
      case OpKind::add:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] + (*bv)[i];
        break;
      case OpKind::sub:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] - (*bv)[i];
        break;
      case OpKind::mul:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] * (*bv)[i];
        break;
      case OpKind::div_:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] / (*bv)[i];
        break;
      case OpKind::matmul: {
        const auto& sa = nodes[n.a].shape;
        const auto& sb = nodes[n.b].shape;
        CMap A(av->data(), sa[0], sa[1]), B(bv->data(), sb[0], sb[1]);
        MMap C(out.data(), sa[0], sb[1]);
        C.noalias() = A * B;
        break;
      }
      case OpKind::matmul_nt: {
        const auto& sa = nodes[n.a].shape;
        const auto& sb = nodes[n.b].shape;
        CMap A(av->data(), sa[0], sa[1]), B(bv->data(), sb[0], sb[1]);
        MMap C(out.data(), sa[0], sb[0]);
        C.noalias() = A * B.transpose();
        break;
      }
      case OpKind::matmul_tn: {
        const auto& sa = nodes[n.a].shape;
        const auto& sb = nodes[n.b].shape;
        CMap A(av->data(), sa[0], sa[1]), B(bv->data(), sb[0], sb[1]);
        MMap C(out.data(), sa[1], sb[1]);
        C.noalias() = A.transpose() * B;
        break;
      }
      case OpKind::sum:
      case OpKind::mean: {
        double s = 0.0;
        for (double v : *av) s += v;
        out[0] = n.op == OpKind::mean ? s / static_cast<double>(av->size()) : s;
        break;
      }
      case OpKind::fill:
        for (auto& v : out) v = (*av)[0];
        break;
      case OpKind::row_sums: {
        const auto& sa = nodes[n.a].shape;
        for (std::size_t i = 0; i < sa[0]; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < sa[1]; ++j) s += (*av)[i * sa[1] + j];
          out[i] = s;
        }
        break;
      }
      case OpKind::col_sums: {
        const auto& sa = nodes[n.a].shape;
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < sa[0]; ++i)
          for (std::size_t j = 0; j < sa[1]; ++j) out[j] += (*av)[i * sa[1] + j];
        break;
      }
      case OpKind::bcast_rows:
        for (std::size_t i = 0; i < n.shape[0]; ++i)
          for (std::size_t j = 0; j < n.shape[1]; ++j) out[i * n.shape[1] + j] = (*av)[i];
        break;
      case OpKind::bcast_cols:
        for (std::size_t i = 0; i < n.shape[0]; ++i)
          for (std::size_t j = 0; j < n.shape[1]; ++j) out[i * n.shape[1] + j] = (*av)[j];
        break;
      case OpKind::scale:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] * n.c;
        break;
      case OpKind::offset:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] + n.c;
        break;
      case OpKind::square:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] * (*av)[i];
        break;
      case OpKind::sqrt_:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt((*av)[i]);
        break;
      case OpKind::abs_:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs((*av)[i]);
        break;
      case OpKind::sign_:
        for (std::size_t i = 0; i < out.size(); ++i)
          out[i] = (*av)[i] > 0.0 ? 1.0 : ((*av)[i] < 0.0 ? -1.0 : 0.0);
        break;
      case OpKind::lrelu:
        for (std::size_t i = 0; i < out.size(); ++i)
          out[i] = (*av)[i] > 0.0 ? (*av)[i] : n.c * (*av)[i];
        break;
      case OpKind::lrelu_mask:
        // subgradient at 0 is alpha
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] > 0.0 ? 1.0 : n.c;
        break;
      case OpKind::tanh_:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh((*av)[i]);
        break;
      case OpKind::concat_cols: {
        const auto& sa = nodes[n.a].shape;
        const auto& sb = nodes[n.b].shape;
        const std::size_t w = sa[1] + sb[1];
        for (std::size_t i = 0; i < sa[0]; ++i) {
          for (std::size_t j = 0; j < sa[1]; ++j) out[i * w + j] = (*av)[i * sa[1] + j];
          for (std::size_t j = 0; j < sb[1]; ++j) out[i * w + sa[1] + j] = (*bv)[i * sb[1] + j];
        }
        break;
      }
      case OpKind::slice_cols: {
        const std::size_t w = n.p1, len = n.shape[1];
        for (std::size_t i = 0; i < n.shape[0]; ++i)
          for (std::size_t j = 0; j < len; ++j) out[i * len + j] = (*av)[i * w + n.p0 + j];
        break;
      }
      case OpKind::pad_cols: {
        const auto& sa = nodes[n.a].shape;
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < sa[0]; ++i)
          for (std::size_t j = 0; j < sa[1]; ++j) out[i * n.shape[1] + n.p0 + j] = (*av)[i * sa[1] + j];
        break;
      }
      case OpKind::slice_rows: {
        const std::size_t w = n.shape[1];
        std::copy(av->begin() + n.p0 * w, av->begin() + (n.p0 + n.shape[0]) * w, out.begin());
        break;
      }
      case OpKind::pad_rows: {
        const auto& sa = nodes[n.a].shape;
        std::fill(out.begin(), out.end(), 0.0);
        std::copy(av->begin(), av->end(), out.begin() + n.p0 * sa[1]);
        break;
      }
    }
  }
};

inline const Shape& Tensor::shape() const { return tape->node(*this).shape; }
inline const std::vector<double>& Tensor::data() const { return tape->node(*this).val; }
inline double Tensor::scalar() const {
  if (!shape().empty()) throw ShapeError("scalar(): tensor is not rank 0");
  return data()[0];
}
inline bool Tensor::all_finite() const {
  for (double v : data())
    if (!std::isfinite(v)) return false;
  return true;
}

// Compares the analytic gradient of a scalar function against central finite
// differences, coordinate by coordinate. `f` receives a tape and one leaf per
// entry of `points` and must return a scalar tensor. Returns the largest
// relative error, with a unit floor in the denominator so that near-zero
// gradient coordinates are judged on absolute error.
inline double grad_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& f,
    const std::vector<std::pair<Shape, std::vector<double>>>& points, double eps = 1e-5) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

  auto eval_at = [&](const std::vector<std::pair<Shape, std::vector<double>>>& pts) {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(pts.size());
    for (const auto& [shape, data] : pts) leaves.push_back(tape.leaf(shape, data));
    return f(tape, leaves).scalar();
  };

  Tape tape;
  std::vector<Tensor> leaves;
  for (const auto& [shape, data] : points) leaves.push_back(tape.leaf(shape, data));
  Tensor out = f(tape, leaves);
  auto grads = tape.backward(out, leaves);

  double worst = 0.0;
  for (std::size_t t = 0; t < points.size(); ++t) {
    for (std::size_t i = 0; i < points[t].second.size(); ++i) {
      auto bumped = points;
      bumped[t].second[i] += eps;
      const double fp = eval_at(bumped);
      bumped[t].second[i] = points[t].second[i] - eps;
      const double fm = eval_at(bumped);
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = grads[t].data()[i];
      const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace did
