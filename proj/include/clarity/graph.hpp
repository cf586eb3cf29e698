#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "clarity/common.hpp"
#include "clarity/rng.hpp"

namespace clarity {

// Trainable parameter: value plus same-shape gradient accumulator.
struct Param {
  std::string name;
  RealMat value;
  RealMat grad;

  void zero_grad() { std::fill(grad.data().begin(), grad.data().end(), 0.0); }
};

// Ordered, uniquely named parameter collection. Deque keeps Param addresses
// stable so graphs and optimizer state may hold pointers across growth.
class ParamStore {
 public:
  Param& add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (find(name) != nullptr) {
      throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    }
    params_.push_back(Param{name, RealMat(rows, cols), RealMat(rows, cols)});
    return params_.back();
  }

  Param* find(const std::string& name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  Param& at(const std::string& name) {
    Param* p = find(name);
    if (p == nullptr) throw std::invalid_argument("ParamStore: no parameter " + name);
    return *p;
  }

  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t total_parameters() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  std::size_t count() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Param> params_;
};

// Handle into a Graph's tape.
struct Var {
  int id = -1;
};

// Eager reverse-mode tape over row-major matrices, double precision.
// Binary elementwise ops broadcast a 1x1, 1xn, or mx1 operand against an
// mxn one. Built per forward pass; backward() walks the tape once.
class Graph {
  enum class Op {
    kInput,
    kParam,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kMatMul,
    kTranspose,
    kRelu,
    kSigmoid,
    kExp,
    kPowConst,
    kAddConst,
    kScale,
    kSumAll,
    kMeanAll,
    kRowSum,
    kRowMean,
    kColSum,
    kColMean,
    kRowMaxDetached,
    kSliceRows,
    kSliceCols,
    kConcatRows,
    kConcatCols,
    kReshape,
    kDropout,
  };

  struct Node {
    Op op;
    RealMat value;
    RealMat grad;
    int a = -1;
    int b = -1;
    double scalar = 0.0;
    std::size_t i0 = 0, i1 = 0;
    std::vector<double> mask;  // dropout keep-scale per element
    Param* bound = nullptr;
  };

 public:
  Var input(const RealMat& m) { return push(Op::kInput, m, -1, -1, "input"); }
  Var constant(const RealMat& m) { return input(m); }

  Var scalar_input(double v) {
    RealMat m(1, 1);
    m(0, 0) = v;
    return input(m);
  }

  Var param(Param& p) {
    Var v = push(Op::kParam, p.value, -1, -1, ("param " + p.name).c_str());
    nodes_[v.id].bound = &p;
    return v;
  }

  // ---- binary elementwise with broadcast ----
  Var add(Var a, Var b) { return binary(Op::kAdd, a, b, "add"); }
  Var sub(Var a, Var b) { return binary(Op::kSub, a, b, "sub"); }
  Var mul(Var a, Var b) { return binary(Op::kMul, a, b, "mul"); }
  Var div(Var a, Var b) { return binary(Op::kDiv, a, b, "div"); }

  Var matmul(Var a, Var b) {
    const RealMat& A = val(a);
    const RealMat& B = val(b);
    if (A.cols() != B.rows()) {
      throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                  std::to_string(A.cols()) + " vs " +
                                  std::to_string(B.rows()) + ")");
    }
    RealMat out(A.rows(), B.cols());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      const double* arow = A.row_ptr(i);
      double* orow = out.row_ptr(i);
      for (std::size_t k = 0; k < A.cols(); ++k) {
        const double av = arow[k];
        if (av == 0.0) continue;
        const double* brow = B.row_ptr(k);
        for (std::size_t j = 0; j < B.cols(); ++j) orow[j] += av * brow[j];
      }
    }
    return push(Op::kMatMul, std::move(out), a.id, b.id, "matmul");
  }

  Var transpose(Var a) {
    const RealMat& A = val(a);
    RealMat out(A.cols(), A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      for (std::size_t j = 0; j < A.cols(); ++j) out(j, i) = A(i, j);
    }
    return push(Op::kTranspose, std::move(out), a.id, -1, "transpose");
  }

  // ---- unary elementwise ----
  Var relu(Var a) {
    RealMat out = val(a);
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return push(Op::kRelu, std::move(out), a.id, -1, "relu");
  }

  Var sigmoid(Var a) {
    RealMat out = val(a);
    for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
    return push(Op::kSigmoid, std::move(out), a.id, -1, "sigmoid");
  }

  Var exp(Var a) {
    RealMat out = val(a);
    for (double& v : out.data()) v = std::exp(v);
    return push(Op::kExp, std::move(out), a.id, -1, "exp");
  }

  Var pow_const(Var a, double p) {
    RealMat out = val(a);
    for (double& v : out.data()) v = std::pow(v, p);
    Var r = push(Op::kPowConst, std::move(out), a.id, -1, "pow_const");
    nodes_[r.id].scalar = p;
    return r;
  }

  Var add_const(Var a, double c) {
    RealMat out = val(a);
    for (double& v : out.data()) v += c;
    Var r = push(Op::kAddConst, std::move(out), a.id, -1, "add_const");
    nodes_[r.id].scalar = c;
    return r;
  }

  Var scale(Var a, double s) {
    RealMat out = val(a);
    for (double& v : out.data()) v *= s;
    Var r = push(Op::kScale, std::move(out), a.id, -1, "scale");
    nodes_[r.id].scalar = s;
    return r;
  }

  // ---- reductions ----
  Var sum_all(Var a) { return reduce_all(Op::kSumAll, a, false); }
  Var mean_all(Var a) { return reduce_all(Op::kMeanAll, a, true); }

  Var row_sum(Var a) { return reduce_rows(Op::kRowSum, a, false); }
  Var row_mean(Var a) { return reduce_rows(Op::kRowMean, a, true); }
  Var col_sum(Var a) { return reduce_cols(Op::kColSum, a, false); }
  Var col_mean(Var a) { return reduce_cols(Op::kColMean, a, true); }

  // Row-wise max as a constant (no gradient path): softmax stabilizer.
  Var row_max_detached(Var a) {
    const RealMat& A = val(a);
    RealMat out(A.rows(), 1);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double m = A(i, 0);
      for (std::size_t j = 1; j < A.cols(); ++j) m = std::max(m, A(i, j));
      out(i, 0) = m;
    }
    return push(Op::kRowMaxDetached, std::move(out), -1, -1, "row_max");
  }

  // ---- structure ----
  Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    const RealMat& A = val(a);
    if (r0 >= r1 || r1 > A.rows()) throw std::invalid_argument("slice_rows: bad range");
    RealMat out(r1 - r0, A.cols());
    for (std::size_t i = r0; i < r1; ++i) {
      const double* src = A.row_ptr(i);
      std::copy(src, src + A.cols(), out.row_ptr(i - r0));
    }
    Var r = push(Op::kSliceRows, std::move(out), a.id, -1, "slice_rows");
    nodes_[r.id].i0 = r0;
    nodes_[r.id].i1 = r1;
    return r;
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const RealMat& A = val(a);
    if (c0 >= c1 || c1 > A.cols()) throw std::invalid_argument("slice_cols: bad range");
    RealMat out(A.rows(), c1 - c0);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      for (std::size_t j = c0; j < c1; ++j) out(i, j - c0) = A(i, j);
    }
    Var r = push(Op::kSliceCols, std::move(out), a.id, -1, "slice_cols");
    nodes_[r.id].i0 = c0;
    nodes_[r.id].i1 = c1;
    return r;
  }

  Var concat_rows(Var a, Var b) {
    const RealMat& A = val(a);
    const RealMat& B = val(b);
    if (A.cols() != B.cols()) throw std::invalid_argument("concat_rows: column mismatch");
    RealMat out(A.rows() + B.rows(), A.cols());
    std::copy(A.data().begin(), A.data().end(), out.data().begin());
    std::copy(B.data().begin(), B.data().end(), out.data().begin() + A.size());
    return push(Op::kConcatRows, std::move(out), a.id, b.id, "concat_rows");
  }

  Var concat_cols(Var a, Var b) {
    const RealMat& A = val(a);
    const RealMat& B = val(b);
    if (A.rows() != B.rows()) throw std::invalid_argument("concat_cols: row mismatch");
    RealMat out(A.rows(), A.cols() + B.cols());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      std::copy(A.row_ptr(i), A.row_ptr(i) + A.cols(), out.row_ptr(i));
      std::copy(B.row_ptr(i), B.row_ptr(i) + B.cols(), out.row_ptr(i) + A.cols());
    }
    return push(Op::kConcatCols, std::move(out), a.id, b.id, "concat_cols");
  }

  Var reshape(Var a, std::size_t rows, std::size_t cols) {
    const RealMat& A = val(a);
    if (rows * cols != A.size()) throw std::invalid_argument("reshape: element count changes");
    RealMat out(rows, cols);
    out.data() = A.data();
    return push(Op::kReshape, std::move(out), a.id, -1, "reshape");
  }

  // Inverted-scaling dropout; rate 0 or inference mode is the identity.
  Var dropout(Var a, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return a;
    const RealMat& A = val(a);
    RealMat out = A;
    std::vector<double> mask(A.size());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < A.size(); ++i) {
      mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
      out.data()[i] *= mask[i];
    }
    Var r = push(Op::kDropout, std::move(out), a.id, -1, "dropout");
    nodes_[r.id].mask = std::move(mask);
    return r;
  }

  // ---- access ----
  const RealMat& val(Var v) const { return node(v).value; }
  const RealMat& grad(Var v) const {
    if (node(v).grad.empty()) throw std::logic_error("Graph: backward() not run");
    return node(v).grad;
  }

  // Reverse sweep from a scalar loss; accumulates into bound Param::grad.
  void backward(Var loss) {
    Node& ln = node(loss);
    if (ln.value.rows() != 1 || ln.value.cols() != 1) {
      throw std::invalid_argument("backward: loss must be a 1x1 scalar");
    }
    for (auto& n : nodes_) {
      n.grad = RealMat(n.value.rows(), n.value.cols());
    }
    node(loss).grad(0, 0) = 1.0;

    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      const RealMat& g = n.grad;
      switch (n.op) {
        case Op::kInput:
        case Op::kParam:
        case Op::kRowMaxDetached:
          break;
        case Op::kAdd:
          backprop_linear(n.a, g, +1.0);
          backprop_linear(n.b, g, +1.0);
          break;
        case Op::kSub:
          backprop_linear(n.a, g, +1.0);
          backprop_linear(n.b, g, -1.0);
          break;
        case Op::kMul: {
          backprop_product(n.a, n.b, g);
          backprop_product(n.b, n.a, g);
          break;
        }
        case Op::kDiv: {
          // d(a/b)/da = 1/b ; d(a/b)/db = -a/b^2
          backprop_div(n.a, n.b, g);
          break;
        }
        case Op::kMatMul: {
          const RealMat& A = nodes_[n.a].value;
          const RealMat& B = nodes_[n.b].value;
          RealMat& da = nodes_[n.a].grad;
          RealMat& db = nodes_[n.b].grad;
          for (std::size_t i = 0; i < A.rows(); ++i) {
            for (std::size_t j = 0; j < B.cols(); ++j) {
              const double gv = g(i, j);
              if (gv == 0.0) continue;
              for (std::size_t k = 0; k < A.cols(); ++k) {
                da(i, k) += gv * B(k, j);
                db(k, j) += gv * A(i, k);
              }
            }
          }
          break;
        }
        case Op::kTranspose: {
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) da(j, i) += g(i, j);
          }
          break;
        }
        case Op::kRelu: {
          const RealMat& A = nodes_[n.a].value;
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < A.size(); ++i) {
            if (A.data()[i] > 0.0) da.data()[i] += g.data()[i];
          }
          break;
        }
        case Op::kSigmoid: {
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < n.value.size(); ++i) {
            const double s = n.value.data()[i];
            da.data()[i] += g.data()[i] * s * (1.0 - s);
          }
          break;
        }
        case Op::kExp: {
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < n.value.size(); ++i) {
            da.data()[i] += g.data()[i] * n.value.data()[i];
          }
          break;
        }
        case Op::kPowConst: {
          const RealMat& A = nodes_[n.a].value;
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < A.size(); ++i) {
            da.data()[i] += g.data()[i] * n.scalar * std::pow(A.data()[i], n.scalar - 1.0);
          }
          break;
        }
        case Op::kAddConst:
          backprop_linear(n.a, g, +1.0);
          break;
        case Op::kScale:
          backprop_linear(n.a, g, n.scalar);
          break;
        case Op::kSumAll:
        case Op::kMeanAll: {
          RealMat& da = nodes_[n.a].grad;
          const double s =
              n.op == Op::kMeanAll ? g(0, 0) / static_cast<double>(da.size()) : g(0, 0);
          for (double& v : da.data()) v += s;
          break;
        }
        case Op::kRowSum:
        case Op::kRowMean: {
          RealMat& da = nodes_[n.a].grad;
          const double inv =
              n.op == Op::kRowMean ? 1.0 / static_cast<double>(da.cols()) : 1.0;
          for (std::size_t i = 0; i < da.rows(); ++i) {
            const double gv = g(i, 0) * inv;
            double* row = da.row_ptr(i);
            for (std::size_t j = 0; j < da.cols(); ++j) row[j] += gv;
          }
          break;
        }
        case Op::kColSum:
        case Op::kColMean: {
          RealMat& da = nodes_[n.a].grad;
          const double inv =
              n.op == Op::kColMean ? 1.0 / static_cast<double>(da.rows()) : 1.0;
          for (std::size_t i = 0; i < da.rows(); ++i) {
            double* row = da.row_ptr(i);
            for (std::size_t j = 0; j < da.cols(); ++j) row[j] += g(0, j) * inv;
          }
          break;
        }
        case Op::kSliceRows: {
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < g.rows(); ++i) {
            const double* src = g.row_ptr(i);
            double* dst = da.row_ptr(n.i0 + i);
            for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += src[j];
          }
          break;
        }
        case Op::kSliceCols: {
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) da(i, n.i0 + j) += g(i, j);
          }
          break;
        }
        case Op::kConcatRows: {
          RealMat& da = nodes_[n.a].grad;
          RealMat& db = nodes_[n.b].grad;
          for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] += g.data()[i];
          for (std::size_t i = 0; i < db.size(); ++i) db.data()[i] += g.data()[da.size() + i];
          break;
        }
        case Op::kConcatCols: {
          RealMat& da = nodes_[n.a].grad;
          RealMat& db = nodes_[n.b].grad;
          for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < da.cols(); ++j) da(i, j) += g(i, j);
            for (std::size_t j = 0; j < db.cols(); ++j) db(i, j) += g(i, da.cols() + j);
          }
          break;
        }
        case Op::kReshape: {
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] += g.data()[i];
          break;
        }
        case Op::kDropout: {
          RealMat& da = nodes_[n.a].grad;
          for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] += g.data()[i] * n.mask[i];
          break;
        }
      }
    }

    for (auto& n : nodes_) {
      if (n.op == Op::kParam && n.bound != nullptr) {
        if (!all_finite(n.grad.data().begin(), n.grad.data().end())) {
          throw DataError("backward: non-finite gradient for parameter " + n.bound->name);
        }
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          n.bound->grad.data()[i] += n.grad.data()[i];
        }
      }
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  const Node& node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
      throw std::invalid_argument("Graph: dangling Var");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  Node& node(Var v) { return const_cast<Node&>(static_cast<const Graph*>(this)->node(v)); }

  Var push(Op op, RealMat value, int a, int b, const char* what) {
    if (!all_finite(value.data().begin(), value.data().end())) {
      throw DataError(std::string("Graph: non-finite value after ") + what);
    }
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.a = a;
    n.b = b;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  static bool broadcastable(const RealMat& big, const RealMat& small) {
    return (small.rows() == big.rows() || small.rows() == 1) &&
           (small.cols() == big.cols() || small.cols() == 1);
  }

  Var binary(Op op, Var a, Var b, const char* what) {
    const RealMat& A = val(a);
    const RealMat& B = val(b);
    const std::size_t rows = std::max(A.rows(), B.rows());
    const std::size_t cols = std::max(A.cols(), B.cols());
    RealMat shape_probe(rows, cols);
    if (!broadcastable(shape_probe, A) || !broadcastable(shape_probe, B)) {
      throw std::invalid_argument(std::string(what) + ": shapes " + shape_str(A) + " and " +
                                  shape_str(B) + " do not broadcast");
    }
    RealMat out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        const double x = A(A.rows() == 1 ? 0 : i, A.cols() == 1 ? 0 : j);
        const double y = B(B.rows() == 1 ? 0 : i, B.cols() == 1 ? 0 : j);
        double v = 0.0;
        switch (op) {
          case Op::kAdd: v = x + y; break;
          case Op::kSub: v = x - y; break;
          case Op::kMul: v = x * y; break;
          case Op::kDiv: v = x / y; break;
          default: break;
        }
        out(i, j) = v;
      }
    }
    return push(op, std::move(out), a.id, b.id, what);
  }

  static std::string shape_str(const RealMat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  }

  // dst_grad += sign * g, reduced over broadcast dimensions.
  void backprop_linear(int arg, const RealMat& g, double sign) {
    RealMat& da = nodes_[static_cast<std::size_t>(arg)].grad;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        da(da.rows() == 1 ? 0 : i, da.cols() == 1 ? 0 : j) += sign * g(i, j);
      }
    }
  }

  // d(arg) += g * other, reduced over broadcast dimensions (product rule).
  void backprop_product(int arg, int other, const RealMat& g) {
    RealMat& da = nodes_[static_cast<std::size_t>(arg)].grad;
    const RealMat& O = nodes_[static_cast<std::size_t>(other)].value;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        const double ov = O(O.rows() == 1 ? 0 : i, O.cols() == 1 ? 0 : j);
        da(da.rows() == 1 ? 0 : i, da.cols() == 1 ? 0 : j) += g(i, j) * ov;
      }
    }
  }

  void backprop_div(int num, int den, const RealMat& g) {
    RealMat& dn = nodes_[static_cast<std::size_t>(num)].grad;
    RealMat& dd = nodes_[static_cast<std::size_t>(den)].grad;
    const RealMat& N = nodes_[static_cast<std::size_t>(num)].value;
    const RealMat& D = nodes_[static_cast<std::size_t>(den)].value;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        const double nv = N(N.rows() == 1 ? 0 : i, N.cols() == 1 ? 0 : j);
        const double dv = D(D.rows() == 1 ? 0 : i, D.cols() == 1 ? 0 : j);
        dn(dn.rows() == 1 ? 0 : i, dn.cols() == 1 ? 0 : j) += g(i, j) / dv;
        dd(dd.rows() == 1 ? 0 : i, dd.cols() == 1 ? 0 : j) -= g(i, j) * nv / (dv * dv);
      }
    }
  }

  Var reduce_all(Op op, Var a, bool mean) {
    const RealMat& A = val(a);
    RealMat out(1, 1);
    double acc = 0.0;
    for (double v : A.data()) acc += v;
    out(0, 0) = mean ? acc / static_cast<double>(A.size()) : acc;
    return push(op, std::move(out), a.id, -1, mean ? "mean_all" : "sum_all");
  }

  Var reduce_rows(Op op, Var a, bool mean) {
    const RealMat& A = val(a);
    RealMat out(A.rows(), 1);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double acc = 0.0;
      const double* row = A.row_ptr(i);
      for (std::size_t j = 0; j < A.cols(); ++j) acc += row[j];
      out(i, 0) = mean ? acc / static_cast<double>(A.cols()) : acc;
    }
    return push(op, std::move(out), a.id, -1, mean ? "row_mean" : "row_sum");
  }

  Var reduce_cols(Op op, Var a, bool mean) {
    const RealMat& A = val(a);
    RealMat out(1, A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      const double* row = A.row_ptr(i);
      for (std::size_t j = 0; j < A.cols(); ++j) out(0, j) += row[j];
    }
    if (mean) {
      for (double& v : out.data()) v /= static_cast<double>(A.rows());
    }
    return push(op, std::move(out), a.id, -1, mean ? "col_mean" : "col_sum");
  }

  std::deque<Node> nodes_;
};

// ---- composites (backward derived automatically) ----

// Numerically stable row-wise softmax.
inline Var softmax_rows(Graph& g, Var x) {
  Var m = g.row_max_detached(x);
  Var e = g.exp(g.sub(x, m));
  return g.div(e, g.row_sum(e));
}

// Mean squared error against a constant target.
inline Var mse_loss(Graph& g, Var pred, const RealMat& target) {
  Var d = g.sub(pred, g.constant(target));
  return g.mean_all(g.mul(d, d));
}

}  // namespace clarity
