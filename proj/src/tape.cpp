#include "hgot/tape.hpp"

#include <cmath>
#include <utility>

namespace hgot::ad {

namespace {

void check(bool cond, const char* msg) {
  if (!cond) throw std::logic_error(std::string("tape: ") + msg);
}

void check_same_tape(Var a, Var b) {
  check(a.valid() && b.valid() && a.tape == b.tape, "vars on different tapes");
}

}  // namespace

double act_value(Act a, double x) {
  switch (a) {
    case Act::identity: return x;
    case Act::relu: return x > 0.0 ? x : 0.0;
    case Act::leaky_relu: return x > 0.0 ? x : 0.2 * x;
    case Act::elu: return x > 0.0 ? x : std::expm1(x);
    case Act::tanh_fn: return std::tanh(x);
  }
  return x;
}

double act_deriv(Act a, double x) {
  switch (a) {
    case Act::identity: return 1.0;
    case Act::relu: return x > 0.0 ? 1.0 : 0.0;
    case Act::leaky_relu: return x > 0.0 ? 1.0 : 0.2;
    case Act::elu: return x > 0.0 ? 1.0 : std::exp(x);
    case Act::tanh_fn: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

Var Tape::leaf(Mat value, bool requires_grad) {
  return emplace(std::move(value), requires_grad, nullptr);
}

Var Tape::emplace(Mat value, bool requires_grad, std::function<void()> pull) {
  nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(pull)});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::value(Var v) const {
  check(v.tape == this && v.id >= 0 && v.id < static_cast<int>(nodes_.size()),
        "bad var");
  return nodes_[v.id].value;
}

Mat Tape::grad(Var v) const {
  const Node& n = node(v.id);
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v.id).requires_grad; }

void Tape::accumulate(int id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var scalar_output) {
  check(value(scalar_output).rows() == 1 && value(scalar_output).cols() == 1,
        "backward target must be 1x1");
  backward(scalar_output, Mat::Ones(1, 1));
}

void Tape::backward(Var output, const Mat& seed) {
  check(output.tape == this, "var from another tape");
  const Node& out = node(output.id);
  check(seed.rows() == out.value.rows() && seed.cols() == out.value.cols(),
        "seed shape mismatch");
  accumulate(output.id, seed);
  // Creation order is a topological order, so one reverse sweep suffices.
  for (int i = output.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.pull) continue;
    n.pull();
  }
}

void Tape::clear() { nodes_.clear(); }

// --- ops -------------------------------------------------------------------

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  const Mat& B = t->value(b);
  check(A.cols() == B.rows(), "matmul shape mismatch");
  bool req = t->requires_grad(a) || t->requires_grad(b);
  Var out = t->emplace(A * B, req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, ib = b.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      t->accumulate(ia, g * t->node(ib).value.transpose());
      t->accumulate(ib, t->node(ia).value.transpose() * g);
    };
  }
  return out;
}

Var transpose(Var a) {
  Tape* t = a.tape;
  bool req = t->requires_grad(a);
  Var out = t->emplace(t->value(a).transpose(), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      t->accumulate(ia, t->node(oid).grad.transpose());
    };
  }
  return out;
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  const Mat& B = t->value(b);
  check(A.rows() == B.rows() && A.cols() == B.cols(), "add shape mismatch");
  bool req = t->requires_grad(a) || t->requires_grad(b);
  Var out = t->emplace(A + B, req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, ib = b.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      t->accumulate(ia, g);
      t->accumulate(ib, g);
    };
  }
  return out;
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  const Mat& B = t->value(b);
  check(A.rows() == B.rows() && A.cols() == B.cols(), "sub shape mismatch");
  bool req = t->requires_grad(a) || t->requires_grad(b);
  Var out = t->emplace(A - B, req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, ib = b.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      t->accumulate(ia, g);
      t->accumulate(ib, -g);
    };
  }
  return out;
}

Var scale(Var a, double s) {
  Tape* t = a.tape;
  bool req = t->requires_grad(a);
  Var out = t->emplace(t->value(a) * s, req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, s, oid = out.id]() {
      t->accumulate(ia, t->node(oid).grad * s);
    };
  }
  return out;
}

Var hadamard(Var a, Var b) {
  check_same_tape(a, b);
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  const Mat& B = t->value(b);
  check(A.rows() == B.rows() && A.cols() == B.cols(), "hadamard shape mismatch");
  bool req = t->requires_grad(a) || t->requires_grad(b);
  Var out = t->emplace(A.cwiseProduct(B), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, ib = b.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      t->accumulate(ia, g.cwiseProduct(t->node(ib).value));
      t->accumulate(ib, g.cwiseProduct(t->node(ia).value));
    };
  }
  return out;
}

Var activation(Var a, Act k, double leaky_slope) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  Mat V(A.rows(), A.cols());
  if (k == Act::leaky_relu) {
    V = A.unaryExpr([leaky_slope](double x) { return x > 0.0 ? x : leaky_slope * x; });
  } else {
    V = A.unaryExpr([k](double x) { return act_value(k, x); });
  }
  bool req = t->requires_grad(a);
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, k, leaky_slope, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      const Mat& A2 = t->node(ia).value;
      Mat d(A2.rows(), A2.cols());
      if (k == Act::leaky_relu) {
        d = A2.unaryExpr([leaky_slope](double x) { return x > 0.0 ? 1.0 : leaky_slope; });
      } else {
        d = A2.unaryExpr([k](double x) { return act_deriv(k, x); });
      }
      t->accumulate(ia, g.cwiseProduct(d));
    };
  }
  return out;
}

Var exp_elem(Var a) {
  Tape* t = a.tape;
  bool req = t->requires_grad(a);
  Var out = t->emplace(t->value(a).array().exp().matrix(), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      t->accumulate(ia, t->node(oid).grad.cwiseProduct(t->node(oid).value));
    };
  }
  return out;
}

Var add_rowvec(Var a, Var r) {
  check_same_tape(a, r);
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  const Mat& R = t->value(r);
  check(R.rows() == 1 && R.cols() == A.cols(), "add_rowvec shape mismatch");
  Mat V = A;
  V.rowwise() += R.row(0);
  bool req = t->requires_grad(a) || t->requires_grad(r);
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, ir = r.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      t->accumulate(ia, g);
      t->accumulate(ir, g.colwise().sum());
    };
  }
  return out;
}

Var add_colvec(Var a, Var c) {
  check_same_tape(a, c);
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  const Mat& C = t->value(c);
  check(C.cols() == 1 && C.rows() == A.rows(), "add_colvec shape mismatch");
  Mat V = A;
  V.colwise() += C.col(0);
  bool req = t->requires_grad(a) || t->requires_grad(c);
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, ic = c.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      t->accumulate(ia, g);
      t->accumulate(ic, g.rowwise().sum());
    };
  }
  return out;
}

Var outer_sum(Var col_a, Var col_b) {
  check_same_tape(col_a, col_b);
  Tape* t = col_a.tape;
  const Mat& A = t->value(col_a);
  const Mat& B = t->value(col_b);
  check(A.cols() == 1 && B.cols() == 1, "outer_sum expects column vectors");
  Mat V = A.col(0).replicate(1, B.rows());
  V.rowwise() += B.col(0).transpose();
  bool req = t->requires_grad(col_a) || t->requires_grad(col_b);
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = col_a.id, ib = col_b.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      t->accumulate(ia, g.rowwise().sum());
      t->accumulate(ib, g.colwise().sum().transpose());
    };
  }
  return out;
}

Var masked_row_softmax(Var logits, const Mat& mask) {
  Tape* t = logits.tape;
  const Mat& L = t->value(logits);
  check(L.rows() == mask.rows() && L.cols() == mask.cols(),
        "softmax mask shape mismatch");
  const int n = static_cast<int>(L.rows());
  const int m = static_cast<int>(L.cols());
  Mat V = Mat::Zero(n, m);
  for (int i = 0; i < n; ++i) {
    bool any = false;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j)
      if (mask(i, j) != 0.0) {
        any = true;
        if (L(i, j) > mx) mx = L(i, j);
      }
    if (!any)
      throw std::logic_error("masked_row_softmax: row with empty support");
    if (!std::isfinite(mx)) mx = 0.0;  // NaN or -inf logits: let them propagate
    double denom = 0.0;
    for (int j = 0; j < m; ++j)
      if (mask(i, j) != 0.0) denom += std::exp(L(i, j) - mx);
    for (int j = 0; j < m; ++j)
      if (mask(i, j) != 0.0) V(i, j) = std::exp(L(i, j) - mx) / denom;
  }
  bool req = t->requires_grad(logits);
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, il = logits.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      const Mat& a = t->node(oid).value;  // alpha, zero off-support
      Vec rowdot = (g.cwiseProduct(a)).rowwise().sum();
      Mat d = a.cwiseProduct(g - rowdot.replicate(1, g.cols()));
      t->accumulate(il, d);
    };
  }
  return out;
}

Var row_softmax(Var a) {
  const Mat& A = a.tape->value(a);
  return masked_row_softmax(a, Mat::Ones(A.rows(), A.cols()));
}

Var logsumexp_rows(Var a) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  Mat V(A.rows(), 1);
  for (int i = 0; i < A.rows(); ++i) {
    double mx = A.row(i).maxCoeff();
    V(i, 0) = mx + std::log((A.row(i).array() - mx).exp().sum());
  }
  bool req = t->requires_grad(a);
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;  // n x 1
      const Mat& A2 = t->node(ia).value;
      const Mat& r = t->node(oid).value;
      Mat soft = (A2.colwise() - r.col(0)).array().exp().matrix();
      t->accumulate(ia, (soft.array().colwise() * g.col(0).array()).matrix());
    };
  }
  return out;
}

Var logsumexp_cols(Var a) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  Mat V(1, A.cols());
  for (int j = 0; j < A.cols(); ++j) {
    double mx = A.col(j).maxCoeff();
    V(0, j) = mx + std::log((A.col(j).array() - mx).exp().sum());
  }
  bool req = t->requires_grad(a);
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;  // 1 x m
      const Mat& A2 = t->node(ia).value;
      const Mat& r = t->node(oid).value;
      Mat soft = (A2.rowwise() - r.row(0)).array().exp().matrix();
      t->accumulate(ia, (soft.array().rowwise() * g.row(0).array()).matrix());
    };
  }
  return out;
}

Var concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols: empty list");
  Tape* t = parts[0].tape;
  int rows = static_cast<int>(t->value(parts[0]).rows());
  int cols = 0;
  bool req = false;
  for (Var p : parts) {
    check(p.tape == t, "concat_cols: mixed tapes");
    check(t->value(p).rows() == rows, "concat_cols: row mismatch");
    cols += static_cast<int>(t->value(p).cols());
    req = req || t->requires_grad(p);
  }
  Mat V(rows, cols);
  int off = 0;
  std::vector<std::pair<int, int>> spans;  // (id, width)
  for (Var p : parts) {
    int w = static_cast<int>(t->value(p).cols());
    V.middleCols(off, w) = t->value(p);
    spans.emplace_back(p.id, w);
    off += w;
  }
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, spans, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      int o = 0;
      for (auto [id, w] : spans) {
        t->accumulate(id, g.middleCols(o, w));
        o += w;
      }
    };
  }
  return out;
}

Var slice_rows(Var a, int offset, int count) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  check(offset >= 0 && count >= 0 && offset + count <= A.rows(),
        "slice_rows out of range");
  bool req = t->requires_grad(a);
  Var out = t->emplace(A.middleRows(offset, count), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, offset, count, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      const Mat& A2 = t->node(ia).value;
      Mat full = Mat::Zero(A2.rows(), A2.cols());
      full.middleRows(offset, count) = g;
      t->accumulate(ia, full);
    };
  }
  return out;
}

Var rows_normalize(Var a) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  constexpr double kTiny = 1e-12;
  Mat V = A;
  for (int i = 0; i < A.rows(); ++i) {
    double nr = A.row(i).norm();
    if (nr > kTiny)
      V.row(i) /= nr;
    else if (std::isfinite(nr))
      V.row(i).setZero();
    // NaN norms keep their rows so divergence surfaces at the loss check
  }
  bool req = t->requires_grad(a);
  Var out = t->emplace(std::move(V), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      const Mat& A2 = t->node(ia).value;
      Mat d = Mat::Zero(A2.rows(), A2.cols());
      for (int i = 0; i < A2.rows(); ++i) {
        double nr = A2.row(i).norm();
        if (nr <= kTiny) continue;
        double dot = A2.row(i).dot(g.row(i));
        d.row(i) = g.row(i) / nr - A2.row(i) * (dot / (nr * nr * nr));
      }
      t->accumulate(ia, d);
    };
  }
  return out;
}

Var frobenius_norm(Var a) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  double v = A.norm();
  bool req = t->requires_grad(a);
  Var out = t->emplace(Mat::Constant(1, 1, v), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      double s = t->node(oid).value(0, 0);
      if (s <= 0.0) return;  // subgradient 0 at the origin
      double g = t->node(oid).grad(0, 0);
      t->accumulate(ia, t->node(ia).value * (g / s));
    };
  }
  return out;
}

Var inner(Var a, Var b) {
  check_same_tape(a, b);
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  const Mat& B = t->value(b);
  check(A.rows() == B.rows() && A.cols() == B.cols(), "inner shape mismatch");
  double v = A.cwiseProduct(B).sum();
  bool req = t->requires_grad(a) || t->requires_grad(b);
  Var out = t->emplace(Mat::Constant(1, 1, v), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, ib = b.id, oid = out.id]() {
      double g = t->node(oid).grad(0, 0);
      t->accumulate(ia, t->node(ib).value * g);
      t->accumulate(ib, t->node(ia).value * g);
    };
  }
  return out;
}

Var abs_scalar(Var a) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  check(A.rows() == 1 && A.cols() == 1, "abs_scalar expects 1x1");
  bool req = t->requires_grad(a);
  Var out = t->emplace(Mat::Constant(1, 1, std::abs(A(0, 0))), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      double x = t->node(ia).value(0, 0);
      double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      t->accumulate(ia, t->node(oid).grad * s);
    };
  }
  return out;
}

Var diag_vec(Var a) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  check(A.rows() == A.cols(), "diag_vec expects a square matrix");
  bool req = t->requires_grad(a);
  Var out = t->emplace(A.diagonal(), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      const Mat& A2 = t->node(ia).value;
      Mat d = Mat::Zero(A2.rows(), A2.cols());
      d.diagonal() = g.col(0);
      t->accumulate(ia, d);
    };
  }
  return out;
}

Var scale_by_entry(Var a, Var s, int row, int col) {
  check_same_tape(a, s);
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  const Mat& S = t->value(s);
  check(row >= 0 && row < S.rows() && col >= 0 && col < S.cols(),
        "scale_by_entry index out of range");
  bool req = t->requires_grad(a) || t->requires_grad(s);
  Var out = t->emplace(A * S(row, col), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, is = s.id, row, col, oid = out.id]() {
      const Mat& g = t->node(oid).grad;
      double sv = t->node(is).value(row, col);
      t->accumulate(ia, g * sv);
      Mat ds = Mat::Zero(t->node(is).value.rows(), t->node(is).value.cols());
      ds(row, col) = g.cwiseProduct(t->node(ia).value).sum();
      t->accumulate(is, ds);
    };
  }
  return out;
}

Var sum_all(Var a) {
  Tape* t = a.tape;
  const Mat& A = t->value(a);
  bool req = t->requires_grad(a);
  Var out = t->emplace(Mat::Constant(1, 1, A.sum()), req, nullptr);
  if (req) {
    t->node(out.id).pull = [t, ia = a.id, oid = out.id]() {
      double g = t->node(oid).grad(0, 0);
      const Mat& A2 = t->node(ia).value;
      t->accumulate(ia, Mat::Constant(A2.rows(), A2.cols(), g));
    };
  }
  return out;
}

}  // namespace hgot::ad
