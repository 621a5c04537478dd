#include "kgt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "kgt/errors.hpp"

namespace kgt {

using detail::Node;

namespace {

std::string shape_str(const std::vector<size_t>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a) {
  throw ShapeError(op + ": bad shape " + shape_str(a.shape()));
}

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a,
                             const Tensor& b) {
  throw ShapeError(op + ": shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

bool wants_grad(const Node* p) { return p->requires_grad || p->grad_path; }

std::shared_ptr<Node> new_node(std::vector<size_t> shape,
                               std::vector<double> data) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return n;
}

Tensor finish(std::shared_ptr<Node> n,
              std::vector<std::shared_ptr<Node>> parents,
              std::function<void(Node&)> backward_fn) {
  bool path = false;
  for (const auto& p : parents) path = path || wants_grad(p.get());
  if (path) {
    n->grad_path = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

void require_2d(const std::string& op, const Tensor& t) {
  if (t.shape().size() != 2) shape_fail(op, t);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
  size_t total = 1;
  for (size_t d : shape) total *= d;
  auto n = new_node(std::move(shape), std::vector<double>(total, 0.0));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<size_t> shape, double value,
                    bool requires_grad) {
  size_t total = 1;
  for (size_t d : shape) total *= d;
  auto n = new_node(std::move(shape), std::vector<double>(total, value));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<size_t> shape, std::vector<double> data,
                         bool requires_grad) {
  size_t total = 1;
  for (size_t d : shape) total *= d;
  if (total != data.size()) {
    throw ShapeError("from_data: " + shape_str(shape) + " needs " +
                     std::to_string(total) + " values, got " +
                     std::to_string(data.size()));
  }
  auto n = new_node(std::move(shape), std::move(data));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::randn(std::vector<size_t> shape, Rng& rng, double stddev,
                     bool requires_grad) {
  size_t total = 1;
  for (size_t d : shape) total *= d;
  std::vector<double> data(total);
  for (double& v : data) v = rng.normal(0.0, stddev);
  auto n = new_node(std::move(shape), std::move(data));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

std::vector<double>& Tensor::grad() {
  if (node_->grad.empty()) {
    throw ShapeError("tensor has no gradient buffer");
  }
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) {
    throw ShapeError("tensor has no gradient buffer");
  }
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor is not scalar");
  return node_->data[0];
}

double Tensor::at(size_t r, size_t c) const {
  require_2d("at", *this);
  return node_->data[r * cols() + c];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

void Tensor::backward() const {
  if (size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(shape()));
  }
  // Reverse postorder over the recorded graph = topological order with every
  // consumer visited before its inputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next].get();
      ++next;
      if (!visited.count(p) && !p->parents.empty()) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("add", a, b);
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto n = new_node(a.shape(), std::move(out));
  auto pa = a.node(), pb = b.node();
  return finish(n, {pa, pb}, [pa, pb](Node& self) {
    if (wants_grad(pa.get())) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (wants_grad(pb.get())) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a, b);
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto n = new_node(a.shape(), std::move(out));
  auto pa = a.node(), pb = b.node();
  return finish(n, {pa, pb}, [pa, pb](Node& self) {
    if (wants_grad(pa.get())) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (wants_grad(pb.get())) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a, b);
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto n = new_node(a.shape(), std::move(out));
  auto pa = a.node(), pb = b.node();
  return finish(n, {pa, pb}, [pa, pb](Node& self) {
    if (wants_grad(pa.get())) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        pa->grad[i] += self.grad[i] * pb->data[i];
      }
    }
    if (wants_grad(pb.get())) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        pb->grad[i] += self.grad[i] * pa->data[i];
      }
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  auto n = new_node(a.shape(), std::move(out));
  auto pa = a.node();
  return finish(n, {pa}, [pa, c](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      pa->grad[i] += self.grad[i] * c;
    }
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
  auto n = new_node(a.shape(), std::move(out));
  auto pa = a.node();
  return finish(n, {pa}, [pa](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
  });
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd_from_xy) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
  auto n = new_node(a.shape(), std::move(out));
  auto pa = a.node();
  return finish(n, {pa}, [pa, bwd_from_xy](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      pa->grad[i] += self.grad[i] * bwd_from_xy(pa->data[i], self.data[i]);
    }
  });
}

}  // namespace

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a, [](double x) { return stable_softplus(x); },
      [](double x, double) { return stable_sigmoid(x); });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  const size_t m = a.rows(), k = a.cols(), n2 = b.cols();
  std::vector<double> out(m * n2, 0.0);
  const auto& A = a.data();
  const auto& B = b.data();
  for (size_t i = 0; i < m; ++i) {
    for (size_t l = 0; l < k; ++l) {
      const double av = A[i * k + l];
      if (av == 0.0) continue;
      const double* brow = &B[l * n2];
      double* orow = &out[i * n2];
      for (size_t j = 0; j < n2; ++j) orow[j] += av * brow[j];
    }
  }
  auto node = new_node({m, n2}, std::move(out));
  auto pa = a.node(), pb = b.node();
  return finish(node, {pa, pb}, [pa, pb, m, k, n2](Node& self) {
    const auto& G = self.grad;
    if (wants_grad(pa.get())) {
      pa->ensure_grad();
      for (size_t i = 0; i < m; ++i) {
        for (size_t l = 0; l < k; ++l) {
          double s = 0.0;
          const double* grow = &G[i * n2];
          const double* brow = &pb->data[l * n2];
          for (size_t j = 0; j < n2; ++j) s += grow[j] * brow[j];
          pa->grad[i * k + l] += s;
        }
      }
    }
    if (wants_grad(pb.get())) {
      pb->ensure_grad();
      for (size_t i = 0; i < m; ++i) {
        for (size_t l = 0; l < k; ++l) {
          const double av = pa->data[i * k + l];
          if (av == 0.0) continue;
          const double* grow = &G[i * n2];
          double* brow = &pb->grad[l * n2];
          for (size_t j = 0; j < n2; ++j) brow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d("transpose", a);
  const size_t m = a.rows(), n2 = a.cols();
  std::vector<double> out(m * n2);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n2; ++j) out[j * m + i] = a.data()[i * n2 + j];
  }
  auto node = new_node({n2, m}, std::move(out));
  auto pa = a.node();
  return finish(node, {pa}, [pa, m, n2](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < n2; ++j) {
        pa->grad[i * n2 + j] += self.grad[j * m + i];
      }
    }
  });
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& bias) {
  require_2d("add_row_broadcast", a);
  require_2d("add_row_broadcast", bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    shape_fail("add_row_broadcast", a, bias);
  }
  const size_t m = a.rows(), n2 = a.cols();
  std::vector<double> out(m * n2);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n2; ++j) {
      out[i * n2 + j] = a.data()[i * n2 + j] + bias.data()[j];
    }
  }
  auto node = new_node({m, n2}, std::move(out));
  auto pa = a.node(), pbias = bias.node();
  return finish(node, {pa, pbias}, [pa, pbias, m, n2](Node& self) {
    if (wants_grad(pa.get())) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        pa->grad[i] += self.grad[i];
      }
    }
    if (wants_grad(pbias.get())) {
      pbias->ensure_grad();
      for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n2; ++j) {
          pbias->grad[j] += self.grad[i * n2 + j];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const size_t m = parts[0].rows();
  size_t total = 0;
  for (const Tensor& p : parts) {
    require_2d("concat_cols", p);
    if (p.rows() != m) shape_fail("concat_cols", parts[0], p);
    total += p.cols();
  }
  std::vector<double> out(m * total);
  size_t off = 0;
  for (const Tensor& p : parts) {
    const size_t c = p.cols();
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < c; ++j) {
        out[i * total + off + j] = p.data()[i * c + j];
      }
    }
    off += c;
  }
  auto node = new_node({m, total}, std::move(out));
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<size_t> widths;
  for (const Tensor& p : parts) {
    parents.push_back(p.node());
    widths.push_back(p.cols());
  }
  auto parents_copy = parents;
  return finish(node, std::move(parents),
                [parents_copy, widths, m, total](Node& self) {
                  size_t off2 = 0;
                  for (size_t k = 0; k < parents_copy.size(); ++k) {
                    Node* p = parents_copy[k].get();
                    const size_t c = widths[k];
                    if (wants_grad(p)) {
                      p->ensure_grad();
                      for (size_t i = 0; i < m; ++i) {
                        for (size_t j = 0; j < c; ++j) {
                          p->grad[i * c + j] += self.grad[i * total + off2 + j];
                        }
                      }
                    }
                    off2 += c;
                  }
                });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  return concat_cols(std::vector<Tensor>{a, b});
}

Tensor slice_cols(const Tensor& a, size_t start, size_t count) {
  require_2d("slice_cols", a);
  if (start + count > a.cols()) shape_fail("slice_cols", a);
  const size_t m = a.rows(), n2 = a.cols();
  std::vector<double> out(m * count);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < count; ++j) {
      out[i * count + j] = a.data()[i * n2 + start + j];
    }
  }
  auto node = new_node({m, count}, std::move(out));
  auto pa = a.node();
  return finish(node, {pa}, [pa, start, count, m, n2](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < count; ++j) {
        pa->grad[i * n2 + start + j] += self.grad[i * count + j];
      }
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<int32_t>& indices) {
  require_2d("gather_rows", a);
  const size_t n2 = a.cols();
  std::vector<double> out(indices.size() * n2);
  for (size_t i = 0; i < indices.size(); ++i) {
    const int32_t r = indices[i];
    if (r < 0 || static_cast<size_t>(r) >= a.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(r) +
                       " out of range for " + shape_str(a.shape()));
    }
    for (size_t j = 0; j < n2; ++j) out[i * n2 + j] = a.data()[r * n2 + j];
  }
  auto node = new_node({indices.size(), n2}, std::move(out));
  auto pa = a.node();
  return finish(node, {pa}, [pa, indices, n2](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < indices.size(); ++i) {
      const size_t r = static_cast<size_t>(indices[i]);
      for (size_t j = 0; j < n2; ++j) {
        pa->grad[r * n2 + j] += self.grad[i * n2 + j];
      }
    }
  });
}

Tensor replace_rows(const Tensor& base, const std::vector<size_t>& positions,
                    const std::vector<Tensor>& rows) {
  require_2d("replace_rows", base);
  if (positions.size() != rows.size()) {
    throw ShapeError("replace_rows: positions/rows length mismatch");
  }
  const size_t m = base.rows(), n2 = base.cols();
  std::vector<double> out = base.data();
  for (size_t i = 0; i < positions.size(); ++i) {
    const size_t r = positions[i];
    if (r >= m) throw ShapeError("replace_rows: position out of range");
    for (size_t j = i + 1; j < positions.size(); ++j) {
      if (positions[j] == r) {
        throw ShapeError("replace_rows: duplicate position");
      }
    }
    require_2d("replace_rows", rows[i]);
    if (rows[i].rows() != 1 || rows[i].cols() != n2) {
      shape_fail("replace_rows", base, rows[i]);
    }
    for (size_t j = 0; j < n2; ++j) out[r * n2 + j] = rows[i].data()[j];
  }
  auto node = new_node({m, n2}, std::move(out));
  std::vector<std::shared_ptr<Node>> parents{base.node()};
  for (const Tensor& r : rows) parents.push_back(r.node());
  auto pbase = base.node();
  std::vector<std::shared_ptr<Node>> prow;
  for (const Tensor& r : rows) prow.push_back(r.node());
  return finish(node, std::move(parents),
                [pbase, prow, positions, n2](Node& self) {
                  if (wants_grad(pbase.get())) {
                    pbase->ensure_grad();
                    std::vector<bool> replaced(pbase->data.size() / n2, false);
                    for (size_t r : positions) replaced[r] = true;
                    const size_t m2 = pbase->data.size() / n2;
                    for (size_t i = 0; i < m2; ++i) {
                      if (replaced[i]) continue;
                      for (size_t j = 0; j < n2; ++j) {
                        pbase->grad[i * n2 + j] += self.grad[i * n2 + j];
                      }
                    }
                  }
                  for (size_t i = 0; i < prow.size(); ++i) {
                    if (!wants_grad(prow[i].get())) continue;
                    prow[i]->ensure_grad();
                    const size_t r = positions[i];
                    for (size_t j = 0; j < n2; ++j) {
                      prow[i]->grad[j] += self.grad[r * n2 + j];
                    }
                  }
                });
}

Tensor select(const Tensor& a, size_t r, size_t c) {
  require_2d("select", a);
  if (r >= a.rows() || c >= a.cols()) shape_fail("select", a);
  const size_t n2 = a.cols();
  auto node = new_node({1, 1}, {a.data()[r * n2 + c]});
  auto pa = a.node();
  return finish(node, {pa}, [pa, r, c, n2](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    pa->grad[r * n2 + c] += self.grad[0];
  });
}

// ---------------------------------------------------------------------------
// row ops
// ---------------------------------------------------------------------------

Tensor row_softmax(const Tensor& a) {
  require_2d("row_softmax", a);
  const size_t m = a.rows(), n2 = a.cols();
  std::vector<double> out(m * n2);
  for (size_t i = 0; i < m; ++i) {
    const double* x = &a.data()[i * n2];
    double mx = x[0];
    for (size_t j = 1; j < n2; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (size_t j = 0; j < n2; ++j) {
      out[i * n2 + j] = std::exp(x[j] - mx);
      sum += out[i * n2 + j];
    }
    for (size_t j = 0; j < n2; ++j) out[i * n2 + j] /= sum;
  }
  auto node = new_node({m, n2}, std::move(out));
  auto pa = a.node();
  return finish(node, {pa}, [pa, m, n2](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < m; ++i) {
      const double* y = &self.data[i * n2];
      const double* g = &self.grad[i * n2];
      double dot = 0.0;
      for (size_t j = 0; j < n2; ++j) dot += g[j] * y[j];
      for (size_t j = 0; j < n2; ++j) {
        pa->grad[i * n2 + j] += y[j] * (g[j] - dot);
      }
    }
  });
}

Tensor row_log_softmax(const Tensor& a) {
  require_2d("row_log_softmax", a);
  const size_t m = a.rows(), n2 = a.cols();
  std::vector<double> out(m * n2);
  for (size_t i = 0; i < m; ++i) {
    const double* x = &a.data()[i * n2];
    double mx = x[0];
    for (size_t j = 1; j < n2; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (size_t j = 0; j < n2; ++j) sum += std::exp(x[j] - mx);
    const double lse = mx + std::log(sum);
    for (size_t j = 0; j < n2; ++j) out[i * n2 + j] = x[j] - lse;
  }
  auto node = new_node({m, n2}, std::move(out));
  auto pa = a.node();
  return finish(node, {pa}, [pa, m, n2](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < m; ++i) {
      const double* y = &self.data[i * n2];
      const double* g = &self.grad[i * n2];
      double gsum = 0.0;
      for (size_t j = 0; j < n2; ++j) gsum += g[j];
      for (size_t j = 0; j < n2; ++j) {
        pa->grad[i * n2 + j] += g[j] - std::exp(y[j]) * gsum;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  require_2d("layer_norm", x);
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 ||
      beta.cols() != x.cols()) {
    shape_fail("layer_norm", x, gamma);
  }
  const size_t m = x.rows(), n2 = x.cols();
  std::vector<double> out(m * n2);
  auto xhat = std::make_shared<std::vector<double>>(m * n2);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (size_t i = 0; i < m; ++i) {
    const double* row = &x.data()[i * n2];
    double mu = 0.0;
    for (size_t j = 0; j < n2; ++j) mu += row[j];
    mu /= static_cast<double>(n2);
    double var = 0.0;
    for (size_t j = 0; j < n2; ++j) {
      const double d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n2);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (size_t j = 0; j < n2; ++j) {
      const double xh = (row[j] - mu) * is;
      (*xhat)[i * n2 + j] = xh;
      out[i * n2 + j] = gamma.data()[j] * xh + beta.data()[j];
    }
  }
  auto node = new_node({m, n2}, std::move(out));
  auto px = x.node(), pg = gamma.node(), pb = beta.node();
  return finish(node, {px, pg, pb}, [px, pg, pb, xhat, inv_std, m,
                                     n2](Node& self) {
    for (size_t i = 0; i < m; ++i) {
      const double* g = &self.grad[i * n2];
      const double* xh = &(*xhat)[i * n2];
      if (wants_grad(pg.get())) {
        pg->ensure_grad();
        for (size_t j = 0; j < n2; ++j) pg->grad[j] += g[j] * xh[j];
      }
      if (wants_grad(pb.get())) {
        pb->ensure_grad();
        for (size_t j = 0; j < n2; ++j) pb->grad[j] += g[j];
      }
      if (wants_grad(px.get())) {
        px->ensure_grad();
        double mean_a = 0.0, mean_axh = 0.0;
        for (size_t j = 0; j < n2; ++j) {
          const double aj = g[j] * pg->data[j];
          mean_a += aj;
          mean_axh += aj * xh[j];
        }
        mean_a /= static_cast<double>(n2);
        mean_axh /= static_cast<double>(n2);
        const double is = (*inv_std)[i];
        for (size_t j = 0; j < n2; ++j) {
          const double aj = g[j] * pg->data[j];
          px->grad[i * n2 + j] += (aj - mean_a - xh[j] * mean_axh) * is;
        }
      }
    }
  });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(a.size());
  for (double& v : *mask) v = rng.coin(keep) ? 1.0 / keep : 0.0;
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * (*mask)[i];
  auto node = new_node(a.shape(), std::move(out));
  auto pa = a.node();
  return finish(node, {pa}, [pa, mask](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      pa->grad[i] += self.grad[i] * (*mask)[i];
    }
  });
}

// ---------------------------------------------------------------------------
// reductions & losses
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto node = new_node({1, 1}, {s});
  auto pa = a.node();
  return finish(node, {pa}, [pa](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (double& g : pa->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  auto node = new_node({1, 1}, {s * inv});
  auto pa = a.node();
  return finish(node, {pa}, [pa, inv](Node& self) {
    if (!wants_grad(pa.get())) return;
    pa->ensure_grad();
    for (double& g : pa->grad) g += self.grad[0] * inv;
  });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("cosine_similarity", a, b);
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a.data()[i] * b.data()[i];
    na2 += a.data()[i] * a.data()[i];
    nb2 += b.data()[i] * b.data()[i];
  }
  if (na2 == 0.0 || nb2 == 0.0) {
    throw NumericError("cosine_similarity: zero-norm input");
  }
  const double na = std::sqrt(na2), nb = std::sqrt(nb2);
  const double cosv = dot / (na * nb);
  auto node = new_node({1, 1}, {cosv});
  auto pa = a.node(), pb = b.node();
  return finish(node, {pa, pb}, [pa, pb, na, nb, cosv](Node& self) {
    const double g = self.grad[0];
    if (wants_grad(pa.get())) {
      pa->ensure_grad();
      for (size_t i = 0; i < pa->data.size(); ++i) {
        pa->grad[i] += g * (pb->data[i] / (na * nb) -
                            cosv * pa->data[i] / (na * na));
      }
    }
    if (wants_grad(pb.get())) {
      pb->ensure_grad();
      for (size_t i = 0; i < pb->data.size(); ++i) {
        pb->grad[i] += g * (pa->data[i] / (na * nb) -
                            cosv * pb->data[i] / (nb * nb));
      }
    }
  });
}

Tensor bce_with_logits(const Tensor& z, double label) {
  if (z.size() != 1) shape_fail("bce_with_logits", z);
  const double x = z.data()[0];
  auto node = new_node({1, 1}, {stable_softplus(x) - label * x});
  auto pz = z.node();
  return finish(node, {pz}, [pz, label](Node& self) {
    if (!wants_grad(pz.get())) return;
    pz->ensure_grad();
    pz->grad[0] += self.grad[0] * (stable_sigmoid(pz->data[0]) - label);
  });
}

Tensor bce_probability(const Tensor& p, double label) {
  if (p.size() != 1) shape_fail("bce_probability", p);
  const double x = p.data()[0];
  const bool positive = label >= 0.5;
  const double v = positive ? -std::log(x) : -std::log(1.0 - x);
  auto node = new_node({1, 1}, {v});
  auto pp = p.node();
  return finish(node, {pp}, [pp, positive](Node& self) {
    if (!wants_grad(pp.get())) return;
    pp->ensure_grad();
    const double x2 = pp->data[0];
    pp->grad[0] += self.grad[0] * (positive ? -1.0 / x2 : 1.0 / (1.0 - x2));
  });
}

Tensor cross_entropy_logits(const Tensor& logits, size_t target) {
  require_2d("cross_entropy_logits", logits);
  if (logits.rows() != 1 || target >= logits.cols()) {
    shape_fail("cross_entropy_logits", logits);
  }
  return scale(select(row_log_softmax(logits), 0, target), -1.0);
}

}  // namespace kgt
