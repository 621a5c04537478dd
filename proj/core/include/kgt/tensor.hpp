#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kgt/rng.hpp"

namespace kgt {

namespace detail {

struct Node {
  std::vector<size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on first backward touch
  bool requires_grad = false;
  bool grad_path = false;  // true if this node or any ancestor needs grads
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  size_t size() const {
    size_t s = 1;
    for (size_t d : shape) s *= d;
    return s;
  }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Dense float64 array with reverse-mode gradients. Copying a Tensor copies
// the handle, not the buffer; ops build a graph that backward() walks in
// reverse topological order, accumulating into .grad() of every reachable
// tensor with requires_grad set.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<size_t> shape, double value,
                     bool requires_grad = false);
  static Tensor from_data(std::vector<size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor randn(std::vector<size_t> shape, Rng& rng, double stddev,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<size_t>& shape() const { return node_->shape; }
  size_t size() const { return node_->size(); }
  size_t rows() const { return node_->shape.at(0); }
  size_t cols() const { return node_->shape.at(1); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const { return !node_->grad.empty(); }

  double item() const;
  double at(size_t r, size_t c) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  // Reverse pass from a scalar loss. Gradients accumulate additively; call
  // zero_grad on parameters between optimization steps.
  void backward() const;
  void zero_grad();

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// (m,n) + (1,n), broadcast over rows.
Tensor add_row_broadcast(const Tensor& a, const Tensor& bias);

// --- shape ---
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, size_t start, size_t count);
// Rows at `indices` (duplicates allowed); backward scatter-adds.
Tensor gather_rows(const Tensor& a, const std::vector<int32_t>& indices);
// Copy of `base` with rows at `positions` replaced by the given 1-row
// tensors; backward routes the replaced rows' grads to them.
Tensor replace_rows(const Tensor& base, const std::vector<size_t>& positions,
                    const std::vector<Tensor>& rows);
Tensor select(const Tensor& a, size_t r, size_t c);  // 1x1 view

// --- rows ---
Tensor row_softmax(const Tensor& a);
Tensor row_log_softmax(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor dropout(const Tensor& a, double rate, Rng& rng);

// --- reductions & losses ---
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Both vectors (any matching shape); scalar in [-1,1]. Throws NumericError
// on a zero-norm input.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);
// Scalar logit z: softplus(z) - label*z, i.e. BCE(sigmoid(z), label) in a
// form stable for any z.
Tensor bce_with_logits(const Tensor& z, double label);
// Scalar probability p in (0,1): -log p for label 1, -log(1-p) for label 0.
Tensor bce_probability(const Tensor& p, double label);
// -row_log_softmax(logits)[0, target]; logits is 1xC.
Tensor cross_entropy_logits(const Tensor& logits, size_t target);

}  // namespace kgt
