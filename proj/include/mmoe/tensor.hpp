#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmoe {

/// Raised when an operation would produce NaN or Inf. Results are checked
/// after every op; non-finite values never propagate silently.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Raised on inconsistent shapes, bad contraction specs, invalid axes.
class ShapeError : public std::invalid_argument {
public:
  explicit ShapeError(const std::string &msg) : std::invalid_argument(msg) {}
};

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape &shape);
std::string shape_str(const Shape &shape);

struct AutogradNode;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::shared_ptr<AutogradNode> node; // null for leaves and constants
  bool requires_grad = false;
};

/// Dense row-major tensor of 64-bit reals with an optional reverse-mode
/// differentiation record. Immutable after construction.
class Tensor {
public:
  Tensor() : impl_(std::make_shared<TensorImpl>()) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(double value) { return from_data({}, {value}); }
  static Tensor from_data(Shape shape, std::vector<double> data);
  /// Leaf tensor that participates in differentiation.
  static Tensor param(Shape shape, std::vector<double> data);

  const Shape &shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  const std::vector<double> &data() const { return impl_->data; }

  /// Value of a scalar (rank-0 or single-element) tensor.
  double value() const;
  double at(std::initializer_list<std::size_t> idx) const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool has_node() const { return impl_->node != nullptr; }
  /// Stable identity used as the key in gradient maps.
  const TensorImpl *key() const { return impl_.get(); }

  /// Same values, no differentiation record.
  Tensor detach() const;

  /// Equal shape and bitwise-equal values.
  bool equals(const Tensor &other) const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_op(const char *, Shape, std::vector<double>,
                        std::vector<Tensor>,
                        std::function<void(const std::vector<double> &,
                                           std::vector<std::vector<double> *> &)>);
};

struct AutogradNode {
  const char *op;
  std::vector<Tensor> parents;
  // Accumulates into parent gradient buffers; entries are null when the
  // corresponding parent needs no gradient.
  std::function<void(const std::vector<double> &grad_out,
                     std::vector<std::vector<double> *> &parent_grads)>
      backward;
};

/// Builds an op result wired into the autodiff graph. The node is only
/// created when some input is on a differentiable path, so evaluation-mode
/// graphs carry no bookkeeping.
Tensor make_op(const char *op, Shape out_shape, std::vector<double> out_data,
               std::vector<Tensor> inputs,
               std::function<void(const std::vector<double> &,
                                  std::vector<std::vector<double> *> &)>
                   backward);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Index-notation contraction, e.g. "ij,jk->ik" or "nd,dc->nc".
/// One or two operands; every output index must appear in some operand and
/// shared indices must agree in extent.
Tensor contract(const std::string &spec, const std::vector<Tensor> &operands);

/// Softmax along `axis`, computed with max subtraction. Slices along the
/// axis sum to 1.
Tensor softmax_axis(const Tensor &t, std::size_t axis);

// Pointwise ops. Binary ops accept exactly matching shapes or a
// single-element (scalar) operand on either side; nothing else broadcasts.
Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &t, double c);
Tensor gelu(const Tensor &t);
Tensor exp_elem(const Tensor &t);
Tensor clamp_max(const Tensor &t, double limit);

/// Rows of a 2-D tensor scaled to unit L2 norm. Rows with norm below 1e-12
/// map to zero rows.
Tensor l2norm_rows(const Tensor &t);

/// Tag dispatcher over the pointwise family; `c` feeds `scale`.
Tensor elementwise(const std::string &tag, const std::vector<Tensor> &operands,
                   double c = 0.0);

/// Materialized broadcast with numpy-style right alignment: each aligned
/// extent must match or be 1 in the source. Backward sums over the
/// broadcast axes.
Tensor broadcast_to(const Tensor &t, const Shape &target);

Tensor reshape(const Tensor &t, const Shape &target);

/// Stacks equally-shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor> &parts);

/// Layer normalization over the last axis with learned gain and bias.
Tensor layer_norm(const Tensor &x, const Tensor &gain, const Tensor &bias,
                  double eps = 1e-5);

/// Mean cross-entropy of row-softmaxed logits (N x C) against integer labels.
Tensor softmax_cross_entropy(const Tensor &logits,
                             const std::vector<int> &labels);

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

/// Gradients keyed by leaf tensor identity; absent leaves read as zero.
class GradMap {
public:
  Tensor get(const Tensor &param) const;
  bool contains(const Tensor &param) const;
  void set(const TensorImpl *key, Tensor grad);

private:
  std::unordered_map<const TensorImpl *, Tensor> grads_;
};

/// Reverse-mode differentiation from a scalar loss. Throws ShapeError when
/// the seed is not scalar.
GradMap backward(const Tensor &loss);

struct GradReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;        // index into the checked parameter list
  std::vector<std::size_t> worst_coord;
  double analytic = 0.0;              // values at the worst coordinate
  double numeric = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Compares backward() with central finite differences
/// (f(x+eps) - f(x-eps)) / (2 eps) over every coordinate of every parameter.
/// The builder must be deterministic; two forward passes are compared to
/// detect violation.
GradReport grad_check(
    const std::function<Tensor(const std::vector<Tensor> &)> &loss_builder,
    const std::vector<Tensor> &params, double eps, double tolerance);

// ---------------------------------------------------------------------------
// Deterministic RNG helpers
// ---------------------------------------------------------------------------

/// SplitMix64 mix; composes keys for counter-based streams.
std::uint64_t mix64(std::uint64_t a);
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);
std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c);

/// Uniform double in [0, 1) from a 64-bit word.
double u01(std::uint64_t bits);

} // namespace mmoe
