#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vasis/tensor.hpp"

namespace vasis {

class LabelMap;

// Reverse-mode autodiff over Tensor values. Every op builds a Node holding
// the forward value and, when any input requires gradients, a closure that
// pulls the node's grad into its parents. backward() runs the closures in
// reverse topological order from a scalar root.
//
// Nodes are immutable after construction except for grad accumulation, which
// is confined to the single thread running backward().
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::string name;  // non-empty only for named parameters
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_ref();  // allocates zeros lazily
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var leaf(Tensor value, bool requires_grad = false, std::string name = {});
  static Var constant(Shape shape, double value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& grad() const { return node_->grad_ref(); }
  bool has_grad() const { return !node_->grad.empty(); }
  Shape shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  void zero_grad() const { node_->grad = Tensor(); }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Runs backprop from a scalar (1x1x1x1) root, seeding d(root)/d(root) = 1.
void backward(const Var& root);

// ---- elementwise / broadcast ----
// Binary ops broadcast on any axis where one operand has extent 1.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var neg(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh_op(const Var& a);
Var abs_op(const Var& a);
Var sqrt_op(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

// ---- reductions ----
Var mean_all(const Var& a);
Var sum_all(const Var& a);
// per_sample=false: mean over (b,h,w) per channel -> (1,C,1,1).
// per_sample=true:  mean over (h,w) per sample and channel -> (B,C,1,1).
Var channel_mean(const Var& a, bool per_sample);

// ---- structure ----
Var expand(const Var& a, Shape target);  // broadcast size-1 axes
Var concat_channels(const Var& a, const Var& b);
Var tile_channels(const Var& a, int64_t times);
Var upsample_nearest2(const Var& a);
Var avg_pool2(const Var& a);
Var detach(const Var& a);

// Per-pixel row lookup: out[b,:,h,w] = table[labels(b,h,w), :].
// table has shape (N, C, 1, 1); gradients scatter-add into rows.
Var rows_lookup(const Var& table, const LabelMap& labels);

// ---- convolution ----
enum class PaddingMode { zero, reflect };

struct ConvOpts {
  int64_t stride = 1;
  int64_t pad = 0;
  PaddingMode padding = PaddingMode::zero;
};

// x: (B,Cin,H,W), w: (Cout,Cin,k,k), bias: (1,Cout,1,1).
Var conv2d(const Var& x, const Var& w, const Var& bias, const ConvOpts& opts);

// Weighted per-pixel cross entropy over the channel axis.
// target_class < 0 reads the target from labels; otherwise every pixel uses
// target_class. class_weights[k] scales pixels whose target is k.
Var softmax_ce_channel(const Var& logits, const LabelMap& labels,
                       const std::vector<double>& class_weights, int64_t target_class = -1);

namespace kernels {
// Forward kernels shared between the autograd ops and the plain-tensor API,
// so that both routes produce bitwise-identical values.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvOpts& opts);
void conv2d_backward(const Tensor& x, const Tensor& w, const ConvOpts& opts,
                     const Tensor& grad_out, Tensor* dx, Tensor* dw, Tensor* db);
void channel_mean_kernel(const Tensor& x, bool per_sample, Tensor& out);
}  // namespace kernels

}  // namespace vasis
