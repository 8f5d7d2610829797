#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "drdg/kernels.hpp"
#include "drdg/tensor.hpp"

// Define-by-run reverse-mode autodiff. Backward functions emit graph nodes
// built from the same op set, so grad() output is itself differentiable;
// the Wasserstein gradient penalty relies on that for its second backward
// pass through the critics.

namespace drdg {

struct Node;

class Var {
  public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    bool defined() const { return n_ != nullptr; }
    const Tensor& value() const;
    Tensor& mutable_value();  // leaf parameter updates only
    Shape shape() const;
    bool requires_grad() const;
    Node* node() const { return n_.get(); }
    std::shared_ptr<Node> handle() const { return n_; }

    double scalar() const;  // value of a 1-element tensor

  private:
    std::shared_ptr<Node> n_;
};

struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<Var> parents;
    // Given the gradient of the loss w.r.t. this node, produce gradients for
    // each parent (undefined Var = no gradient for that parent).
    std::function<std::vector<Var>(const Var&)> backward;
    const char* op = "";
};

Var constant(Tensor t);
Var constant_scalar(double x);
Var parameter(Tensor t);  // leaf with requires_grad

// Pointwise / broadcasting (dims must match or be 1)
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);
Var neg(const Var& a);
Var pow_const(const Var& a, double p);
Var exp_(const Var& a);
Var log_(const Var& a);
Var tanh_(const Var& a);
Var sigmoid_(const Var& a);
Var abs_(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var relu(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Shape / reduction
Var sum_to(const Var& a, Shape target);
Var broadcast_to(const Var& a, Shape target);
Var mean_all(const Var& a);
Var reduce_max_all(const Var& a);  // gradient routed to the first argmax
Var concat_c(const Var& a, const Var& b);
Var slice_c(const Var& a, int c0, int c1);
Var slice_n(const Var& a, int n0, int n1);

// Per-pixel class gather for cross-entropy; labels indexed [n][h*w]
Var gather_label(const Var& scores, const std::vector<int>& labels);

// Structured, kernel-backed ops
Var conv2d(const Var& x, const Var& w, const kernels::ConvGeom& g);
Var conv2d_transpose(const Var& g_in, const Var& w, const kernels::ConvGeom& geom, int out_h, int out_w);
Var resize_bilinear(const Var& x, int oh, int ow);

// Constant helpers (no gradient path)
Tensor sign_tensor(const Tensor& t);

// Gradients of a scalar root w.r.t. the given leaves/intermediates.
// Returned Vars live in the same graph and can be differentiated again.
// Leaves unreachable from root get zero gradients.
std::vector<Var> grad(const Var& root, const std::vector<Var>& wrt);

}  // namespace drdg
