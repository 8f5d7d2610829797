#include "drdg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace drdg {

const Tensor& Var::value() const { return n_->value; }
Tensor& Var::mutable_value() { return n_->value; }
Shape Var::shape() const { return n_->value.shape; }
bool Var::requires_grad() const { return n_ && n_->requires_grad; }

double Var::scalar() const {
    if (n_->value.numel() != 1) throw ShapeError("Var::scalar on tensor " + shape().str());
    return n_->value.v[0];
}

namespace {

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<std::vector<Var>(const Var&)> backward, const char* op) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->op = op;
    for (const auto& p : n->parents)
        if (p.defined() && p.requires_grad()) n->requires_grad = true;
    if (n->requires_grad) n->backward = std::move(backward);
    return Var(n);
}

Shape broadcast_shape(Shape a, Shape b, const char* op) {
    auto dim = [&](int x, int y) {
        if (x == y) return x;
        if (x == 1) return y;
        if (y == 1) return x;
        throw ShapeError(std::string(op) + ": incompatible shapes " + a.str() + " vs " + b.str());
    };
    return Shape{dim(a.n, b.n), dim(a.c, b.c), dim(a.h, b.h), dim(a.w, b.w)};
}

struct Strides {
    int64_t n, c, h, w;
};

Strides strides_for(Shape s, Shape out) {
    Strides st;
    st.w = (s.w == out.w) ? 1 : 0;
    st.h = (s.h == out.h) ? s.w : 0;
    st.c = (s.c == out.c) ? int64_t(s.h) * s.w : 0;
    st.n = (s.n == out.n) ? int64_t(s.c) * s.h * s.w : 0;
    return st;
}

template <typename F>
Tensor bcast_binary(const Tensor& a, const Tensor& b, Shape os, F f) {
    Tensor out(os);
    const Strides sa = strides_for(a.shape, os);
    const Strides sb = strides_for(b.shape, os);
    const int64_t plane = int64_t(os.h) * os.w;
#pragma omp parallel for schedule(static) if (os.numel() > 32768)
    for (int64_t ncit = 0; ncit < int64_t(os.n) * os.c; ++ncit) {
        const int cc = static_cast<int>(ncit % os.c);
        const int nn = static_cast<int>(ncit / os.c);
        const double* pa = a.v.data() + nn * sa.n + cc * sa.c;
        const double* pb = b.v.data() + nn * sb.n + cc * sb.c;
        double* po = out.v.data() + ncit * plane;
        for (int y = 0; y < os.h; ++y) {
            const double* ra = pa + y * sa.h;
            const double* rb = pb + y * sb.h;
            for (int x = 0; x < os.w; ++x) po[int64_t(y) * os.w + x] = f(ra[x * sa.w], rb[x * sb.w]);
        }
    }
    return out;
}

template <typename F>
Tensor pointwise(const Tensor& a, F f) {
    Tensor out(a.shape);
    const int64_t n = a.numel();
#pragma omp parallel for schedule(static) if (n > 32768)
    for (int64_t i = 0; i < n; ++i) out.v[i] = f(a.v[i]);
    return out;
}

Tensor sum_to_tensor(const Tensor& a, Shape t) {
    if (a.shape == t) return a;
    auto chk = [&](int in, int out) {
        if (out != in && out != 1) throw ShapeError("sum_to: cannot reduce " + a.shape.str() + " to " + t.str());
    };
    chk(a.shape.n, t.n);
    chk(a.shape.c, t.c);
    chk(a.shape.h, t.h);
    chk(a.shape.w, t.w);
    Tensor out(t);
    const int rn = (t.n == 1) ? a.shape.n : 1;
    const int rc = (t.c == 1) ? a.shape.c : 1;
    const int rh = (t.h == 1) ? a.shape.h : 1;
    const int rw = (t.w == 1) ? a.shape.w : 1;
    const int64_t items = t.numel();
#pragma omp parallel for schedule(static) if (items > 4096)
    for (int64_t it = 0; it < items; ++it) {
        const int ox = static_cast<int>(it % t.w);
        const int oy = static_cast<int>((it / t.w) % t.h);
        const int oc = static_cast<int>((it / (int64_t(t.w) * t.h)) % t.c);
        const int on = static_cast<int>(it / (int64_t(t.w) * t.h * t.c));
        double acc = 0.0;
        for (int i = 0; i < rn; ++i)
            for (int j = 0; j < rc; ++j)
                for (int k = 0; k < rh; ++k)
                    for (int l = 0; l < rw; ++l)
                        acc += a.at(t.n == 1 ? i : on, t.c == 1 ? j : oc, t.h == 1 ? k : oy,
                                    t.w == 1 ? l : ox);
        out.v[it] = acc;
    }
    return out;
}

Tensor broadcast_to_tensor(const Tensor& a, Shape t) {
    if (a.shape == t) return a;
    return bcast_binary(a, Tensor::zeros(t), t, [](double x, double) { return x; });
}

Var scatter_label(const Var& g, std::vector<int> labels, int class_count);

}  // namespace

Var constant(Tensor t) { return make_node(std::move(t), {}, nullptr, "const"); }
Var constant_scalar(double x) { return constant(Tensor::scalar(x)); }

Var parameter(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = true;
    n->op = "param";
    return Var(n);
}

Var add(const Var& a, const Var& b) {
    Shape os = broadcast_shape(a.shape(), b.shape(), "add");
    Tensor out = bcast_binary(a.value(), b.value(), os, [](double x, double y) { return x + y; });
    Shape as = a.shape(), bs = b.shape();
    return make_node(std::move(out), {a, b},
                     [as, bs, a, b](const Var& g) -> std::vector<Var> {
                         std::vector<Var> r(2);
                         if (a.requires_grad()) r[0] = sum_to(g, as);
                         if (b.requires_grad()) r[1] = sum_to(g, bs);
                         return r;
                     },
                     "add");
}

Var sub(const Var& a, const Var& b) { return add(a, neg(b)); }

Var mul(const Var& a, const Var& b) {
    Shape os = broadcast_shape(a.shape(), b.shape(), "mul");
    Tensor out = bcast_binary(a.value(), b.value(), os, [](double x, double y) { return x * y; });
    Shape as = a.shape(), bs = b.shape();
    return make_node(std::move(out), {a, b},
                     [as, bs, a, b](const Var& g) -> std::vector<Var> {
                         std::vector<Var> r(2);
                         if (a.requires_grad()) r[0] = sum_to(mul(g, b), as);
                         if (b.requires_grad()) r[1] = sum_to(mul(g, a), bs);
                         return r;
                     },
                     "mul");
}

Var scale(const Var& a, double k) {
    Tensor out = pointwise(a.value(), [k](double x) { return k * x; });
    return make_node(std::move(out), {a},
                     [k](const Var& g) -> std::vector<Var> { return {scale(g, k)}; }, "scale");
}

Var add_scalar(const Var& a, double k) {
    Tensor out = pointwise(a.value(), [k](double x) { return x + k; });
    return make_node(std::move(out), {a},
                     [](const Var& g) -> std::vector<Var> { return {g}; }, "add_scalar");
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var pow_const(const Var& a, double p) {
    Tensor out = pointwise(a.value(), [p](double x) { return std::pow(x, p); });
    return make_node(std::move(out), {a},
                     [a, p](const Var& g) -> std::vector<Var> {
                         return {mul(g, scale(pow_const(a, p - 1.0), p))};
                     },
                     "pow");
}

Var exp_(const Var& a) {
    Tensor out = pointwise(a.value(), [](double x) { return std::exp(x); });
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->parents = {a};
    n->op = "exp";
    n->requires_grad = a.requires_grad();
    std::weak_ptr<Node> self = n;
    if (n->requires_grad)
        n->backward = [self](const Var& g) -> std::vector<Var> {
            return {mul(g, Var(self.lock()))};
        };
    return Var(n);
}

Var log_(const Var& a) {
    Tensor out = pointwise(a.value(), [](double x) { return std::log(x); });
    return make_node(std::move(out), {a},
                     [a](const Var& g) -> std::vector<Var> { return {mul(g, pow_const(a, -1.0))}; },
                     "log");
}

Var tanh_(const Var& a) {
    Tensor out = pointwise(a.value(), [](double x) { return std::tanh(x); });
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->parents = {a};
    n->op = "tanh";
    n->requires_grad = a.requires_grad();
    std::weak_ptr<Node> self = n;
    if (n->requires_grad)
        n->backward = [self](const Var& g) -> std::vector<Var> {
            Var y(self.lock());
            return {mul(g, add_scalar(neg(mul(y, y)), 1.0))};
        };
    return Var(n);
}

Var sigmoid_(const Var& a) {
    Tensor out = pointwise(a.value(), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->parents = {a};
    n->op = "sigmoid";
    n->requires_grad = a.requires_grad();
    std::weak_ptr<Node> self = n;
    if (n->requires_grad)
        n->backward = [self](const Var& g) -> std::vector<Var> {
            Var y(self.lock());
            return {mul(g, mul(y, add_scalar(neg(y), 1.0)))};
        };
    return Var(n);
}

Tensor sign_tensor(const Tensor& t) {
    return pointwise(t, [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var abs_(const Var& a) {
    Tensor out = pointwise(a.value(), [](double x) { return std::fabs(x); });
    Tensor sgn = sign_tensor(a.value());
    return make_node(std::move(out), {a},
                     [sgn](const Var& g) -> std::vector<Var> { return {mul(g, constant(sgn))}; },
                     "abs");
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out = pointwise(a.value(), [slope](double x) { return x > 0 ? x : slope * x; });
    Tensor mask = pointwise(a.value(), [slope](double x) { return x > 0 ? 1.0 : slope; });
    return make_node(std::move(out), {a},
                     [mask](const Var& g) -> std::vector<Var> { return {mul(g, constant(mask))}; },
                     "lrelu");
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var clamp(const Var& a, double lo, double hi) {
    Tensor out = pointwise(a.value(), [lo, hi](double x) { return std::clamp(x, lo, hi); });
    Tensor mask = pointwise(a.value(), [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
    return make_node(std::move(out), {a},
                     [mask](const Var& g) -> std::vector<Var> { return {mul(g, constant(mask))}; },
                     "clamp");
}

Var sum_to(const Var& a, Shape target) {
    if (a.shape() == target) return a;
    Tensor out = sum_to_tensor(a.value(), target);
    Shape as = a.shape();
    return make_node(std::move(out), {a},
                     [as](const Var& g) -> std::vector<Var> { return {broadcast_to(g, as)}; },
                     "sum_to");
}

Var broadcast_to(const Var& a, Shape target) {
    if (a.shape() == target) return a;
    Tensor out = broadcast_to_tensor(a.value(), target);
    Shape as = a.shape();
    return make_node(std::move(out), {a},
                     [as](const Var& g) -> std::vector<Var> { return {sum_to(g, as)}; },
                     "broadcast");
}

Var mean_all(const Var& a) {
    return scale(sum_to(a, Shape{1, 1, 1, 1}), 1.0 / static_cast<double>(a.shape().numel()));
}

Var reduce_max_all(const Var& a) {
    const auto& v = a.value().v;
    size_t arg = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[arg]) arg = i;
    Tensor out = Tensor::scalar(v[arg]);
    Tensor onehot(a.shape());
    onehot.v[arg] = 1.0;
    Shape as = a.shape();
    return make_node(std::move(out), {a},
                     [onehot, as](const Var& g) -> std::vector<Var> {
                         return {mul(broadcast_to(g, as), constant(onehot))};
                     },
                     "max_all");
}

Var concat_c(const Var& a, const Var& b) {
    Shape as = a.shape(), bs = b.shape();
    if (as.n != bs.n || as.h != bs.h || as.w != bs.w)
        throw ShapeError("concat_c: " + as.str() + " vs " + bs.str());
    Tensor out(Shape{as.n, as.c + bs.c, as.h, as.w});
    const int64_t plane = int64_t(as.h) * as.w;
    for (int nn = 0; nn < as.n; ++nn) {
        std::copy_n(a.value().v.data() + int64_t(nn) * as.c * plane, int64_t(as.c) * plane,
                    out.v.data() + int64_t(nn) * (as.c + bs.c) * plane);
        std::copy_n(b.value().v.data() + int64_t(nn) * bs.c * plane, int64_t(bs.c) * plane,
                    out.v.data() + (int64_t(nn) * (as.c + bs.c) + as.c) * plane);
    }
    int ca = as.c, cb = bs.c;
    return make_node(std::move(out), {a, b},
                     [ca, cb, a, b](const Var& g) -> std::vector<Var> {
                         std::vector<Var> r(2);
                         if (a.requires_grad()) r[0] = slice_c(g, 0, ca);
                         if (b.requires_grad()) r[1] = slice_c(g, ca, ca + cb);
                         return r;
                     },
                     "concat");
}

namespace {
Var embed_c(const Var& a, int total_c, int c0) {
    Shape as = a.shape();
    Tensor out(Shape{as.n, total_c, as.h, as.w});
    const int64_t plane = int64_t(as.h) * as.w;
    for (int nn = 0; nn < as.n; ++nn)
        std::copy_n(a.value().v.data() + int64_t(nn) * as.c * plane, int64_t(as.c) * plane,
                    out.v.data() + (int64_t(nn) * total_c + c0) * plane);
    int c1 = c0 + as.c;
    return make_node(std::move(out), {a},
                     [c0, c1](const Var& g) -> std::vector<Var> { return {slice_c(g, c0, c1)}; },
                     "embed_c");
}
}  // namespace

Var slice_c(const Var& a, int c0, int c1) {
    Shape as = a.shape();
    if (c0 < 0 || c1 > as.c || c0 >= c1) throw ShapeError("slice_c: bad range");
    Tensor out(Shape{as.n, c1 - c0, as.h, as.w});
    const int64_t plane = int64_t(as.h) * as.w;
    for (int nn = 0; nn < as.n; ++nn)
        std::copy_n(a.value().v.data() + (int64_t(nn) * as.c + c0) * plane, int64_t(c1 - c0) * plane,
                    out.v.data() + int64_t(nn) * (c1 - c0) * plane);
    int total = as.c;
    return make_node(std::move(out), {a},
                     [total, c0](const Var& g) -> std::vector<Var> { return {embed_c(g, total, c0)}; },
                     "slice_c");
}

namespace {
Var embed_n(const Var& a, int total_n, int n0) {
    Shape as = a.shape();
    Tensor out(Shape{total_n, as.c, as.h, as.w});
    const int64_t per = int64_t(as.c) * as.h * as.w;
    std::copy_n(a.value().v.data(), int64_t(as.n) * per, out.v.data() + int64_t(n0) * per);
    int n1 = n0 + as.n;
    return make_node(std::move(out), {a},
                     [n0, n1](const Var& g) -> std::vector<Var> { return {slice_n(g, n0, n1)}; },
                     "embed_n");
}
}  // namespace

Var slice_n(const Var& a, int n0, int n1) {
    Shape as = a.shape();
    if (n0 < 0 || n1 > as.n || n0 >= n1) throw ShapeError("slice_n: bad range");
    Tensor out(Shape{n1 - n0, as.c, as.h, as.w});
    const int64_t per = int64_t(as.c) * as.h * as.w;
    std::copy_n(a.value().v.data() + int64_t(n0) * per, int64_t(n1 - n0) * per, out.v.data());
    int total = as.n;
    return make_node(std::move(out), {a},
                     [total, n0](const Var& g) -> std::vector<Var> { return {embed_n(g, total, n0)}; },
                     "slice_n");
}

namespace {
Var scatter_label(const Var& g, std::vector<int> labels, int class_count) {
    Shape gs = g.shape();  // (n,1,h,w)
    Tensor out(Shape{gs.n, class_count, gs.h, gs.w});
    const int64_t plane = int64_t(gs.h) * gs.w;
    for (int nn = 0; nn < gs.n; ++nn)
        for (int64_t p = 0; p < plane; ++p) {
            const int lab = labels[nn * plane + p];
            out.v[(int64_t(nn) * class_count + lab) * plane + p] = g.value().v[nn * plane + p];
        }
    return make_node(std::move(out), {g},
                     [labels](const Var& h) -> std::vector<Var> { return {gather_label(h, labels)}; },
                     "scatter_label");
}
}  // namespace

Var gather_label(const Var& scores, const std::vector<int>& labels) {
    Shape s = scores.shape();
    const int64_t plane = int64_t(s.h) * s.w;
    if (static_cast<int64_t>(labels.size()) != int64_t(s.n) * plane)
        throw ShapeError("gather_label: label count mismatch");
    Tensor out(Shape{s.n, 1, s.h, s.w});
    for (int nn = 0; nn < s.n; ++nn)
        for (int64_t p = 0; p < plane; ++p) {
            const int lab = labels[nn * plane + p];
            if (lab < 0 || lab >= s.c)
                throw DataError("gather_label: label " + std::to_string(lab) + " out of range [0," +
                                std::to_string(s.c) + ")");
            out.v[nn * plane + p] = scores.value().v[(int64_t(nn) * s.c + lab) * plane + p];
        }
    std::vector<int> labs = labels;
    int cc = s.c;
    return make_node(std::move(out), {scores},
                     [labs, cc](const Var& g) -> std::vector<Var> {
                         return {scatter_label(g, labs, cc)};
                     },
                     "gather_label");
}

Var conv2d(const Var& x, const Var& w, const kernels::ConvGeom& g) {
    Tensor out = kernels::conv2d_forward(x.value(), w.value(), g);
    Shape xs = x.shape(), ws = w.shape();
    return make_node(std::move(out), {x, w},
                     [x, w, g, xs, ws](const Var& gr) -> std::vector<Var> {
                         std::vector<Var> r(2);
                         if (x.requires_grad()) r[0] = conv2d_transpose(gr, w, g, xs.h, xs.w);
                         if (w.requires_grad()) {
                             Tensor dw = kernels::conv2d_weight_grad(gr.value(), x.value(), g, ws);
                             r[1] = make_node(std::move(dw), {gr, x},
                                              [gr, x, g, ws](const Var& q) -> std::vector<Var> {
                                                  std::vector<Var> rr(2);
                                                  if (gr.requires_grad()) rr[0] = conv2d(x, q, g);
                                                  if (x.requires_grad()) {
                                                      Shape grs = gr.shape();
                                                      (void)grs;
                                                      rr[1] = conv2d_transpose(gr, q, g, x.shape().h,
                                                                               x.shape().w);
                                                  }
                                                  return rr;
                                              },
                                              "conv_wgrad");
                         }
                         return r;
                     },
                     "conv2d");
}

Var conv2d_transpose(const Var& g_in, const Var& w, const kernels::ConvGeom& geom, int out_h, int out_w) {
    Tensor out = kernels::conv2d_input_grad(g_in.value(), w.value(), geom, out_h, out_w);
    Shape ws = w.shape();
    return make_node(std::move(out), {g_in, w},
                     [g_in, w, geom, ws](const Var& h) -> std::vector<Var> {
                         std::vector<Var> r(2);
                         if (g_in.requires_grad()) r[0] = conv2d(h, w, geom);
                         if (w.requires_grad()) {
                             Tensor dw = kernels::conv2d_weight_grad(g_in.value(), h.value(), geom, ws);
                             r[1] = make_node(std::move(dw), {g_in, h},
                                              [g_in, h, geom, ws](const Var& q) -> std::vector<Var> {
                                                  std::vector<Var> rr(2);
                                                  if (g_in.requires_grad()) rr[0] = conv2d(h, q, geom);
                                                  if (h.requires_grad())
                                                      rr[1] = conv2d_transpose(g_in, q, geom,
                                                                               h.shape().h, h.shape().w);
                                                  return rr;
                                              },
                                              "convT_wgrad");
                         }
                         return r;
                     },
                     "convT");
}

Var resize_bilinear(const Var& x, int oh, int ow) {
    Tensor out = kernels::resize_bilinear(x.value(), oh, ow);
    Shape xs = x.shape();
    return make_node(std::move(out), {x},
                     [xs](const Var& g) -> std::vector<Var> {
                         Tensor dx = kernels::resize_bilinear_adjoint(g.value(), xs.h, xs.w);
                         Shape gs = g.shape();
                         return {make_node(std::move(dx), {g},
                                           [gs](const Var& h) -> std::vector<Var> {
                                               return {resize_bilinear(h, gs.h, gs.w)};
                                           },
                                           "resize_adj")};
                     },
                     "resize");
}

std::vector<Var> grad(const Var& root, const std::vector<Var>& wrt) {
    if (root.shape().numel() != 1) throw ShapeError("grad: root must be scalar, got " + root.shape().str());

    // Iterative postorder DFS over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_map<Node*, std::shared_ptr<Node>> keep;
    {
        std::unordered_set<Node*> visited;
        std::vector<std::pair<Node*, size_t>> stack;
        if (root.requires_grad()) {
            stack.push_back({root.node(), 0});
            keep[root.node()] = root.handle();
            visited.insert(root.node());
        }
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            bool descended = false;
            while (idx < node->parents.size()) {
                const Var& p = node->parents[idx++];
                if (p.defined() && p.requires_grad() && !visited.count(p.node())) {
                    visited.insert(p.node());
                    keep[p.node()] = p.handle();
                    stack.push_back({p.node(), 0});
                    descended = true;
                    break;
                }
            }
            if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
                order.push_back(stack.back().first);
                stack.pop_back();
            }
        }
    }

    std::unordered_map<Node*, Var> gm;
    if (root.requires_grad()) gm[root.node()] = constant(Tensor::full(root.shape(), 1.0));

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        auto gi = gm.find(node);
        if (gi == gm.end() || !node->backward) continue;
        std::vector<Var> pgrads = node->backward(gi->second);
        for (size_t i = 0; i < node->parents.size() && i < pgrads.size(); ++i) {
            const Var& p = node->parents[i];
            if (!p.defined() || !p.requires_grad() || !pgrads[i].defined()) continue;
            auto e = gm.find(p.node());
            if (e == gm.end())
                gm[p.node()] = pgrads[i];
            else
                e->second = add(e->second, pgrads[i]);
        }
    }

    std::vector<Var> result;
    result.reserve(wrt.size());
    for (const auto& v : wrt) {
        auto e = gm.find(v.node());
        result.push_back(e != gm.end() ? e->second : constant(Tensor::zeros(v.shape())));
    }
    return result;
}

}  // namespace drdg
