#include "drdg/losses.hpp"

#include <cmath>
#include <sstream>

namespace drdg {

void LossWeights::validate() const {
    if (lambda_adv < 0 || lambda_cyc < 0 || lambda_dsl < 0 || lambda_dccl < 0)
        throw ConfigError("LossWeights: lambdas must be non-negative");
}

double LossReport::recompute(const LossWeights& w) const {
    return w.lambda_adv * (adv_st + adv_ts) + w.lambda_cyc * (cyc_st + cyc_ts) +
           w.lambda_dsl * (dsl_s + dsl_t) + w.lambda_dccl * (dccl_st + dccl_ts);
}

std::string LossReport::json_line(int64_t step, double critic_s, double critic_t) const {
    std::ostringstream os;
    os.precision(12);
    os << "{\"step\":" << step << ",\"adv_st\":" << adv_st << ",\"adv_ts\":" << adv_ts
       << ",\"cyc_st\":" << cyc_st << ",\"cyc_ts\":" << cyc_ts << ",\"dsl_s\":" << dsl_s
       << ",\"dsl_t\":" << dsl_t << ",\"dccl_st\":" << dccl_st << ",\"dccl_ts\":" << dccl_ts
       << ",\"total\":" << total << ",\"critic_s\":" << critic_s << ",\"critic_t\":" << critic_t << "}";
    return os.str();
}

Var critic_loss(const Var& real_scores, const Var& fake_scores) {
    return sub(mean_all(fake_scores), mean_all(real_scores));
}

Var gen_adv_loss(const Var& fake_scores) { return neg(mean_all(fake_scores)); }

Var cycle_loss(const Var& x, const Var& x_rec) {
    if (x.shape() != x_rec.shape())
        throw ShapeError("cycle_loss: " + x.shape().str() + " vs " + x_rec.shape().str());
    return mean_all(abs_(sub(x, x_rec)));
}

Var berhu(const Var& pred, const Var& gt) {
    if (pred.shape() != gt.shape())
        throw ShapeError("berhu: " + pred.shape().str() + " vs " + gt.shape().str());
    Var d = abs_(sub(pred, gt));
    double dmax = 0;
    for (double v : d.value().v) dmax = std::max(dmax, v);
    if (dmax == 0.0) return constant_scalar(0.0);

    Var L = scale(reduce_max_all(d), 0.2);
    const double Lv = L.scalar();
    Tensor lin_mask(d.shape());
    for (size_t i = 0; i < lin_mask.v.size(); ++i) lin_mask.v[i] = d.value().v[i] <= Lv ? 1.0 : 0.0;
    Tensor quad_mask(d.shape());
    for (size_t i = 0; i < quad_mask.v.size(); ++i) quad_mask.v[i] = 1.0 - lin_mask.v[i];

    Var Lb = broadcast_to(L, d.shape());
    Var quad = mul(add(mul(d, d), mul(Lb, Lb)), pow_const(scale(Lb, 2.0), -1.0));
    Var per_elem = add(mul(d, constant(lin_mask)), mul(quad, constant(quad_mask)));
    return mean_all(per_elem);
}

Var dsl(const GeneratorBundle& g, const Var& x, const Var& z) {
    return berhu(g.depth_forward(x), z);
}

Var dccl(const GeneratorBundle& g_back, const Var& x_translated, const Var& z_src) {
    Var pred = g_back.depth_forward(x_translated);
    Var aligned = resize_bilinear(pred, z_src.shape().h, z_src.shape().w);
    return berhu(aligned, z_src);
}

Var seg_cross_entropy(const Var& scores, const std::vector<int>& labels) {
    const Shape s = scores.shape();
    const int64_t plane = int64_t(s.h) * s.w;
    if (static_cast<int64_t>(labels.size()) != int64_t(s.n) * plane)
        throw ShapeError("seg_cross_entropy: scores " + s.str() + " vs " +
                         std::to_string(labels.size()) + " labels");

    // constant stability shift; cancels exactly in the gradient
    Tensor mx(Shape{s.n, 1, s.h, s.w});
    for (int nn = 0; nn < s.n; ++nn)
        for (int64_t p = 0; p < plane; ++p) {
            double m = scores.value().v[int64_t(nn) * s.c * plane + p];
            for (int c = 1; c < s.c; ++c)
                m = std::max(m, scores.value().v[(int64_t(nn) * s.c + c) * plane + p]);
            mx.v[nn * plane + p] = m;
        }
    Var shifted = sub(scores, constant(mx));
    Var lse = add(log_(sum_to(exp_(shifted), Shape{s.n, 1, s.h, s.w})), constant(mx));
    Var picked = gather_label(scores, labels);
    return scale(sum_to(sub(lse, picked), Shape{1, 1, 1, 1}),
                 1.0 / (static_cast<double>(s.n) * plane));
}

Var gradient_penalty(const Discriminator& d, const Tensor& real, const Tensor& fake, Rng& rng) {
    if (real.shape != fake.shape)
        throw ShapeError("gradient_penalty: real " + real.shape.str() + " vs fake " + fake.shape.str());
    const Shape s = real.shape;
    Tensor xhat(s);
    const int64_t per = int64_t(s.c) * s.h * s.w;
    for (int nn = 0; nn < s.n; ++nn) {
        const double eps = rng.uniform();
        for (int64_t i = 0; i < per; ++i)
            xhat.v[nn * per + i] = eps * real.v[nn * per + i] + (1.0 - eps) * fake.v[nn * per + i];
    }
    Var x = parameter(std::move(xhat));
    Var smap = d.forward(x);
    const Shape ms = smap.shape();
    Var per_sample = scale(sum_to(smap, Shape{s.n, 1, 1, 1}),
                           1.0 / (static_cast<double>(ms.c) * ms.h * ms.w));
    Var total = sum_to(per_sample, Shape{1, 1, 1, 1});
    Var g = grad(total, {x})[0];
    Var norm2 = sum_to(mul(g, g), Shape{s.n, 1, 1, 1});
    Var norm = pow_const(add_scalar(norm2, 1e-12), 0.5);
    Var excess = add_scalar(norm, -1.0);
    return mean_all(mul(excess, excess));
}

double critic_loss(const Tensor& real_scores, const Tensor& fake_scores) {
    return critic_loss(constant(real_scores), constant(fake_scores)).scalar();
}

double gen_adv_loss(const Tensor& fake_scores) { return gen_adv_loss(constant(fake_scores)).scalar(); }

double cycle_loss(const ImageTile& x, const ImageTile& x_rec) {
    return cycle_loss(constant(x.to_tensor()), constant(x_rec.to_tensor())).scalar();
}

double berhu(const DepthTile& pred, const DepthTile& gt) {
    return berhu(constant(pred.to_tensor()), constant(gt.to_tensor())).scalar();
}

double dsl(const GeneratorBundle& g, const ImageTile& x, const DepthTile& z) {
    return dsl(g, constant(x.to_tensor()), constant(z.to_tensor())).scalar();
}

double dccl(const GeneratorBundle& g_back, const ImageTile& x_translated, const DepthTile& z_src) {
    return dccl(g_back, constant(x_translated.to_tensor()), constant(z_src.to_tensor())).scalar();
}

double seg_cross_entropy(const Tensor& scores, const LabelTile& label) {
    if (scores.shape.h != label.h || scores.shape.w != label.w || scores.shape.n != 1)
        throw ShapeError("seg_cross_entropy: scores " + scores.shape.str() + " vs label " +
                         std::to_string(label.h) + "x" + std::to_string(label.w));
    return seg_cross_entropy(constant(scores), label.data).scalar();
}

LossReport total_loss(const LossComponents& c, const LossWeights& w) {
    w.validate();
    auto need = [](const std::optional<double>& v, const char* name) {
        if (!v) throw DataError(std::string("total_loss: missing component ") + name);
        return *v;
    };
    LossReport r;
    r.adv_st = need(c.adv_st, "adv_st");
    r.adv_ts = need(c.adv_ts, "adv_ts");
    r.cyc_st = need(c.cyc_st, "cyc_st");
    r.cyc_ts = need(c.cyc_ts, "cyc_ts");
    r.dsl_s = need(c.dsl_s, "dsl_s");
    r.dsl_t = need(c.dsl_t, "dsl_t");
    r.dccl_st = need(c.dccl_st, "dccl_st");
    r.dccl_ts = need(c.dccl_ts, "dccl_ts");
    r.total = r.recompute(w);
    return r;
}

}  // namespace drdg
