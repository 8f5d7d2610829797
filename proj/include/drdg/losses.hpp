#pragma once

#include <optional>
#include <string>

#include "drdg/autodiff.hpp"
#include "drdg/data_model.hpp"
#include "drdg/networks.hpp"

namespace drdg {

struct LossWeights {
    double lambda_adv = 5.0;
    double lambda_cyc = 10.0;
    double lambda_dsl = 2.0;
    double lambda_dccl = 1.0;

    void validate() const;
};

struct LossComponents {
    std::optional<double> adv_st, adv_ts;
    std::optional<double> cyc_st, cyc_ts;
    std::optional<double> dsl_s, dsl_t;
    std::optional<double> dccl_st, dccl_ts;
};

struct LossReport {
    double adv_st = 0, adv_ts = 0;
    double cyc_st = 0, cyc_ts = 0;
    double dsl_s = 0, dsl_t = 0;
    double dccl_st = 0, dccl_ts = 0;
    double total = 0;

    // weighted sum of the components; must reproduce `total`
    double recompute(const LossWeights& w) const;
    std::string json_line(int64_t step, double critic_s, double critic_t) const;
};

// ---- differentiable (Var) forms ----

// Wasserstein critic objective, penalty excluded: mean(fake) - mean(real)
Var critic_loss(const Var& real_scores, const Var& fake_scores);
// generator side: -mean(fake)
Var gen_adv_loss(const Var& fake_scores);

Var cycle_loss(const Var& x, const Var& x_rec);

// reverse Huber with threshold L = 0.2 * max|pred - gt| over the whole call
Var berhu(const Var& pred, const Var& gt);

Var dsl(const GeneratorBundle& g, const Var& x, const Var& z);

// predict depth from the translated image, resize the prediction back to the
// ground truth's geometry, then Berhu against the original DSM
Var dccl(const GeneratorBundle& g_back, const Var& x_translated, const Var& z_src);

// per-pixel softmax + NLL averaged over pixels and batch; labels are [n][h*w]
Var seg_cross_entropy(const Var& scores, const std::vector<int>& labels);

// WGAN-GP penalty on interpolated samples; exact second-order gradients
Var gradient_penalty(const Discriminator& d, const Tensor& real, const Tensor& fake, Rng& rng);

// ---- scalar / tile conveniences ----

double critic_loss(const Tensor& real_scores, const Tensor& fake_scores);
double gen_adv_loss(const Tensor& fake_scores);
double cycle_loss(const ImageTile& x, const ImageTile& x_rec);
double berhu(const DepthTile& pred, const DepthTile& gt);
double dsl(const GeneratorBundle& g, const ImageTile& x, const DepthTile& z);
double dccl(const GeneratorBundle& g_back, const ImageTile& x_translated, const DepthTile& z_src);
double seg_cross_entropy(const Tensor& scores, const LabelTile& label);

LossReport total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace drdg
