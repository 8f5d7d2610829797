#include "drdg/networks.hpp"

#include <cmath>

namespace drdg {

uint64_t params_checksum(const std::vector<NamedParam>& params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params) {
        h = hash_str(p.name, h);
        h = fnv1a64(p.var.value().v.data(), p.var.value().v.size() * sizeof(double), h);
    }
    return h;
}

int64_t params_count(const std::vector<NamedParam>& params) {
    int64_t n = 0;
    for (const auto& p : params) n += p.var.value().numel();
    return n;
}

void NetConfig::validate() const {
    if (encoder_channels.size() < 2) throw ConfigError("NetConfig: encoder needs at least 2 stages");
    for (int c : encoder_channels)
        if (c <= 0) throw ConfigError("NetConfig: encoder channels must be positive");
    if (disc_channels.size() < 2 || disc_channels.back() != 1)
        throw ConfigError("NetConfig: discriminator channel list must end with 1");
    for (int c : disc_channels)
        if (c <= 0) throw ConfigError("NetConfig: discriminator channels must be positive");
}

namespace {

Var init_conv_param(int oc, int ic, int k, uint64_t seed, const std::string& name) {
    Tensor t(Shape{oc, ic, k, k});
    Rng rng = derive_rng(seed, "init/" + name);
    for (auto& v : t.v) v = 0.02 * rng.normal();
    return parameter(t);
}

Var init_zeros(Shape s) { return parameter(Tensor::zeros(s)); }

}  // namespace

Var ConvLayer::forward(const Var& x) const {
    auto geom = kernels::ceil_pad_geom(x.shape().h, x.shape().w, kernel, kernel, stride, dil);
    Var y = conv2d(x, w, geom);
    return add(y, b);
}

void ConvLayer::reg(std::vector<NamedParam>& out, const std::string& prefix) const {
    out.push_back({prefix + "/w", w});
    out.push_back({prefix + "/b", b});
}

Var ConvTLayer::forward(const Var& x, int out_h, int out_w) const {
    // pads of the forward conv that would map (out_h,out_w) -> x's size
    auto geom = kernels::ceil_pad_geom(out_h, out_w, kernel, kernel, stride);
    const int oh = kernels::conv_out_dim(out_h, kernel, stride, 1, geom.pt, geom.pb);
    const int ow = kernels::conv_out_dim(out_w, kernel, stride, 1, geom.pl, geom.pr);
    if (oh != x.shape().h || ow != x.shape().w)
        throw ShapeError("ConvTLayer: cannot map " + x.shape().str() + " to " + std::to_string(out_h) +
                         "x" + std::to_string(out_w));
    Var y = conv2d_transpose(x, w, geom, out_h, out_w);
    return add(y, b);
}

void ConvTLayer::reg(std::vector<NamedParam>& out, const std::string& prefix) const {
    out.push_back({prefix + "/w", w});
    out.push_back({prefix + "/b", b});
}

Var InstanceNorm::forward(const Var& x) const {
    const Shape s = x.shape();
    const Shape stat{s.n, s.c, 1, 1};
    const double inv_hw = 1.0 / (static_cast<double>(s.h) * s.w);
    Var mu = scale(sum_to(x, stat), inv_hw);
    Var xc = sub(x, mu);
    Var var = scale(sum_to(mul(xc, xc), stat), inv_hw);
    Var inv = pow_const(add_scalar(var, 1e-5), -0.5);
    return add(mul(mul(xc, inv), gamma), beta);
}

void InstanceNorm::reg(std::vector<NamedParam>& out, const std::string& prefix) const {
    out.push_back({prefix + "/gamma", gamma});
    out.push_back({prefix + "/beta", beta});
}

GeneratorBundle::GeneratorBundle(std::string name, int from_h, int from_w, int to_h, int to_w,
                                 const NetConfig& cfg, uint64_t seed)
    : name_(std::move(name)), from_h_(from_h), from_w_(from_w), to_h_(to_h), to_w_(to_w),
      slope_(cfg.lrelu_slope) {
    cfg.validate();
    const auto& ch = cfg.encoder_channels;
    const int L = static_cast<int>(ch.size());
    int in_ch = 3;
    for (int i = 0; i < L; ++i) {
        ConvLayer c;
        c.w = init_conv_param(ch[i], in_ch, 4, seed, name_ + "/enc" + std::to_string(i) + "/w");
        c.b = init_zeros(Shape{1, ch[i], 1, 1});
        enc_.push_back(c);
        if (i > 0) {
            InstanceNorm n;
            n.gamma = parameter(Tensor::full(Shape{1, ch[i], 1, 1}, 1.0));
            n.beta = init_zeros(Shape{1, ch[i], 1, 1});
            enc_norm_.push_back(n);
        }
        in_ch = ch[i];
    }

    auto build_decoder = [&](int out_channels, const std::string& dname) {
        Decoder d;
        for (int i = L - 2; i >= 0; --i) {
            const int dec_in = (i == L - 2) ? ch[L - 1] : 2 * ch[i + 1];
            ConvTLayer t;
            t.w = init_conv_param(dec_in, ch[i], 4, seed,
                                  name_ + "/" + dname + "/up" + std::to_string(i) + "/w");
            t.b = init_zeros(Shape{1, ch[i], 1, 1});
            d.up.push_back(t);
            InstanceNorm n;
            n.gamma = parameter(Tensor::full(Shape{1, ch[i], 1, 1}, 1.0));
            n.beta = init_zeros(Shape{1, ch[i], 1, 1});
            d.up_norm.push_back(n);
        }
        d.out.w = init_conv_param(2 * ch[0], out_channels, 4, seed, name_ + "/" + dname + "/out/w");
        d.out.b = init_zeros(Shape{1, out_channels, 1, 1});
        return d;
    };
    dec_img_ = build_decoder(3, "dec_img");
    dec_dep_ = build_decoder(1, "dec_dep");
}

std::vector<Var> GeneratorBundle::encode(const Var& x) const {
    if (x.shape().c != 3 || x.shape().h != from_h_ || x.shape().w != from_w_)
        throw ShapeError(name_ + ": input " + x.shape().str() + " does not match source geometry " +
                         std::to_string(from_h_) + "x" + std::to_string(from_w_));
    std::vector<Var> feats;
    Var h = x;
    for (size_t i = 0; i < enc_.size(); ++i) {
        h = enc_[i].forward(h);
        if (i > 0) h = enc_norm_[i - 1].forward(h);
        h = leaky_relu(h, slope_);
        feats.push_back(h);
    }
    return feats;
}

Var GeneratorBundle::decode(const Decoder& d, const std::vector<Var>& feats, int out_h, int out_w) const {
    const int L = static_cast<int>(feats.size());
    Var h = feats[L - 1];
    for (int k = 0; k < L - 1; ++k) {
        const int i = L - 2 - k;  // mirror stage
        const Shape target = feats[i].shape();
        h = d.up[k].forward(h, target.h, target.w);
        h = d.up_norm[k].forward(h);
        h = relu(h);
        h = concat_c(h, feats[i]);
    }
    return d.out.forward(h, out_h, out_w);
}

std::pair<Var, Var> GeneratorBundle::forward(const Var& x) const {
    auto feats = encode(x);
    Var residual = tanh_(decode(dec_img_, feats, from_h_, from_w_));
    Var translated = clamp(resize_bilinear(add(residual, x), to_h_, to_w_), -1.0, 1.0);
    return {translated, residual};
}

Var GeneratorBundle::depth_forward(const Var& x) const {
    auto feats = encode(x);
    return sigmoid_(decode(dec_dep_, feats, from_h_, from_w_));
}

GeneratorBundle::ForwardAll GeneratorBundle::forward_all(const Var& x, bool want_depth) const {
    auto feats = encode(x);
    ForwardAll r;
    r.residual = tanh_(decode(dec_img_, feats, from_h_, from_w_));
    r.translated = clamp(resize_bilinear(add(r.residual, x), to_h_, to_w_), -1.0, 1.0);
    if (want_depth) r.depth = sigmoid_(decode(dec_dep_, feats, from_h_, from_w_));
    return r;
}

void GeneratorBundle::reg_decoder(const Decoder& d, const std::string& prefix,
                                  std::vector<NamedParam>& out) const {
    for (size_t k = 0; k < d.up.size(); ++k) {
        d.up[k].reg(out, prefix + "/up" + std::to_string(d.up.size() - 1 - k));
        d.up_norm[k].reg(out, prefix + "/upnorm" + std::to_string(d.up.size() - 1 - k));
    }
    d.out.reg(out, prefix + "/out");
}

std::vector<NamedParam> GeneratorBundle::params() const {
    std::vector<NamedParam> out = image_side_params();
    reg_decoder(dec_dep_, name_ + "/dec_dep", out);
    return out;
}

std::vector<NamedParam> GeneratorBundle::depth_decoder_params() const {
    std::vector<NamedParam> out;
    reg_decoder(dec_dep_, name_ + "/dec_dep", out);
    return out;
}

std::vector<NamedParam> GeneratorBundle::image_side_params() const {
    std::vector<NamedParam> out;
    for (size_t i = 0; i < enc_.size(); ++i) enc_[i].reg(out, name_ + "/enc" + std::to_string(i));
    for (size_t i = 0; i < enc_norm_.size(); ++i)
        enc_norm_[i].reg(out, name_ + "/encnorm" + std::to_string(i + 1));
    reg_decoder(dec_img_, name_ + "/dec_img", out);
    return out;
}

void GeneratorBundle::zero_image_decoder() {
    auto zero = [](Var& v) {
        Tensor& t = v.mutable_value();
        std::fill(t.v.begin(), t.v.end(), 0.0);
    };
    for (auto& u : dec_img_.up) {
        zero(u.w);
        zero(u.b);
    }
    for (auto& n : dec_img_.up_norm) {
        zero(n.beta);  // gamma irrelevant once inputs are zero
    }
    zero(dec_img_.out.w);
    zero(dec_img_.out.b);
}

Discriminator::Discriminator(std::string name, int in_h, int in_w, const NetConfig& cfg, uint64_t seed)
    : name_(std::move(name)), in_h_(in_h), in_w_(in_w), slope_(cfg.lrelu_slope) {
    cfg.validate();
    int in_ch = 3;
    for (size_t i = 0; i < cfg.disc_channels.size(); ++i) {
        ConvLayer c;
        c.w = init_conv_param(cfg.disc_channels[i], in_ch, 4, seed,
                              name_ + "/conv" + std::to_string(i) + "/w");
        c.b = init_zeros(Shape{1, cfg.disc_channels[i], 1, 1});
        layers_.push_back(c);
        in_ch = cfg.disc_channels[i];
    }
}

Var Discriminator::forward(const Var& x) const {
    if (x.shape().c != 3 || x.shape().h != in_h_ || x.shape().w != in_w_)
        throw ShapeError(name_ + ": input " + x.shape().str() + " does not match critic geometry " +
                         std::to_string(in_h_) + "x" + std::to_string(in_w_));
    Var h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].forward(h);
        if (i + 1 < layers_.size()) h = leaky_relu(h, slope_);
    }
    return h;
}

std::vector<NamedParam> Discriminator::params() const {
    std::vector<NamedParam> out;
    for (size_t i = 0; i < layers_.size(); ++i) layers_[i].reg(out, name_ + "/conv" + std::to_string(i));
    return out;
}

namespace {

// Small encoder-decoder with skip connections; output dims equal input dims.
class CompactBackbone : public SegmentationBackbone {
  public:
    CompactBackbone(int classes, int width, uint64_t seed) : classes_(classes), name_("compact") {
        const int w1 = width, w2 = 2 * width, w3 = 4 * width;
        auto conv = [&](int oc, int ic, int k, int stride, const std::string& n) {
            ConvLayer c;
            c.w = init_conv_param(oc, ic, k, seed, "seg/" + n + "/w");
            c.b = init_zeros(Shape{1, oc, 1, 1});
            c.kernel = k;
            c.stride = stride;
            return c;
        };
        in_ = conv(w1, 3, 3, 1, "in");
        down1_ = conv(w2, w1, 4, 2, "down1");
        down2_ = conv(w3, w2, 4, 2, "down2");
        auto convt = [&](int ic, int oc, const std::string& n) {
            ConvTLayer t;
            t.w = init_conv_param(ic, oc, 4, seed, "seg/" + n + "/w");
            t.b = init_zeros(Shape{1, oc, 1, 1});
            return t;
        };
        up1_ = convt(w3, w2, "up1");
        up2_ = convt(2 * w2, w1, "up2");
        out_ = conv(classes, 2 * w1, 3, 1, "out");
        auto norm = [&](int c) {
            InstanceNorm n;
            n.gamma = parameter(Tensor::full(Shape{1, c, 1, 1}, 1.0));
            n.beta = init_zeros(Shape{1, c, 1, 1});
            return n;
        };
        n1_ = norm(w2);
        n2_ = norm(w3);
        n3_ = norm(w2);
        n4_ = norm(w1);
    }

    Var forward(const Var& x) override {
        Var e0 = relu(in_.forward(x));
        Var e1 = relu(n1_.forward(down1_.forward(e0)));
        Var e2 = relu(n2_.forward(down2_.forward(e1)));
        Var d1 = relu(n3_.forward(up1_.forward(e2, e1.shape().h, e1.shape().w)));
        d1 = concat_c(d1, e1);
        Var d2 = relu(n4_.forward(up2_.forward(d1, e0.shape().h, e0.shape().w)));
        d2 = concat_c(d2, e0);
        return out_.forward(d2);
    }

    std::vector<NamedParam> params() const override {
        std::vector<NamedParam> out;
        in_.reg(out, "seg/in");
        down1_.reg(out, "seg/down1");
        down2_.reg(out, "seg/down2");
        up1_.reg(out, "seg/up1");
        up2_.reg(out, "seg/up2");
        out_.reg(out, "seg/out");
        n1_.reg(out, "seg/n1");
        n2_.reg(out, "seg/n2");
        n3_.reg(out, "seg/n3");
        n4_.reg(out, "seg/n4");
        return out;
    }

    const std::string& name() const override { return name_; }
    int class_count() const override { return classes_; }

  private:
    int classes_;
    std::string name_;
    ConvLayer in_, down1_, down2_, out_;
    ConvTLayer up1_, up2_;
    InstanceNorm n1_, n2_, n3_, n4_;
};

// Dilated-pyramid head over a stride-8 encoder, bilinearly upsampled back.
class DeeplabLiteBackbone : public SegmentationBackbone {
  public:
    DeeplabLiteBackbone(int classes, int width, uint64_t seed)
        : classes_(classes), name_("deeplabv3_lite") {
        const int w1 = width, w2 = 2 * width, w3 = 4 * width;
        auto conv = [&](int oc, int ic, int k, int stride, int dil, const std::string& n) {
            ConvLayer c;
            c.w = init_conv_param(oc, ic, k, seed, "seg/" + n + "/w");
            c.b = init_zeros(Shape{1, oc, 1, 1});
            c.kernel = k;
            c.stride = stride;
            c.dil = dil;
            return c;
        };
        stem_ = conv(w1, 3, 3, 1, 1, "stem");
        down1_ = conv(w2, w1, 4, 2, 1, "down1");
        down2_ = conv(w3, w2, 4, 2, 1, "down2");
        down3_ = conv(w3, w3, 4, 2, 1, "down3");
        aspp1_ = conv(w1, w3, 1, 1, 1, "aspp1");
        aspp2_ = conv(w1, w3, 3, 1, 2, "aspp2");
        aspp3_ = conv(w1, w3, 3, 1, 4, "aspp3");
        proj_ = conv(w2, 3 * w1, 1, 1, 1, "proj");
        head_ = conv(classes, w2, 1, 1, 1, "head");
        auto norm = [&](int c) {
            InstanceNorm n;
            n.gamma = parameter(Tensor::full(Shape{1, c, 1, 1}, 1.0));
            n.beta = init_zeros(Shape{1, c, 1, 1});
            return n;
        };
        n1_ = norm(w2);
        n2_ = norm(w3);
        n3_ = norm(w3);
    }

    Var forward(const Var& x) override {
        Var h = relu(stem_.forward(x));
        h = relu(n1_.forward(down1_.forward(h)));
        h = relu(n2_.forward(down2_.forward(h)));
        h = relu(n3_.forward(down3_.forward(h)));
        Var a = relu(aspp1_.forward(h));
        Var b = relu(aspp2_.forward(h));
        Var c = relu(aspp3_.forward(h));
        Var m = relu(proj_.forward(concat_c(concat_c(a, b), c)));
        Var scores = head_.forward(m);
        return resize_bilinear(scores, x.shape().h, x.shape().w);
    }

    std::vector<NamedParam> params() const override {
        std::vector<NamedParam> out;
        stem_.reg(out, "seg/stem");
        down1_.reg(out, "seg/down1");
        down2_.reg(out, "seg/down2");
        down3_.reg(out, "seg/down3");
        aspp1_.reg(out, "seg/aspp1");
        aspp2_.reg(out, "seg/aspp2");
        aspp3_.reg(out, "seg/aspp3");
        proj_.reg(out, "seg/proj");
        head_.reg(out, "seg/head");
        n1_.reg(out, "seg/n1");
        n2_.reg(out, "seg/n2");
        n3_.reg(out, "seg/n3");
        return out;
    }

    const std::string& name() const override { return name_; }
    int class_count() const override { return classes_; }

  private:
    int classes_;
    std::string name_;
    ConvLayer stem_, down1_, down2_, down3_, aspp1_, aspp2_, aspp3_, proj_, head_;
    InstanceNorm n1_, n2_, n3_;
};

}  // namespace

std::unique_ptr<SegmentationBackbone> make_backbone(const std::string& name, int classes, int width,
                                                    uint64_t seed) {
    if (classes < 2) throw ConfigError("make_backbone: class count must be >= 2");
    if (width <= 0) throw ConfigError("make_backbone: width must be positive");
    if (name == "compact") return std::make_unique<CompactBackbone>(classes, width, seed);
    if (name == "deeplabv3_lite") return std::make_unique<DeeplabLiteBackbone>(classes, width, seed);
    throw ConfigError("make_backbone: unknown backbone '" + name + "'");
}

DrdgModel build_drdg(const DomainSpec& source, const DomainSpec& target, uint64_t seed,
                     const NetConfig& cfg) {
    source.validate();
    target.validate();
    DrdgModel m;
    m.g_st = GeneratorBundle("gen_s2t", source.tile_height, source.tile_width, target.tile_height,
                             target.tile_width, cfg, seed);
    m.g_ts = GeneratorBundle("gen_t2s", target.tile_height, target.tile_width, source.tile_height,
                             source.tile_width, cfg, seed);
    m.d_s = Discriminator("disc_s", source.tile_height, source.tile_width, cfg, seed);
    m.d_t = Discriminator("disc_t", target.tile_height, target.tile_width, cfg, seed);
    return m;
}

}  // namespace drdg
