#pragma once

#include <memory>
#include <string>
#include <vector>

#include "drdg/autodiff.hpp"
#include "drdg/data_model.hpp"

namespace drdg {

struct NamedParam {
    std::string name;
    Var var;
};

uint64_t params_checksum(const std::vector<NamedParam>& params);
int64_t params_count(const std::vector<NamedParam>& params);

// Architecture knobs. Defaults follow the published DRDG setup; desk-scale
// configs narrow the channel lists, which leaves every shape contract intact.
struct NetConfig {
    std::vector<int> encoder_channels = {64, 128, 256, 512, 512, 512, 512};
    std::vector<int> disc_channels = {64, 128, 256, 512, 512, 1};
    double lrelu_slope = 0.2;

    void validate() const;
};

// conv k4 s2 with ceil padding, bias
struct ConvLayer {
    Var w, b;
    int kernel = 4, stride = 2, dil = 1;

    Var forward(const Var& x) const;
    void reg(std::vector<NamedParam>& out, const std::string& prefix) const;
};

// transposed conv k4 s2 producing an exact requested output size
struct ConvTLayer {
    Var w, b;  // w: (in_ch, out_ch, k, k)
    int kernel = 4, stride = 2;

    Var forward(const Var& x, int out_h, int out_w) const;
    void reg(std::vector<NamedParam>& out, const std::string& prefix) const;
};

struct InstanceNorm {
    Var gamma, beta;

    Var forward(const Var& x) const;
    void reg(std::vector<NamedParam>& out, const std::string& prefix) const;
};

// Resize-residual generator with a shared encoder feeding an image-residual
// decoder and a depth decoder.
class GeneratorBundle {
  public:
    struct ForwardAll {
        Var translated;
        Var residual;
        Var depth;  // defined only when requested
    };

    GeneratorBundle() = default;
    GeneratorBundle(std::string name, int from_h, int from_w, int to_h, int to_w,
                    const NetConfig& cfg, uint64_t seed);

    // translated = clamp(resize(residual + x)), residual = tanh(image decoder)
    std::pair<Var, Var> forward(const Var& x) const;
    // depth head at the *input* geometry, sigmoid range [0,1]
    Var depth_forward(const Var& x) const;
    // one encoder pass feeding both decoders
    ForwardAll forward_all(const Var& x, bool want_depth) const;

    std::vector<NamedParam> params() const;
    std::vector<NamedParam> depth_decoder_params() const;
    std::vector<NamedParam> image_side_params() const;  // encoder + image decoder

    int from_h() const { return from_h_; }
    int from_w() const { return from_w_; }
    int to_h() const { return to_h_; }
    int to_w() const { return to_w_; }
    const std::string& name() const { return name_; }

    // test hook: with decoder weights zeroed the generator reduces to resize
    void zero_image_decoder();

  private:
    struct Decoder {
        std::vector<ConvTLayer> up;
        std::vector<InstanceNorm> up_norm;
        ConvTLayer out;
    };

    std::vector<Var> encode(const Var& x) const;
    Var decode(const Decoder& d, const std::vector<Var>& feats, int out_h, int out_w) const;
    void reg_decoder(const Decoder& d, const std::string& prefix, std::vector<NamedParam>& out) const;

    std::string name_;
    int from_h_ = 0, from_w_ = 0, to_h_ = 0, to_w_ = 0;
    double slope_ = 0.2;
    std::vector<ConvLayer> enc_;
    std::vector<InstanceNorm> enc_norm_;  // stages 1..L-1
    Decoder dec_img_, dec_dep_;
};

// Wasserstein critic: stride-2 conv stack, single-channel score map, no
// normalization layers (the gradient penalty differentiates through it).
class Discriminator {
  public:
    Discriminator() = default;
    Discriminator(std::string name, int in_h, int in_w, const NetConfig& cfg, uint64_t seed);

    Var forward(const Var& x) const;  // (n,3,H,W) -> (n,1,H/2^L,W/2^L)
    std::vector<NamedParam> params() const;
    const std::string& name() const { return name_; }
    int in_h() const { return in_h_; }
    int in_w() const { return in_w_; }

  private:
    std::string name_;
    int in_h_ = 0, in_w_ = 0;
    double slope_ = 0.2;
    std::vector<ConvLayer> layers_;
};

class SegmentationBackbone {
  public:
    virtual ~SegmentationBackbone() = default;
    virtual Var forward(const Var& images) = 0;  // (n,3,h,w) -> (n,C,h,w)
    virtual std::vector<NamedParam> params() const = 0;
    virtual const std::string& name() const = 0;
    virtual int class_count() const = 0;
};

// Known names: "compact" (default) and "deeplabv3_lite".
std::unique_ptr<SegmentationBackbone> make_backbone(const std::string& name, int classes, int width,
                                                    uint64_t seed);

struct DrdgModel {
    GeneratorBundle g_st, g_ts;
    Discriminator d_s, d_t;
};

// Both generator bundles carry depth decoders; D_T consumes target geometry,
// D_S source geometry. Weight initialization is deterministic in the seed.
DrdgModel build_drdg(const DomainSpec& source, const DomainSpec& target, uint64_t seed,
                     const NetConfig& cfg = {});

}  // namespace drdg
