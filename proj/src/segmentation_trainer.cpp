#include "drdg/segmentation_trainer.hpp"

#include <algorithm>
#include <numeric>

#include "drdg/checkpoint.hpp"
#include "drdg/losses.hpp"
#include "drdg/optim.hpp"

namespace drdg {

namespace {

void flip_image(Tensor& img, bool hflip, bool vflip) {
    const Shape s = img.shape;
    if (!hflip && !vflip) return;
    Tensor out(s);
    for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x)
                out.at(0, c, y, x) = img.at(0, c, vflip ? s.h - 1 - y : y, hflip ? s.w - 1 - x : x);
    img = std::move(out);
}

void flip_label(std::vector<int>& lab, int h, int w, bool hflip, bool vflip) {
    if (!hflip && !vflip) return;
    std::vector<int> out(lab.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(y) * w + x] =
                lab[static_cast<size_t>(vflip ? h - 1 - y : y) * w + (hflip ? w - 1 - x : x)];
    lab = std::move(out);
}

SegModel train_core(const SegTrainConfig& cfg, const SegDataset& data,
                    const std::function<void(int, double)>& on_epoch) {
    cfg.validate();
    if (data.images.empty()) throw DataError("train_segmentation: empty dataset");

    // canonical order, so training is invariant to storage order
    std::vector<size_t> order(data.images.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return data.ids[a] < data.ids[b]; });

    SegModel model;
    model.cfg = cfg;
    model.class_count = data.class_count;
    model.net = make_backbone(cfg.backbone, data.class_count, cfg.width, cfg.seed);
    Adam opt(model.net->params(), AdamConfig{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8});

    const size_t n = order.size();
    const Shape one = data.images[0].shape;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> perm = order;
        Rng rng = derive_rng(cfg.seed, "seg_epoch", static_cast<uint64_t>(epoch));
        rng.shuffle(perm);

        double epoch_loss = 0;
        int batches = 0;
        for (size_t start = 0; start < n; start += cfg.batch_size) {
            const size_t bn = std::min(n - start, static_cast<size_t>(cfg.batch_size));
            Tensor images(Shape{static_cast<int>(bn), 3, one.h, one.w});
            std::vector<int> labels(bn * one.h * one.w);
            for (size_t k = 0; k < bn; ++k) {
                const size_t idx = perm[start + k];
                Tensor img = data.images[idx];
                std::vector<int> lab = data.labels[idx].data;
                if (cfg.augment_flips) {
                    Rng arng = derive_rng(cfg.seed, "seg_aug", static_cast<uint64_t>(epoch),
                                          static_cast<uint64_t>(start + k));
                    const bool hf = arng.uniform() < 0.5, vf = arng.uniform() < 0.5;
                    flip_image(img, hf, vf);
                    flip_label(lab, one.h, one.w, hf, vf);
                }
                std::copy_n(img.v.data(), img.numel(), images.v.data() + k * img.numel());
                std::copy_n(lab.data(), lab.size(), labels.data() + k * lab.size());
            }
            Var scores = model.net->forward(constant(images));
            Var loss = seg_cross_entropy(scores, labels);
            const double lv = loss.scalar();
            if (!std::isfinite(lv)) throw DivergenceError("segmentation loss diverged");
            epoch_loss += lv;
            ++batches;

            std::vector<Var> wrt;
            auto params = opt.params();
            for (const auto& p : params) wrt.push_back(p.var);
            auto gs = grad(loss, wrt);
            std::vector<Tensor> gt;
            gt.reserve(gs.size());
            for (auto& g : gs) gt.push_back(g.value());
            opt.step(gt);
        }
        if (on_epoch) on_epoch(epoch, epoch_loss / std::max(1, batches));
    }
    return model;
}

}  // namespace

SegModel train_segmentation(const SegTrainConfig& cfg, const SegDataset& data,
                            const std::function<void(int, double)>& on_epoch) {
    return train_core(cfg, data, on_epoch);
}

SegModel train_segmentation(const SegTrainConfig& cfg, const DatasetManifest& m,
                            const std::function<void(int, double)>& on_epoch) {
    SegDataset data;
    data.class_count = m.domain.class_count;
    for (size_t i = 0; i < m.samples.size(); ++i) {
        SampleTriple s = load_sample(m, i);
        if (!s.label)
            throw DataError("train_segmentation: unlabeled sample '" + s.tile_id + "' encountered");
        data.ids.push_back(s.tile_id);
        data.images.push_back(s.image.to_tensor());
        data.labels.push_back(*s.label);
    }
    return train_core(cfg, data, on_epoch);
}

LabelTile predict(SegmentationBackbone& model, const ImageTile& tile) {
    Var scores = model.forward(constant(tile.to_tensor()));
    const Shape s = scores.shape();
    LabelTile out;
    out.h = s.h;
    out.w = s.w;
    out.data.resize(static_cast<size_t>(s.h) * s.w);
    const int64_t plane = int64_t(s.h) * s.w;
    for (int64_t p = 0; p < plane; ++p) {
        int best = 0;
        double bv = scores.value().v[p];
        for (int c = 1; c < s.c; ++c) {
            const double v = scores.value().v[c * plane + p];
            if (v > bv) {  // strict: ties keep the lower class index
                bv = v;
                best = c;
            }
        }
        out.data[p] = best;
    }
    return out;
}

std::vector<LabelTile> predict(SegmentationBackbone& model, const std::vector<ImageTile>& tiles) {
    std::vector<LabelTile> out;
    out.reserve(tiles.size());
    for (const auto& t : tiles) out.push_back(predict(model, t));
    return out;
}

SegModel source_only_baseline(const SegTrainConfig& cfg, const DatasetManifest& source, int target_h,
                              int target_w, const std::function<void(int, double)>& on_epoch) {
    SegDataset data;
    data.class_count = source.domain.class_count;
    for (size_t i = 0; i < source.samples.size(); ++i) {
        SampleTriple s = load_sample(source, i);
        if (!s.label)
            throw DataError("source_only_baseline: unlabeled sample '" + s.tile_id + "' encountered");
        data.ids.push_back(s.tile_id);
        data.images.push_back(kernels::resize_bilinear(s.image.to_tensor(), target_h, target_w));
        LabelTile lab;
        lab.h = target_h;
        lab.w = target_w;
        lab.data = kernels::resize_nearest(s.label->data, s.label->h, s.label->w, target_h, target_w);
        data.labels.push_back(std::move(lab));
    }
    return train_core(cfg, data, on_epoch);
}

void save_seg_model(const SegModel& model, const std::filesystem::path& path) {
    CheckpointData ck;
    ck.kind = "segmentation";
    ck.step = model.cfg.epochs;
    ck.seed = model.cfg.seed;
    ck.config = seg_config_to_json(model.cfg);
    ck.extra["class_count"] = model.class_count;
    for (const auto& p : model.net->params()) ck.tensors[p.name] = p.var.value();
    write_checkpoint(path, ck);
}

SegModel load_seg_model(const std::filesystem::path& path) {
    CheckpointData ck = read_checkpoint(path);
    if (ck.kind != "segmentation")
        throw DataError("load_seg_model: checkpoint kind '" + ck.kind + "' is not a segmentation model");
    SegModel model;
    model.cfg = seg_config_from_json(ck.config);
    model.class_count = ck.extra.at("class_count").get<int>();
    model.net = make_backbone(model.cfg.backbone, model.class_count, model.cfg.width, model.cfg.seed);
    for (const auto& p : model.net->params()) {
        auto it = ck.tensors.find(p.name);
        if (it == ck.tensors.end()) throw DataError("load_seg_model: missing tensor " + p.name);
        if (it->second.shape != p.var.shape())
            throw DataError("load_seg_model: tensor shape mismatch for " + p.name);
        p.var.node()->value = it->second;
    }
    return model;
}

}  // namespace drdg
