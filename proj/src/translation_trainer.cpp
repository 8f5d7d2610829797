#include "drdg/translation_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "drdg/config.hpp"

namespace drdg {

void TranslationConfig::validate() const {
    weights.validate();
    net.validate();
    if (steps < 0) throw ConfigError("translation: steps must be >= 0");
    if (batch_size < 1) throw ConfigError("translation: batch_size must be >= 1");
    if (critic_steps_per_gen_step < 1)
        throw ConfigError("translation: critic_steps_per_gen_step must be >= 1");
    if (lr_critic <= 0 || lr_generator <= 0) throw ConfigError("translation: learning rates must be > 0");
    if (gp_weight < 0) throw ConfigError("translation: gp_weight must be >= 0");
    if (lipschitz_mode != "gp" && lipschitz_mode != "clip")
        throw ConfigError("translation: lipschitz_mode must be 'gp' or 'clip'");
    if (berhu_max_scope != "batch" && berhu_max_scope != "image")
        throw ConfigError("translation: berhu_max_scope must be 'batch' or 'image'");
}

LoadedSet LoadedSet::from_manifest(const DatasetManifest& m, bool need_depth, bool need_label) {
    if (m.samples.empty()) throw DataError("manifest '" + m.domain.name + "/" + m.split + "' is empty");
    std::vector<size_t> order(m.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return m.samples[a].tile_id < m.samples[b].tile_id; });

    LoadedSet set;
    set.h = m.domain.tile_height;
    set.w = m.domain.tile_width;
    for (size_t i : order) {
        SampleTriple s = load_sample(m, i);
        if (need_depth && !s.depth)
            throw DataError("sample '" + s.tile_id + "' in '" + m.domain.name +
                            "' manifest is missing required depth");
        if (need_label && !s.label)
            throw DataError("sample '" + s.tile_id + "' in '" + m.domain.name +
                            "' manifest is missing required label");
        set.ids.push_back(s.tile_id);
        set.images.push_back(s.image.to_tensor());
        set.depths.push_back(s.depth ? s.depth->to_tensor() : Tensor());
        set.labels.push_back(s.label);
    }
    return set;
}

namespace {

Tensor stack_batch(const std::vector<Tensor>& pool, const std::vector<size_t>& idx) {
    const Shape one = pool[idx[0]].shape;
    Tensor out(Shape{static_cast<int>(idx.size()), one.c, one.h, one.w});
    const int64_t per = one.numel();
    for (size_t k = 0; k < idx.size(); ++k)
        std::copy_n(pool[idx[k]].v.data(), per, out.v.data() + k * per);
    return out;
}

std::vector<size_t> stream_indices(uint64_t seed, const std::string& tag, size_t n, int64_t cursor,
                                   int count) {
    // position p in the infinite shuffled stream: epoch p/n, slot p%n
    std::vector<size_t> out;
    int64_t p = cursor;
    int64_t epoch = -1;
    std::vector<size_t> perm;
    for (int k = 0; k < count; ++k, ++p) {
        const int64_t e = p / static_cast<int64_t>(n);
        if (e != epoch) {
            epoch = e;
            perm.resize(n);
            std::iota(perm.begin(), perm.end(), size_t{0});
            Rng rng = derive_rng(seed, tag, static_cast<uint64_t>(e));
            rng.shuffle(perm);
        }
        out.push_back(perm[p % static_cast<int64_t>(n)]);
    }
    return out;
}

void check_finite(double v, const char* term) {
    if (!std::isfinite(v))
        throw DivergenceError(std::string("non-finite loss in term '") + term + "'");
}

std::vector<Tensor> grads_of(const Var& loss, const std::vector<NamedParam>& params) {
    std::vector<Var> wrt;
    wrt.reserve(params.size());
    for (const auto& p : params) wrt.push_back(p.var);
    auto gs = grad(loss, wrt);
    std::vector<Tensor> out;
    out.reserve(gs.size());
    for (auto& g : gs) out.push_back(g.value());
    return out;
}

}  // namespace

TranslationTrainer::TranslationTrainer(TranslationConfig cfg, const DatasetManifest& source,
                                       const DatasetManifest& target)
    : cfg_(std::move(cfg)), source_domain_(source.domain), target_domain_(target.domain) {
    cfg_.validate();
    src_ = LoadedSet::from_manifest(source, /*need_depth=*/true, /*need_label=*/true);
    tgt_ = LoadedSet::from_manifest(target, /*need_depth=*/true, /*need_label=*/false);

    model_ = build_drdg(source_domain_, target_domain_, cfg_.seed, cfg_.net);

    AdamConfig gen_ac{cfg_.lr_generator, cfg_.adam_beta1, cfg_.adam_beta2, 1e-8};
    AdamConfig cri_ac{cfg_.lr_critic, cfg_.adam_beta1, cfg_.adam_beta2, 1e-8};
    std::vector<NamedParam> gen_params = model_.g_st.params();
    for (auto& p : model_.g_ts.params()) gen_params.push_back(p);
    gen_opt_ = Adam(std::move(gen_params), gen_ac);
    ds_opt_ = Adam(model_.d_s.params(), cri_ac);
    dt_opt_ = Adam(model_.d_t.params(), cri_ac);
}

TranslationTrainer TranslationTrainer::resume(const std::filesystem::path& checkpoint,
                                              const DatasetManifest& source,
                                              const DatasetManifest& target) {
    CheckpointData ck = read_checkpoint(checkpoint);
    if (ck.kind != "translation")
        throw DataError("resume: checkpoint kind '" + ck.kind + "' is not a translation checkpoint");
    TranslationConfig cfg = translation_config_from_json(ck.config);
    TranslationTrainer tr(cfg, source, target);

    auto load_params = [&](const std::vector<NamedParam>& params) {
        for (const auto& p : params) {
            auto it = ck.tensors.find(p.name);
            if (it == ck.tensors.end()) throw DataError("resume: checkpoint misses tensor " + p.name);
            if (it->second.shape != p.var.shape())
                throw DataError("resume: tensor shape mismatch for " + p.name);
            p.var.node()->value = it->second;
        }
    };
    load_params(tr.model_.g_st.params());
    load_params(tr.model_.g_ts.params());
    load_params(tr.model_.d_s.params());
    load_params(tr.model_.d_t.params());

    auto load_opt = [&](Adam& opt, const std::string& prefix) {
        std::map<std::string, Tensor> st;
        for (const auto& [name, t] : ck.tensors)
            if (name.rfind(prefix, 0) == 0) st[name.substr(prefix.size())] = t;
        opt.load_state(ck.extra.at("adam_t").at(prefix.substr(0, prefix.size() - 1)).get<int64_t>(), st);
    };
    load_opt(tr.gen_opt_, "adam_gen/");
    load_opt(tr.ds_opt_, "adam_ds/");
    load_opt(tr.dt_opt_, "adam_dt/");
    tr.step_ = ck.step;
    return tr;
}

CheckpointData TranslationTrainer::make_checkpoint() const {
    CheckpointData ck;
    ck.kind = "translation";
    ck.step = step_;
    ck.seed = cfg_.seed;
    ck.config = translation_config_to_json(cfg_);
    for (const auto& p : model_.g_st.params()) ck.tensors[p.name] = p.var.value();
    for (const auto& p : model_.g_ts.params()) ck.tensors[p.name] = p.var.value();
    for (const auto& p : model_.d_s.params()) ck.tensors[p.name] = p.var.value();
    for (const auto& p : model_.d_t.params()) ck.tensors[p.name] = p.var.value();
    for (const auto& [name, t] : gen_opt_.state_tensors()) ck.tensors["adam_gen/" + name] = t;
    for (const auto& [name, t] : ds_opt_.state_tensors()) ck.tensors["adam_ds/" + name] = t;
    for (const auto& [name, t] : dt_opt_.state_tensors()) ck.tensors["adam_dt/" + name] = t;
    ck.extra["adam_t"] = {{"adam_gen", gen_opt_.t()}, {"adam_ds", ds_opt_.t()}, {"adam_dt", dt_opt_.t()}};
    ck.extra["source_domain"] = source_domain_.name;
    ck.extra["target_domain"] = target_domain_.name;
    return ck;
}

TranslationTrainer::Batch TranslationTrainer::draw(const LoadedSet& set, int64_t cursor) const {
    const std::string tag = (&set == &src_) ? "stream_src" : "stream_tgt";
    auto idx = stream_indices(cfg_.seed, tag, set.images.size(), cursor, cfg_.batch_size);
    Batch b;
    b.images = stack_batch(set.images, idx);
    b.depths = stack_batch(set.depths, idx);
    return b;
}

Var TranslationTrainer::berhu_scoped(const Var& pred, const Var& gt) const {
    if (cfg_.berhu_max_scope == "batch" || pred.shape().n == 1) return berhu(pred, gt);
    // per-image max: mean of per-sample berhu values
    const int n = pred.shape().n;
    Var acc = constant_scalar(0.0);
    for (int i = 0; i < n; ++i) acc = add(acc, berhu(slice_n(pred, i, i + 1), slice_n(gt, i, i + 1)));
    return scale(acc, 1.0 / n);
}

double TranslationTrainer::critic_update(const Discriminator& d, Adam& opt, const Tensor& real,
                                         const Tensor& fake, Rng& gp_rng) {
    Var real_scores = d.forward(constant(real));
    Var fake_scores = d.forward(constant(fake));
    Var loss = critic_loss(real_scores, fake_scores);
    if (cfg_.lipschitz_mode == "gp" && cfg_.gp_weight > 0)
        loss = add(loss, scale(gradient_penalty(d, real, fake, gp_rng), cfg_.gp_weight));
    const double value = loss.scalar();
    check_finite(value, d.name().c_str());
    opt.step(grads_of(loss, opt.params()));
    if (cfg_.lipschitz_mode == "clip") opt.clip_params(cfg_.clip_value);
    return value;
}

LossReport TranslationTrainer::step_once() {
    const int per_cycle = cfg_.critic_steps_per_gen_step + 1;
    const int64_t base = step_ * per_cycle * cfg_.batch_size;

    // critic phase; generator outputs are detached so only critics update
    for (int k = 0; k < cfg_.critic_steps_per_gen_step; ++k) {
        const int64_t cursor = base + int64_t(k) * cfg_.batch_size;
        Batch sb = draw(src_, cursor);
        Batch tb = draw(tgt_, cursor);
        Tensor fake_t = model_.g_st.forward(constant(sb.images)).first.value();
        Tensor fake_s = model_.g_ts.forward(constant(tb.images)).first.value();
        Rng gp_t = derive_rng(cfg_.seed, "gp_t", static_cast<uint64_t>(step_), static_cast<uint64_t>(k));
        Rng gp_s = derive_rng(cfg_.seed, "gp_s", static_cast<uint64_t>(step_), static_cast<uint64_t>(k));
        critic_t_ = critic_update(model_.d_t, dt_opt_, tb.images, fake_t, gp_t);
        critic_s_ = critic_update(model_.d_s, ds_opt_, sb.images, fake_s, gp_s);
    }

    // generator phase
    const int64_t cursor = base + int64_t(cfg_.critic_steps_per_gen_step) * cfg_.batch_size;
    Batch sb = draw(src_, cursor);
    Batch tb = draw(tgt_, cursor);
    Var xs = constant(sb.images), xt = constant(tb.images);
    Var zs = constant(sb.depths), zt = constant(tb.depths);

    auto st = model_.g_st.forward_all(xs, cfg_.enable_dsl);
    auto st_back = model_.g_ts.forward_all(st.translated, cfg_.enable_dccl);
    auto ts = model_.g_ts.forward_all(xt, cfg_.enable_dsl);
    auto ts_back = model_.g_st.forward_all(ts.translated, cfg_.enable_dccl);

    Var adv_st = gen_adv_loss(model_.d_t.forward(st.translated));
    Var adv_ts = gen_adv_loss(model_.d_s.forward(ts.translated));
    Var cyc_st = cycle_loss(xs, st_back.translated);
    Var cyc_ts = cycle_loss(xt, ts_back.translated);

    Var total = scale(add(adv_st, adv_ts), cfg_.weights.lambda_adv);
    total = add(total, scale(add(cyc_st, cyc_ts), cfg_.weights.lambda_cyc));

    LossComponents comps;
    comps.adv_st = adv_st.scalar();
    comps.adv_ts = adv_ts.scalar();
    comps.cyc_st = cyc_st.scalar();
    comps.cyc_ts = cyc_ts.scalar();
    comps.dsl_s = comps.dsl_t = 0.0;
    comps.dccl_st = comps.dccl_ts = 0.0;

    if (cfg_.enable_dsl && cfg_.weights.lambda_dsl >= 0) {
        Var dsl_s = berhu_scoped(st.depth, zs);
        Var dsl_t = berhu_scoped(ts.depth, zt);
        comps.dsl_s = dsl_s.scalar();
        comps.dsl_t = dsl_t.scalar();
        total = add(total, scale(add(dsl_s, dsl_t), cfg_.weights.lambda_dsl));
    }
    if (cfg_.enable_dccl) {
        Var pred_s = resize_bilinear(st_back.depth, zs.shape().h, zs.shape().w);
        Var pred_t = resize_bilinear(ts_back.depth, zt.shape().h, zt.shape().w);
        Var dccl_st = berhu_scoped(pred_s, zs);
        Var dccl_ts = berhu_scoped(pred_t, zt);
        comps.dccl_st = dccl_st.scalar();
        comps.dccl_ts = dccl_ts.scalar();
        total = add(total, scale(add(dccl_st, dccl_ts), cfg_.weights.lambda_dccl));
    }

    LossWeights effective = cfg_.weights;
    if (!cfg_.enable_dsl) effective.lambda_dsl = 0.0;
    if (!cfg_.enable_dccl) effective.lambda_dccl = 0.0;
    LossReport report = total_loss(comps, effective);
    check_finite(report.adv_st, "adv_st");
    check_finite(report.adv_ts, "adv_ts");
    check_finite(report.cyc_st, "cyc_st");
    check_finite(report.cyc_ts, "cyc_ts");
    check_finite(report.dsl_s, "dsl_s");
    check_finite(report.dsl_t, "dsl_t");
    check_finite(report.dccl_st, "dccl_st");
    check_finite(report.dccl_ts, "dccl_ts");

    const double total_value = total.scalar();
    check_finite(total_value, "total");
    if (std::fabs(total_value - report.total) > 1e-6 * std::max(1.0, std::fabs(total_value)))
        throw Error("translation step: loss report does not recompose the optimized total");

    gen_opt_.step(grads_of(total, gen_opt_.params()));
    ++step_;
    return report;
}

std::filesystem::path TranslationTrainer::run(
    const std::filesystem::path& out_dir, const std::function<void(int64_t, const LossReport&)>& on_step) {
    std::filesystem::create_directories(out_dir);
    std::ofstream log(out_dir / "translation_log.jsonl", std::ios::app);
    std::filesystem::path final_path = out_dir / "translation_final.ckpt";
    while (step_ < cfg_.steps) {
        LossReport r = step_once();
        log << r.json_line(step_, critic_s_, critic_t_) << "\n";
        log.flush();
        if (on_step) on_step(step_, r);
        if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0 && step_ < cfg_.steps) {
            char name[64];
            std::snprintf(name, sizeof(name), "translation_step%06lld.ckpt",
                          static_cast<long long>(step_));
            write_checkpoint(out_dir / name, make_checkpoint());
        }
    }
    write_checkpoint(final_path, make_checkpoint());
    return final_path;
}

std::filesystem::path translate_dataset(const GeneratorBundle& g_st, const DatasetManifest& source,
                                        const DomainSpec& target_domain,
                                        const std::filesystem::path& out_dir) {
    DatasetManifest out;
    out.domain = source.domain;
    out.domain.name = source.domain.name + "->" + target_domain.name;
    out.domain.tile_height = target_domain.tile_height;
    out.domain.tile_width = target_domain.tile_width;
    out.domain.ground_resolution_cm = target_domain.ground_resolution_cm;
    out.class_colors = source.class_colors;
    out.split = source.split;
    out.seed = source.seed;
    out.scene_dims = source.scene_dims;

    std::filesystem::create_directories(out_dir);
    for (size_t i = 0; i < source.samples.size(); ++i) {
        SampleTriple s = load_sample(source, i);
        if (s.image.h != g_st.from_h() || s.image.w != g_st.from_w())
            throw ShapeError("translate_dataset: sample '" + s.tile_id + "' is " +
                             std::to_string(s.image.h) + "x" + std::to_string(s.image.w) +
                             " but the generator expects " + std::to_string(g_st.from_h()) + "x" +
                             std::to_string(g_st.from_w()));
        Var translated = g_st.forward(constant(s.image.to_tensor())).first;
        ImageTile timg = ImageTile::from_tensor(translated.value());

        SampleRef ref = source.samples[i];
        std::string stem = "tiles/" + s.tile_id;
        ref.image_path = stem + ".ppm";
        write_image_tile(out_dir / ref.image_path, timg);
        if (s.label) {
            LabelTile resized;
            resized.h = target_domain.tile_height;
            resized.w = target_domain.tile_width;
            resized.data = kernels::resize_nearest(s.label->data, s.label->h, s.label->w, resized.h,
                                                   resized.w);
            ref.label_path = stem + "_label.pgm";
            write_label_tile(out_dir / *ref.label_path, resized);
        } else {
            ref.label_path.reset();
        }
        if (s.depth) {
            ref.depth_path = stem + "_dsm.pfm";
            write_depth_tile(out_dir / *ref.depth_path, *s.depth);
        } else {
            ref.depth_path.reset();
        }
        out.samples.push_back(std::move(ref));
    }
    auto manifest_path = out_dir / (out.split + ".json");
    write_manifest(out, manifest_path);
    return manifest_path;
}

}  // namespace drdg
