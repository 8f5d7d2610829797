#include "drdg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include "drdg/translation_trainer.hpp"

namespace drdg {

using nlohmann::json;

std::string cell_slug(const std::string& cell_name) {
    if (cell_name == "DRDG") return "drdg";
    if (cell_name == "w/o DSL") return "wo_dsl";
    if (cell_name == "w/o DCCL") return "wo_dccl";
    if (cell_name == "RDG") return "rdg";
    throw ConfigError("unknown cell '" + cell_name + "'");
}

std::array<double, 3> channel_means(const std::vector<Tensor>& images) {
    std::array<double, 3> sum{0, 0, 0};
    int64_t count = 0;
    for (const auto& t : images) {
        const int64_t plane = int64_t(t.shape.h) * t.shape.w;
        for (int n = 0; n < t.shape.n; ++n)
            for (int c = 0; c < 3; ++c) {
                const double* p = t.v.data() + (int64_t(n) * t.shape.c + c) * plane;
                for (int64_t i = 0; i < plane; ++i) sum[c] += p[i];
            }
        count += int64_t(t.shape.n) * plane;
    }
    if (count == 0) throw DataError("channel_means: no pixels");
    return {sum[0] / count, sum[1] / count, sum[2] / count};
}

double color_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double s = 0;
    for (int c = 0; c < 3; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return std::sqrt(s);
}

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

struct FileRegistry {
    std::filesystem::path root;
    std::vector<std::string> files;

    void add(const std::filesystem::path& p) {
        files.push_back(std::filesystem::relative(p, root).generic_string());
    }
    void add_manifest_files(const DatasetManifest& m, const std::filesystem::path& manifest_path) {
        add(manifest_path);
        const auto base = manifest_path.parent_path();
        for (const auto& s : m.samples) {
            add(base / s.image_path);
            if (s.label_path) add(base / *s.label_path);
            if (s.depth_path) add(base / *s.depth_path);
        }
    }
};

std::vector<Tensor> manifest_images(const DatasetManifest& m) {
    std::vector<Tensor> out;
    for (size_t i = 0; i < m.samples.size(); ++i)
        out.push_back(read_image_tile(m.base_dir / m.samples[i].image_path).to_tensor());
    return out;
}

// translated channel means with the current generator, without writing tiles
std::array<double, 3> translated_means(const GeneratorBundle& g, const DatasetManifest& source) {
    std::vector<Tensor> outs;
    for (size_t i = 0; i < source.samples.size(); ++i) {
        Tensor img = read_image_tile(source.base_dir / source.samples[i].image_path).to_tensor();
        outs.push_back(g.forward(constant(img)).first.value());
    }
    return channel_means(outs);
}

void write_predictions(SegmentationBackbone& net, const DatasetManifest& test,
                       const std::filesystem::path& pred_dir, FileRegistry& reg) {
    std::filesystem::create_directories(pred_dir);
    for (size_t i = 0; i < test.samples.size(); ++i) {
        SampleTriple s = load_sample(test, i);
        LabelTile pred = predict(net, s.image);
        auto p = pred_dir / (s.tile_id + ".pgm");
        write_label_tile(p, pred);
        reg.add(p);
    }
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_root) {
    cfg.validate();
    Stopwatch total_watch;

    const json resolved = pipeline_config_to_json(cfg);
    const std::string dump = resolved.dump(2);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(dump.data(), dump.size())));
    PipelineResult result;
    result.run_dir = out_root / std::string(hex).substr(0, 12);
    std::filesystem::create_directories(result.run_dir);

    FileRegistry reg{result.run_dir, {}};
    {
        std::ofstream out(result.run_dir / "config.json");
        out << dump << "\n";
        reg.add(result.run_dir / "config.json");
    }

    // ---- data ----
    std::filesystem::path src_train_path, tgt_train_path, tgt_test_path;
    if (cfg.synth) {
        for (bool target : {false, true}) {
            const std::string dname = target ? "target" : "source";
            auto scene_dir = result.run_dir / "data" / "scenes" / dname;
            SynthOutput synth = generate_synthetic_domain(*cfg.synth, target, cfg.synth_scenes, scene_dir);
            for (const auto& s : synth.scenes) {
                reg.add(s.rgb_path);
                reg.add(s.dsm_path);
                if (s.label_path) reg.add(*s.label_path);
            }
            auto index_path = scene_dir / "scenes.json";
            write_scene_index(synth.scenes, synth.domain, synth.class_colors, index_path);
            reg.add(index_path);

            IngestOptions opt;
            opt.seed = cfg.synth->seed;
            opt.strip_labels_from_train = target;
            auto manifests = ingest_domain(synth.scenes, synth.domain, synth.class_colors,
                                           result.run_dir / "data" / dname, opt);
            for (const auto& mp : manifests) {
                DatasetManifest m = read_manifest(mp);
                reg.add_manifest_files(m, mp);
                if (m.split == "train") (target ? tgt_train_path : src_train_path) = mp;
                if (m.split == "test" && target) tgt_test_path = mp;
            }
        }
        if (tgt_test_path.empty()) throw DataError("pipeline: synthetic target produced no test split");
    } else {
        src_train_path = cfg.source_train;
        tgt_train_path = cfg.target_train;
        tgt_test_path = cfg.target_test;
    }

    DatasetManifest src_train = read_manifest(src_train_path);
    DatasetManifest tgt_train = read_manifest(tgt_train_path);
    DatasetManifest tgt_test = read_manifest(tgt_test_path);
    const auto target_mean = channel_means(manifest_images(tgt_train));

    json metrics;
    metrics["cells"] = json::object();

    std::vector<EvalReport> baseline_reports;
    std::map<std::string, std::vector<EvalReport>> cell_reports;
    std::map<std::string, std::vector<double>> cell_dist0, cell_dist1;
    std::map<std::string, std::string> cell_errors;

    for (size_t si = 0; si < cfg.seeds.size(); ++si) {
        const uint64_t seed = cfg.seeds[si];
        const auto seed_dir = result.run_dir / ("seeds/seed" + std::to_string(seed));

        // source-only baseline, once per seed
        {
            Stopwatch watch;
            SegTrainConfig bc = cfg.segmentation;
            bc.seed = seed;
            std::ofstream blog(seed_dir / "baseline" / "train_log.txt", [&] {
                std::filesystem::create_directories(seed_dir / "baseline");
                return std::ios::out;
            }());
            SegModel baseline = source_only_baseline(
                bc, src_train, tgt_test.domain.tile_height, tgt_test.domain.tile_width,
                [&](int epoch, double loss) { blog << "epoch " << epoch << " loss " << loss << "\n"; });
            reg.add(seed_dir / "baseline" / "train_log.txt");
            save_seg_model(baseline, seed_dir / "baseline" / "model.ckpt");
            reg.add(seed_dir / "baseline" / "model.ckpt");
            write_predictions(*baseline.net, tgt_test, seed_dir / "baseline" / "preds", reg);
            EvalReport er = evaluate_predictions(tgt_test, seed_dir / "baseline" / "preds");
            {
                std::ofstream out(seed_dir / "baseline" / "eval.json");
                out << report_json(er) << "\n";
                reg.add(seed_dir / "baseline" / "eval.json");
            }
            baseline_reports.push_back(er);
            result.baseline_seed_mious.push_back(er.miou);
            result.stage_seconds["seed" + std::to_string(seed) + "/baseline"] = watch.seconds();
        }

        for (const auto& cell_name : cfg.cells) {
            const AblationCell cell = ablation_cell(cell_name);
            const auto cell_dir = seed_dir / "cells" / cell_slug(cell_name);
            Stopwatch watch;
            try {
                TranslationConfig tc = cfg.translation;
                tc.seed = seed;
                tc.enable_dsl = cell.dsl;
                tc.enable_dccl = cell.dccl;

                TranslationTrainer trainer(tc, src_train, tgt_train);
                const double dist0 =
                    color_distance(translated_means(trainer.model().g_st, src_train), target_mean);

                auto ckpt = trainer.run(cell_dir / "translation");
                reg.add(cell_dir / "translation" / "translation_log.jsonl");
                reg.add(ckpt);
                if (tc.checkpoint_every > 0)
                    for (const auto& e :
                         std::filesystem::directory_iterator(cell_dir / "translation"))
                        if (e.path().extension() == ".ckpt" && e.path().filename() != ckpt.filename())
                            reg.add(e.path());

                auto translated_path = translate_dataset(trainer.model().g_st, src_train,
                                                         tgt_train.domain, cell_dir / "translated");
                DatasetManifest translated = read_manifest(translated_path);
                reg.add_manifest_files(translated, translated_path);
                const double dist1 =
                    color_distance(channel_means(manifest_images(translated)), target_mean);

                SegTrainConfig sc = cfg.segmentation;
                sc.seed = seed;
                std::filesystem::create_directories(cell_dir / "seg");
                std::ofstream slog(cell_dir / "seg" / "train_log.txt");
                SegModel seg = train_segmentation(sc, translated, [&](int epoch, double loss) {
                    slog << "epoch " << epoch << " loss " << loss << "\n";
                });
                reg.add(cell_dir / "seg" / "train_log.txt");
                save_seg_model(seg, cell_dir / "seg" / "model.ckpt");
                reg.add(cell_dir / "seg" / "model.ckpt");

                write_predictions(*seg.net, tgt_test, cell_dir / "preds", reg);
                EvalReport er = evaluate_predictions(tgt_test, cell_dir / "preds");
                {
                    std::ofstream out(cell_dir / "eval.json");
                    out << report_json(er) << "\n";
                    reg.add(cell_dir / "eval.json");
                }
                {
                    json cd{{"initial", dist0}, {"final", dist1}};
                    std::ofstream out(cell_dir / "color_distance.json");
                    out << cd.dump(2) << "\n";
                    reg.add(cell_dir / "color_distance.json");
                }
                cell_reports[cell_name].push_back(er);
                cell_dist0[cell_name].push_back(dist0);
                cell_dist1[cell_name].push_back(dist1);
            } catch (const std::exception& e) {
                cell_errors[cell_name] = std::string(e.what());
                std::filesystem::create_directories(cell_dir);
                std::ofstream out(cell_dir / "FAILED.txt");
                out << e.what() << "\n";
                reg.add(cell_dir / "FAILED.txt");
            }
            result.stage_seconds["seed" + std::to_string(seed) + "/" + cell_slug(cell_name)] =
                watch.seconds();
        }
    }

    result.baseline = aggregate_seeds(baseline_reports);

    for (const auto& cell_name : cfg.cells) {
        CellResult cr;
        cr.cell = cell_name;
        auto it = cell_reports.find(cell_name);
        if (it != cell_reports.end() && !it->second.empty()) {
            cr.ok = it->second.size() == cfg.seeds.size();
            cr.report = aggregate_seeds(it->second);
            for (const auto& r : it->second) cr.seed_mious.push_back(r.miou);
            const auto& d0 = cell_dist0[cell_name];
            const auto& d1 = cell_dist1[cell_name];
            cr.color_dist_initial = std::accumulate(d0.begin(), d0.end(), 0.0) / d0.size();
            cr.color_dist_final = std::accumulate(d1.begin(), d1.end(), 0.0) / d1.size();
        }
        if (cell_errors.count(cell_name)) {
            cr.ok = false;
            cr.error = cell_errors[cell_name];
        }
        result.cells[cell_name] = std::move(cr);
    }

    // ---- final comparative report ----
    {
        std::ostringstream txt;
        txt << "=== run " << result.run_dir.filename().string() << " ===\n";
        txt << "--- source-only baseline (mean over " << cfg.seeds.size() << " seeds) ---\n";
        txt << render_report(result.baseline, default_class_names());
        json jcells = json::object();
        for (const auto& [name, cr] : result.cells) {
            txt << "--- " << name << " ---\n";
            if (!cr.ok && cr.seed_mious.empty()) {
                txt << "FAILED: " << cr.error << "\n";
                jcells[name] = {{"ok", false}, {"error", cr.error}};
                continue;
            }
            txt << render_report(cr.report, default_class_names());
            txt << "color distance to target: initial " << cr.color_dist_initial << " -> final "
                << cr.color_dist_final << "\n";
            json jc{{"ok", cr.ok},
                    {"miou", cr.report.miou},
                    {"mean_f1", cr.report.mean_f1},
                    {"seed_mious", cr.seed_mious},
                    {"color_dist_initial", cr.color_dist_initial},
                    {"color_dist_final", cr.color_dist_final}};
            if (!cr.error.empty()) jc["error"] = cr.error;
            jcells[name] = jc;
        }
        metrics["cells"] = jcells;
        metrics["baseline"] = {{"miou", result.baseline.miou},
                               {"mean_f1", result.baseline.mean_f1},
                               {"seed_mious", result.baseline_seed_mious}};
        result.seconds_total = total_watch.seconds();
        metrics["seconds_total"] = result.seconds_total;
        metrics["stage_seconds"] = result.stage_seconds;

        std::ofstream rt(result.run_dir / "report.txt");
        rt << txt.str();
        reg.add(result.run_dir / "report.txt");
        std::ofstream rj(result.run_dir / "report.json");
        rj << metrics.dump(2) << "\n";
        reg.add(result.run_dir / "report.json");
    }

    {
        json index{{"config", "config.json"}, {"report", "report.json"}, {"files", reg.files}};
        index["files"].push_back("index.json");
        std::ofstream out(result.run_dir / "index.json");
        out << index.dump(2) << "\n";
    }
    return result;
}

namespace {

void blit_rgb(Rgb8Raster& canvas, const Rgb8Raster& tile, int y0, int x0) {
    for (int y = 0; y < tile.h; ++y)
        for (int x = 0; x < tile.w; ++x)
            for (int c = 0; c < 3; ++c) canvas.at(y0 + y, x0 + x, c) = tile.at(y, x, c);
}

Rgb8Raster label_to_rgb(const LabelTile& lab, const std::vector<Rgb>& colors) {
    Rgb8Raster out;
    out.h = lab.h;
    out.w = lab.w;
    out.data.resize(static_cast<size_t>(lab.h) * lab.w * 3);
    for (int y = 0; y < lab.h; ++y)
        for (int x = 0; x < lab.w; ++x) {
            const Rgb& c = colors.at(lab.at(y, x));
            for (int k = 0; k < 3; ++k) out.at(y, x, k) = static_cast<uint8_t>(c[k]);
        }
    return out;
}

Rgb8Raster image_to_rgb(const ImageTile& img) {
    Rgb8Raster out;
    out.h = img.h;
    out.w = img.w;
    auto raw = denormalize_image(img, 8);
    out.data.assign(raw.begin(), raw.end());
    return out;
}

}  // namespace

std::vector<std::filesystem::path> emit_figures(const std::filesystem::path& run_dir, int tiles,
                                                uint64_t seed) {
    std::ifstream cfg_in(run_dir / "config.json");
    if (!cfg_in) throw DataError("emit_figures: '" + (run_dir / "config.json").string() + "' not found");
    json cfg_j;
    cfg_in >> cfg_j;
    PipelineConfig cfg = pipeline_config_from_json(cfg_j);

    const uint64_t first_seed = cfg.seeds.front();
    const auto seed_dir = run_dir / ("seeds/seed" + std::to_string(first_seed));
    auto test_path = cfg.synth ? (run_dir / "data/target/test.json") : std::filesystem::path(cfg.target_test);
    DatasetManifest test = read_manifest(test_path);

    std::vector<size_t> order(test.samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return test.samples[a].tile_id < test.samples[b].tile_id; });
    Rng rng = derive_rng(seed, "figures");
    rng.shuffle(order);
    const int n_tiles = std::min<int>(tiles, static_cast<int>(order.size()));

    // prediction columns: baseline first, then one per ablation cell
    std::vector<std::pair<std::string, std::filesystem::path>> columns;
    columns.push_back({"baseline", seed_dir / "baseline" / "preds"});
    for (const auto& cell : cfg.cells) {
        auto dir = seed_dir / "cells" / cell_slug(cell) / "preds";
        if (std::filesystem::exists(dir)) columns.push_back({cell, dir});
    }

    const int th = test.domain.tile_height, tw = test.domain.tile_width;
    const int pad = 2, legend_h = 10;
    const int total_cols = 2 + static_cast<int>(columns.size());

    std::vector<std::filesystem::path> written;
    for (int t = 0; t < n_tiles; ++t) {
        const SampleRef& ref = test.samples[order[t]];
        SampleTriple s = load_sample(test, order[t]);
        if (!s.label) throw DataError("emit_figures: test sample '" + ref.tile_id + "' has no label");

        Rgb8Raster canvas;
        canvas.h = th + pad + legend_h;
        canvas.w = total_cols * tw + (total_cols - 1) * pad;
        canvas.data.assign(static_cast<size_t>(canvas.h) * canvas.w * 3, 255);

        blit_rgb(canvas, image_to_rgb(s.image), 0, 0);
        blit_rgb(canvas, label_to_rgb(*s.label, test.class_colors), 0, tw + pad);
        for (size_t c = 0; c < columns.size(); ++c) {
            auto pp = columns[c].second / (ref.tile_id + ".pgm");
            if (!std::filesystem::exists(pp))
                throw DataError("emit_figures: missing prediction '" + pp.string() + "'");
            LabelTile pred = read_label_tile(pp);
            blit_rgb(canvas, label_to_rgb(pred, test.class_colors), 0,
                     static_cast<int>(2 + c) * (tw + pad));
        }
        // fixed class-color legend strip
        const int seg_w = canvas.w / test.domain.class_count;
        for (int cls = 0; cls < test.domain.class_count; ++cls)
            for (int y = th + pad; y < canvas.h; ++y)
                for (int x = cls * seg_w; x < std::min(canvas.w, (cls + 1) * seg_w); ++x)
                    for (int k = 0; k < 3; ++k)
                        canvas.at(y, x, k) = static_cast<uint8_t>(test.class_colors[cls][k]);

        auto out_path = run_dir / "figures" / ("panel_" + ref.tile_id + ".ppm");
        write_ppm(out_path, canvas);
        written.push_back(out_path);
    }

    // keep the index complete
    auto index_path = run_dir / "index.json";
    if (std::filesystem::exists(index_path)) {
        json index;
        {
            std::ifstream in(index_path);
            in >> index;
        }
        for (const auto& p : written)
            index["files"].push_back(std::filesystem::relative(p, run_dir).generic_string());
        std::ofstream out(index_path);
        out << index.dump(2) << "\n";
    }
    return written;
}

}  // namespace drdg
