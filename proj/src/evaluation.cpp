#include "drdg/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace drdg {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
    if (classes < 2) throw DataError("ConfusionMatrix: need at least 2 classes");
    counts_.assign(static_cast<size_t>(classes) * classes, 0);
}

void ConfusionMatrix::accumulate(const LabelTile& pred, const LabelTile& gt) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw ShapeError("ConfusionMatrix::accumulate: prediction " + std::to_string(pred.h) + "x" +
                         std::to_string(pred.w) + " vs ground truth " + std::to_string(gt.h) + "x" +
                         std::to_string(gt.w));
    for (size_t i = 0; i < gt.data.size(); ++i) {
        const int g = gt.data[i], p = pred.data[i];
        if (g < 0 || g >= classes_ || p < 0 || p >= classes_)
            throw DataError("ConfusionMatrix::accumulate: label outside {0.." +
                            std::to_string(classes_ - 1) + "}");
        at(g, p)++;
    }
}

void ConfusionMatrix::accumulate_masked(const LabelTile& pred, const LabelTile& gt,
                                        std::vector<uint8_t>& mask, int scene_w, int y0, int x0) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw ShapeError("ConfusionMatrix::accumulate_masked: geometry mismatch");
    for (int y = 0; y < gt.h; ++y)
        for (int x = 0; x < gt.w; ++x) {
            const size_t mi = static_cast<size_t>(y0 + y) * scene_w + (x0 + x);
            if (mask[mi]) continue;
            mask[mi] = 1;
            const int g = gt.at(y, x), p = pred.at(y, x);
            if (g < 0 || g >= classes_ || p < 0 || p >= classes_)
                throw DataError("ConfusionMatrix::accumulate_masked: label outside range");
            at(g, p)++;
        }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw DataError("ConfusionMatrix::merge: class count mismatch");
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), int64_t{0});
}

std::vector<double> iou_per_class(const ConfusionMatrix& cm) {
    const int C = cm.classes();
    std::vector<double> out(C, 0.0);
    for (int c = 0; c < C; ++c) {
        int64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < C; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const int64_t denom = tp + fp + fn;
        out[c] = denom > 0 ? static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    }
    return out;
}

std::vector<double> f1_per_class(const ConfusionMatrix& cm) {
    const int C = cm.classes();
    std::vector<double> out(C, 0.0);
    for (int c = 0; c < C; ++c) {
        int64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < C; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        out[c] = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    return out;
}

EvalReport report_from_matrix(const ConfusionMatrix& cm) {
    EvalReport r;
    r.iou = iou_per_class(cm);
    r.f1 = f1_per_class(cm);
    r.miou = std::accumulate(r.iou.begin(), r.iou.end(), 0.0) / r.iou.size();
    r.mean_f1 = std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / r.f1.size();
    return r;
}

EvalReport aggregate_seeds(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw DataError("aggregate_seeds: no reports");
    const size_t C = reports[0].iou.size();
    for (const auto& r : reports)
        if (r.iou.size() != C || r.f1.size() != C)
            throw DataError("aggregate_seeds: mismatched class counts");
    EvalReport out;
    out.iou.assign(C, 0.0);
    out.f1.assign(C, 0.0);
    for (const auto& r : reports) {
        for (size_t c = 0; c < C; ++c) {
            out.iou[c] += r.iou[c];
            out.f1[c] += r.f1[c];
        }
        out.miou += r.miou;
        out.mean_f1 += r.mean_f1;
    }
    const double k = static_cast<double>(reports.size());
    for (size_t c = 0; c < C; ++c) {
        out.iou[c] /= k;
        out.f1[c] /= k;
    }
    out.miou /= k;
    out.mean_f1 /= k;
    out.per_seed = reports;
    return out;
}

std::vector<std::string> default_class_names() {
    return {"Background/Clutter", "Impervious Surface", "Car", "Tree", "Low Vegetation", "Building"};
}

std::string render_report(const EvalReport& r, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "class                    IoU     F1\n";
    for (size_t c = 0; c < r.iou.size(); ++c) {
        std::string name = c < class_names.size() ? class_names[c] : "class " + std::to_string(c);
        name.resize(22, ' ');
        os << name << " " << 100.0 * r.iou[c] << "   " << 100.0 * r.f1[c] << "\n";
    }
    os << "Overall (mean)         " << 100.0 * r.miou << "   " << 100.0 * r.mean_f1 << "\n";
    if (!r.per_seed.empty()) {
        os << "per-seed mIoU:";
        for (const auto& s : r.per_seed) os << " " << 100.0 * s.miou;
        os << "\n";
    }
    return os.str();
}

std::string report_json(const EvalReport& r) {
    nlohmann::json j{{"iou", r.iou}, {"f1", r.f1}, {"miou", r.miou}, {"mean_f1", r.mean_f1}};
    if (!r.per_seed.empty()) {
        nlohmann::json seeds = nlohmann::json::array();
        for (const auto& s : r.per_seed)
            seeds.push_back({{"iou", s.iou}, {"f1", s.f1}, {"miou", s.miou}, {"mean_f1", s.mean_f1}});
        j["per_seed"] = seeds;
    }
    return j.dump(2);
}

ConfusionMatrix confusion_from_predictions(const DatasetManifest& gt,
                                           const std::filesystem::path& pred_dir) {
    ConfusionMatrix cm(gt.domain.class_count);
    // coverage masks per scene: overlapping edge tiles contribute each pixel once
    std::map<int, std::vector<uint8_t>> masks;
    std::vector<size_t> order(gt.samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return gt.samples[a].tile_id < gt.samples[b].tile_id; });
    for (size_t i : order) {
        const SampleRef& ref = gt.samples[i];
        if (!ref.label_path)
            throw DataError("evaluate: sample '" + ref.tile_id + "' has no ground-truth label");
        LabelTile truth = read_label_tile(gt.base_dir / *ref.label_path);
        auto pred_path = pred_dir / (ref.tile_id + ".pgm");
        if (!std::filesystem::exists(pred_path))
            throw DataError("evaluate: missing prediction '" + pred_path.string() + "'");
        LabelTile pred = read_label_tile(pred_path);

        auto dims = gt.scene_dims.find(ref.scene_id);
        if (dims == gt.scene_dims.end()) {
            cm.accumulate(pred, truth);
            continue;
        }
        auto& mask = masks[ref.scene_id];
        if (mask.empty()) mask.assign(static_cast<size_t>(dims->second.first) * dims->second.second, 0);
        cm.accumulate_masked(pred, truth, mask, dims->second.second, ref.y, ref.x);
    }
    return cm;
}

EvalReport evaluate_predictions(const DatasetManifest& gt, const std::filesystem::path& pred_dir) {
    return report_from_matrix(confusion_from_predictions(gt, pred_dir));
}

}  // namespace drdg
