#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "drdg/data_model.hpp"
#include "drdg/ingestion.hpp"

namespace drdg {

// C x C counts; entry (gt, pred). Mergeable monoid: accumulate per tile, merge.
class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(int classes);

    void accumulate(const LabelTile& pred, const LabelTile& gt);
    // dedup path for overlapping tiles: counts only pixels where mask==0,
    // and marks them
    void accumulate_masked(const LabelTile& pred, const LabelTile& gt, std::vector<uint8_t>& mask,
                           int scene_w, int y0, int x0);
    void merge(const ConfusionMatrix& other);

    int64_t at(int gt, int pred) const { return counts_[static_cast<size_t>(gt) * classes_ + pred]; }
    int64_t& at(int gt, int pred) { return counts_[static_cast<size_t>(gt) * classes_ + pred]; }
    int64_t total() const;
    int classes() const { return classes_; }

  private:
    int classes_;
    std::vector<int64_t> counts_;
};

struct EvalReport {
    std::vector<double> iou;  // per class
    std::vector<double> f1;
    double miou = 0;
    double mean_f1 = 0;
    std::vector<EvalReport> per_seed;  // retained by aggregate_seeds
};

std::vector<double> iou_per_class(const ConfusionMatrix& cm);
std::vector<double> f1_per_class(const ConfusionMatrix& cm);
EvalReport report_from_matrix(const ConfusionMatrix& cm);

// arithmetic mean of every metric across seeds; per-seed values retained
EvalReport aggregate_seeds(const std::vector<EvalReport>& reports);

// Table-style text rendering (per-class IoU/F1 plus overall mean).
std::string render_report(const EvalReport& r, const std::vector<std::string>& class_names = {});
std::string report_json(const EvalReport& r);

// Evaluate prediction rasters named <tile_id>.pgm under pred_dir against a
// ground-truth manifest; overlapping tile pixels are counted exactly once.
EvalReport evaluate_predictions(const DatasetManifest& gt, const std::filesystem::path& pred_dir);
ConfusionMatrix confusion_from_predictions(const DatasetManifest& gt,
                                           const std::filesystem::path& pred_dir);

std::vector<std::string> default_class_names();

}  // namespace drdg
