#pragma once

#include <filesystem>
#include <functional>

#include "drdg/config.hpp"
#include "drdg/ingestion.hpp"
#include "drdg/networks.hpp"

namespace drdg {

struct SegModel {
    std::unique_ptr<SegmentationBackbone> net;
    SegTrainConfig cfg;
    int class_count = 0;
};

// Minimizes the segmentation cross-entropy over the manifest; deterministic in
// the seed and invariant to sample storage order. Emits per-epoch train loss.
SegModel train_segmentation(const SegTrainConfig& cfg, const DatasetManifest& data,
                            const std::function<void(int, double)>& on_epoch = {});

// In-memory variant (used by the source-only baseline).
struct SegDataset {
    std::vector<std::string> ids;
    std::vector<Tensor> images;  // (1,3,h,w)
    std::vector<LabelTile> labels;
    int class_count = 0;
};
SegModel train_segmentation(const SegTrainConfig& cfg, const SegDataset& data,
                            const std::function<void(int, double)>& on_epoch = {});

// argmax over class scores; ties break toward the lower class index
LabelTile predict(SegmentationBackbone& model, const ImageTile& tile);
std::vector<LabelTile> predict(SegmentationBackbone& model, const std::vector<ImageTile>& tiles);

// Bilinear-resize source images to the target geometry (labels nearest
// neighbor) and run the exact same training path — the comparison baseline.
SegModel source_only_baseline(const SegTrainConfig& cfg, const DatasetManifest& source,
                              int target_h, int target_w,
                              const std::function<void(int, double)>& on_epoch = {});

void save_seg_model(const SegModel& model, const std::filesystem::path& path);
SegModel load_seg_model(const std::filesystem::path& path);

}  // namespace drdg
