#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drdg/data_model.hpp"
#include "drdg/raster_io.hpp"

namespace drdg {

struct SceneRecord {
    int scene_id = 0;
    std::filesystem::path rgb_path;
    std::filesystem::path dsm_path;
    std::optional<std::filesystem::path> label_path;
    int height = 0, width = 0;
};

using Rgb = std::array<int, 3>;

struct SampleRef {
    std::string tile_id;
    int scene_id = 0;
    int y = 0, x = 0;  // tile origin in the source scene
    std::string image_path;                 // relative to the manifest
    std::optional<std::string> label_path;
    std::optional<std::string> depth_path;
};

struct DatasetManifest {
    DomainSpec domain;
    std::vector<Rgb> class_colors;  // index -> color, size class_count
    std::string split;              // train | val | test
    uint64_t seed = 0;
    std::vector<SampleRef> samples;
    std::map<int, std::pair<int, int>> scene_dims;  // scene_id -> (h, w)
    std::filesystem::path base_dir;                 // set on read; not serialized
};

// Global min/max of raw DSM values over one domain's scenes.
std::pair<double, double> compute_depth_stats(const std::vector<SceneRecord>& scenes);

// (raw - min) / (max - min), clamped to [0, 1]; all zeros when min == max.
DepthTile normalize_dsm(const FloatRaster& raw, std::pair<double, double> stats);

struct ClippedTile {
    SampleTriple sample;
    int y = 0, x = 0;
};

// Grid of tiles at the given stride. When include_edge_tiles is set, an extra
// row/column anchored at dim - tile_size covers the scene remainder.
std::vector<ClippedTile> clip_tiles(const SceneRecord& scene, const DomainSpec& domain, int stride,
                                    bool include_edge_tiles = true);

// Anchor positions along one axis; exposed for tests.
std::vector<int> tile_anchors(int extent, int tile, int stride, bool include_edge);

// Exact-match color lookup; unmatched pixels fall back to class 0.
LabelTile labels_from_color(const Rgb8Raster& raster, const std::vector<std::pair<Rgb, int>>& color_map);

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Materialize one sample (loads tile rasters; target-train manifests have no labels).
SampleTriple load_sample(const DatasetManifest& m, size_t index);

// Tile a whole domain: writes tile rasters plus train/val/test manifests under out_dir.
struct IngestOptions {
    int stride = 0;  // 0 = tile size
    bool include_edge_tiles = true;
    double train_frac = 0.7, val_frac = 0.1;
    bool strip_labels_from_train = false;  // set for the unannotated target domain
    uint64_t seed = 0;
};

std::vector<std::filesystem::path> ingest_domain(const std::vector<SceneRecord>& scenes,
                                                 DomainSpec domain, const std::vector<Rgb>& class_colors,
                                                 const std::filesystem::path& out_dir,
                                                 const IngestOptions& opt);

}  // namespace drdg
