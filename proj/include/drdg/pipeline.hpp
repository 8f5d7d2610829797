#pragma once

#include <filesystem>
#include <map>

#include "drdg/config.hpp"
#include "drdg/evaluation.hpp"
#include "drdg/segmentation_trainer.hpp"

namespace drdg {

struct CellResult {
    std::string cell;
    bool ok = false;
    std::string error;               // diagnostic when !ok
    EvalReport report;               // aggregated over seeds (per_seed retained)
    std::vector<double> seed_mious;  // convenience, one per successful seed
    double color_dist_initial = 0;   // mean over seeds
    double color_dist_final = 0;
};

struct PipelineResult {
    std::filesystem::path run_dir;
    EvalReport baseline;  // aggregated over seeds
    std::vector<double> baseline_seed_mious;
    std::map<std::string, CellResult> cells;
    double seconds_total = 0;
    std::map<std::string, double> stage_seconds;  // "seed<i>/<stage>" -> wall time
};

// seed x cell grid: stage-1 training, dataset translation, stage-2 training,
// prediction and evaluation, plus the source-only baseline once per seed.
// A failing cell is recorded with its diagnostic; remaining cells proceed.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_root);

// Side-by-side panels (image | ground truth | baseline | per-cell predictions)
// for a deterministic sample of test tiles, with a class-color legend strip.
std::vector<std::filesystem::path> emit_figures(const std::filesystem::path& run_dir, int tiles,
                                                uint64_t seed);

// per-channel mean color distance between an image set and target statistics
std::array<double, 3> channel_means(const std::vector<Tensor>& images);
double color_distance(const std::array<double, 3>& a, const std::array<double, 3>& b);

std::string cell_slug(const std::string& cell_name);

}  // namespace drdg
