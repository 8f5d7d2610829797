#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"

#include "drdg/synth.hpp"
#include "drdg/translation_trainer.hpp"

namespace drdg {

struct SegTrainConfig {
    std::string backbone = "compact";
    int width = 16;
    int epochs = 30;
    int batch_size = 4;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    uint64_t seed = 0;
    bool augment_flips = true;

    void validate() const;
};

// One declarative file drives the whole experiment: data source, both stage
// configs, the seed list and the ablation grid.
struct PipelineConfig {
    std::optional<SynthConfig> synth;  // when set, scenes are generated under the run dir
    int synth_scenes = 13;
    std::string source_train, target_train, target_test;  // manifest paths when synth is absent
    TranslationConfig translation;
    SegTrainConfig segmentation;
    std::vector<uint64_t> seeds{1};
    std::vector<std::string> cells{"DRDG"};  // subset of {DRDG, w/o DSL, w/o DCCL, RDG}
    int figure_tiles = 2;

    void validate() const;
};

nlohmann::json net_config_to_json(const NetConfig& c);
NetConfig net_config_from_json(const nlohmann::json& j);

nlohmann::json translation_config_to_json(const TranslationConfig& c);
TranslationConfig translation_config_from_json(const nlohmann::json& j);

nlohmann::json seg_config_to_json(const SegTrainConfig& c);
SegTrainConfig seg_config_from_json(const nlohmann::json& j);

nlohmann::json synth_config_to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

nlohmann::json pipeline_config_to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

// Strict loaders: schema_version checked, unknown keys rejected.
TranslationConfig load_translation_config(const std::filesystem::path& path);
SegTrainConfig load_seg_config(const std::filesystem::path& path);
SynthConfig load_synth_config(const std::filesystem::path& path);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Ablation cell names from the experiment grid.
struct AblationCell {
    std::string name;
    bool dsl = true;
    bool dccl = true;
};
AblationCell ablation_cell(const std::string& name);

}  // namespace drdg
