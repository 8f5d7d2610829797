#include "drdg/config.hpp"

#include <fstream>
#include <set>

namespace drdg {

using nlohmann::json;

namespace {

void expect_keys(const json& j, const std::set<std::string>& keys, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw ConfigError(ctx + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void check_schema(const json& j, const std::string& ctx) {
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
        throw ConfigError(ctx + ": missing or unsupported schema_version (expected 1)");
}

}  // namespace

void SegTrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("segmentation: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("segmentation: batch_size must be >= 1");
    if (lr <= 0) throw ConfigError("segmentation: learning rate must be > 0");
    if (width <= 0) throw ConfigError("segmentation: width must be positive");
    if (backbone != "compact" && backbone != "deeplabv3_lite")
        throw ConfigError("segmentation: unknown backbone '" + backbone + "'");
}

void PipelineConfig::validate() const {
    translation.validate();
    segmentation.validate();
    if (seeds.empty()) throw ConfigError("pipeline: seeds must be non-empty");
    if (cells.empty()) throw ConfigError("pipeline: ablation grid must be non-empty");
    for (const auto& c : cells) ablation_cell(c);
    if (synth) {
        synth->validate();
        if (synth_scenes < 2) throw ConfigError("pipeline: synth_scenes must be >= 2");
    } else {
        if (source_train.empty() || target_train.empty() || target_test.empty())
            throw ConfigError("pipeline: either a synth block or all three manifests are required");
    }
    if (figure_tiles < 0) throw ConfigError("pipeline: figure_tiles must be >= 0");
}

AblationCell ablation_cell(const std::string& name) {
    if (name == "DRDG") return {name, true, true};
    if (name == "w/o DSL") return {name, false, true};
    if (name == "w/o DCCL") return {name, true, false};
    if (name == "RDG") return {name, false, false};
    throw ConfigError("pipeline: unknown ablation cell '" + name +
                      "' (expected DRDG, w/o DSL, w/o DCCL or RDG)");
}

json net_config_to_json(const NetConfig& c) {
    return json{{"encoder_channels", c.encoder_channels},
                {"disc_channels", c.disc_channels},
                {"lrelu_slope", c.lrelu_slope}};
}

NetConfig net_config_from_json(const json& j) {
    expect_keys(j, {"encoder_channels", "disc_channels", "lrelu_slope"}, "net");
    NetConfig c;
    if (j.contains("encoder_channels")) c.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
    if (j.contains("disc_channels")) c.disc_channels = j.at("disc_channels").get<std::vector<int>>();
    c.lrelu_slope = get_or(j, "lrelu_slope", c.lrelu_slope);
    c.validate();
    return c;
}

json translation_config_to_json(const TranslationConfig& c) {
    return json{{"weights",
                 {{"lambda_adv", c.weights.lambda_adv},
                  {"lambda_cyc", c.weights.lambda_cyc},
                  {"lambda_dsl", c.weights.lambda_dsl},
                  {"lambda_dccl", c.weights.lambda_dccl}}},
                {"steps", c.steps},
                {"batch_size", c.batch_size},
                {"critic_steps_per_gen_step", c.critic_steps_per_gen_step},
                {"lr_critic", c.lr_critic},
                {"lr_generator", c.lr_generator},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"gp_weight", c.gp_weight},
                {"lipschitz_mode", c.lipschitz_mode},
                {"clip_value", c.clip_value},
                {"seed", c.seed},
                {"checkpoint_every", c.checkpoint_every},
                {"enable_dsl", c.enable_dsl},
                {"enable_dccl", c.enable_dccl},
                {"berhu_max_scope", c.berhu_max_scope},
                {"net", net_config_to_json(c.net)}};
}

TranslationConfig translation_config_from_json(const json& j) {
    expect_keys(j, {"weights", "steps", "batch_size", "critic_steps_per_gen_step", "lr_critic",
                    "lr_generator", "adam_beta1", "adam_beta2", "gp_weight", "lipschitz_mode",
                    "clip_value", "seed", "checkpoint_every", "enable_dsl", "enable_dccl",
                    "berhu_max_scope", "net"},
                "translation");
    TranslationConfig c;
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        expect_keys(w, {"lambda_adv", "lambda_cyc", "lambda_dsl", "lambda_dccl"}, "translation.weights");
        c.weights.lambda_adv = get_or(w, "lambda_adv", c.weights.lambda_adv);
        c.weights.lambda_cyc = get_or(w, "lambda_cyc", c.weights.lambda_cyc);
        c.weights.lambda_dsl = get_or(w, "lambda_dsl", c.weights.lambda_dsl);
        c.weights.lambda_dccl = get_or(w, "lambda_dccl", c.weights.lambda_dccl);
    }
    c.steps = get_or(j, "steps", c.steps);
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.critic_steps_per_gen_step = get_or(j, "critic_steps_per_gen_step", c.critic_steps_per_gen_step);
    c.lr_critic = get_or(j, "lr_critic", c.lr_critic);
    c.lr_generator = get_or(j, "lr_generator", c.lr_generator);
    c.adam_beta1 = get_or(j, "adam_beta1", c.adam_beta1);
    c.adam_beta2 = get_or(j, "adam_beta2", c.adam_beta2);
    c.gp_weight = get_or(j, "gp_weight", c.gp_weight);
    c.lipschitz_mode = get_or(j, "lipschitz_mode", c.lipschitz_mode);
    c.clip_value = get_or(j, "clip_value", c.clip_value);
    c.seed = get_or(j, "seed", c.seed);
    c.checkpoint_every = get_or(j, "checkpoint_every", c.checkpoint_every);
    c.enable_dsl = get_or(j, "enable_dsl", c.enable_dsl);
    c.enable_dccl = get_or(j, "enable_dccl", c.enable_dccl);
    c.berhu_max_scope = get_or(j, "berhu_max_scope", c.berhu_max_scope);
    if (j.contains("net")) c.net = net_config_from_json(j.at("net"));
    c.validate();
    return c;
}

json seg_config_to_json(const SegTrainConfig& c) {
    return json{{"backbone", c.backbone}, {"width", c.width},       {"epochs", c.epochs},
                {"batch_size", c.batch_size}, {"lr", c.lr},         {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2}, {"seed", c.seed},     {"augment_flips", c.augment_flips}};
}

SegTrainConfig seg_config_from_json(const json& j) {
    expect_keys(j, {"backbone", "width", "epochs", "batch_size", "lr", "adam_beta1", "adam_beta2",
                    "seed", "augment_flips"},
                "segmentation");
    SegTrainConfig c;
    c.backbone = get_or(j, "backbone", c.backbone);
    c.width = get_or(j, "width", c.width);
    c.epochs = get_or(j, "epochs", c.epochs);
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.lr = get_or(j, "lr", c.lr);
    c.adam_beta1 = get_or(j, "adam_beta1", c.adam_beta1);
    c.adam_beta2 = get_or(j, "adam_beta2", c.adam_beta2);
    c.seed = get_or(j, "seed", c.seed);
    c.augment_flips = get_or(j, "augment_flips", c.augment_flips);
    c.validate();
    return c;
}

namespace {

json synth_domain_to_json(const SynthDomain& d) {
    json palette = json::array();
    for (const auto& c : d.palette) palette.push_back({c[0], c[1], c[2]});
    return json{{"name", d.name},
                {"scene_px", d.scene_px},
                {"tile_px", d.tile_px},
                {"resolution_cm", d.resolution_cm},
                {"palette", palette}};
}

SynthDomain synth_domain_from_json(const json& j, const SynthDomain& fallback) {
    expect_keys(j, {"name", "scene_px", "tile_px", "resolution_cm", "palette"}, "synth domain");
    SynthDomain d = fallback;
    d.name = get_or(j, "name", d.name);
    d.scene_px = get_or(j, "scene_px", d.scene_px);
    d.tile_px = get_or(j, "tile_px", d.tile_px);
    d.resolution_cm = get_or(j, "resolution_cm", d.resolution_cm);
    if (j.contains("palette")) {
        d.palette.clear();
        for (const auto& c : j.at("palette")) d.palette.push_back(Rgb{c.at(0), c.at(1), c.at(2)});
    }
    return d;
}

}  // namespace

json synth_config_to_json(const SynthConfig& c) {
    return json{{"source", synth_domain_to_json(c.source)},
                {"target", synth_domain_to_json(c.target)},
                {"color_jitter", c.color_jitter},
                {"buildings", c.buildings},
                {"trees", c.trees},
                {"roads", c.roads},
                {"lowveg_patches", c.lowveg_patches},
                {"cars", c.cars},
                {"ground_base", c.ground_base},
                {"ground_relief", c.ground_relief},
                {"building_height", c.building_height},
                {"tree_height", c.tree_height},
                {"car_height", c.car_height},
                {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
    expect_keys(j, {"source", "target", "color_jitter", "buildings", "trees", "roads",
                    "lowveg_patches", "cars", "ground_base", "ground_relief", "building_height",
                    "tree_height", "car_height", "seed"},
                "synth");
    SynthConfig c = SynthConfig::defaults();
    if (j.contains("source")) c.source = synth_domain_from_json(j.at("source"), c.source);
    if (j.contains("target")) c.target = synth_domain_from_json(j.at("target"), c.target);
    c.color_jitter = get_or(j, "color_jitter", c.color_jitter);
    c.buildings = get_or(j, "buildings", c.buildings);
    c.trees = get_or(j, "trees", c.trees);
    c.roads = get_or(j, "roads", c.roads);
    c.lowveg_patches = get_or(j, "lowveg_patches", c.lowveg_patches);
    c.cars = get_or(j, "cars", c.cars);
    c.ground_base = get_or(j, "ground_base", c.ground_base);
    c.ground_relief = get_or(j, "ground_relief", c.ground_relief);
    if (j.contains("building_height")) c.building_height = j.at("building_height").get<std::array<double, 2>>();
    if (j.contains("tree_height")) c.tree_height = j.at("tree_height").get<std::array<double, 2>>();
    if (j.contains("car_height")) c.car_height = j.at("car_height").get<std::array<double, 2>>();
    c.seed = get_or(j, "seed", c.seed);
    c.validate();
    return c;
}

json pipeline_config_to_json(const PipelineConfig& c) {
    json j{{"schema_version", 1},
           {"synth_scenes", c.synth_scenes},
           {"source_train", c.source_train},
           {"target_train", c.target_train},
           {"target_test", c.target_test},
           {"translation", translation_config_to_json(c.translation)},
           {"segmentation", seg_config_to_json(c.segmentation)},
           {"seeds", c.seeds},
           {"cells", c.cells},
           {"figure_tiles", c.figure_tiles}};
    if (c.synth) j["synth"] = synth_config_to_json(*c.synth);
    return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
    expect_keys(j, {"schema_version", "synth", "synth_scenes", "source_train", "target_train",
                    "target_test", "translation", "segmentation", "seeds", "cells", "figure_tiles"},
                "pipeline");
    check_schema(j, "pipeline");
    PipelineConfig c;
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
    c.synth_scenes = get_or(j, "synth_scenes", c.synth_scenes);
    c.source_train = get_or<std::string>(j, "source_train", "");
    c.target_train = get_or<std::string>(j, "target_train", "");
    c.target_test = get_or<std::string>(j, "target_test", "");
    if (j.contains("translation")) c.translation = translation_config_from_json(j.at("translation"));
    if (j.contains("segmentation")) c.segmentation = seg_config_from_json(j.at("segmentation"));
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    if (j.contains("cells")) c.cells = j.at("cells").get<std::vector<std::string>>();
    c.figure_tiles = get_or(j, "figure_tiles", c.figure_tiles);
    c.validate();
    return c;
}

TranslationConfig load_translation_config(const std::filesystem::path& path) {
    json j = load_json(path);
    check_schema(j, "translation config");
    j.erase("schema_version");
    return translation_config_from_json(j);
}

SegTrainConfig load_seg_config(const std::filesystem::path& path) {
    json j = load_json(path);
    check_schema(j, "segmentation config");
    j.erase("schema_version");
    return seg_config_from_json(j);
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
    json j = load_json(path);
    check_schema(j, "synth config");
    j.erase("schema_version");
    return synth_config_from_json(j);
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    return pipeline_config_from_json(load_json(path));
}

}  // namespace drdg
