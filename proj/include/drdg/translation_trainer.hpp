#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "drdg/checkpoint.hpp"
#include "drdg/ingestion.hpp"
#include "drdg/losses.hpp"
#include "drdg/networks.hpp"
#include "drdg/optim.hpp"

namespace drdg {

struct TranslationConfig {
    LossWeights weights;
    int steps = 2000;
    int batch_size = 1;
    int critic_steps_per_gen_step = 1;
    double lr_critic = 1e-4;
    double lr_generator = 1e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.9;
    double gp_weight = 10.0;
    std::string lipschitz_mode = "gp";  // "gp" | "clip"
    double clip_value = 0.05;
    uint64_t seed = 0;
    int checkpoint_every = 0;  // 0 = final only
    bool enable_dsl = true;
    bool enable_dccl = true;
    std::string berhu_max_scope = "batch";  // "batch" | "image"
    NetConfig net;

    void validate() const;
};

// In-memory view of one manifest, canonically ordered by tile_id.
struct LoadedSet {
    std::vector<std::string> ids;
    std::vector<Tensor> images;               // each (1,3,h,w)
    std::vector<Tensor> depths;               // each (1,1,h,w)
    std::vector<std::optional<LabelTile>> labels;
    int h = 0, w = 0;

    static LoadedSet from_manifest(const DatasetManifest& m, bool need_depth, bool need_label);
};

class TranslationTrainer {
  public:
    TranslationTrainer(TranslationConfig cfg, const DatasetManifest& source,
                       const DatasetManifest& target);

    // Rebuild a trainer mid-run from a checkpoint; the subsequent loss
    // trajectory matches an uninterrupted run on the same manifests.
    static TranslationTrainer resume(const std::filesystem::path& checkpoint,
                                     const DatasetManifest& source, const DatasetManifest& target);

    // One critic/generator cycle. Throws DivergenceError on non-finite loss.
    LossReport step_once();

    // Run until cfg.steps, appending one JSON record per step to the log and
    // writing checkpoints on schedule plus a final one. Returns the final
    // checkpoint path.
    std::filesystem::path run(const std::filesystem::path& out_dir,
                              const std::function<void(int64_t, const LossReport&)>& on_step = {});

    CheckpointData make_checkpoint() const;

    const DrdgModel& model() const { return model_; }
    DrdgModel& model() { return model_; }
    int64_t step() const { return step_; }
    const TranslationConfig& config() const { return cfg_; }
    double last_critic_s() const { return critic_s_; }
    double last_critic_t() const { return critic_t_; }

  private:
    struct Batch {
        Tensor images;
        Tensor depths;
    };
    Batch draw(const LoadedSet& set, int64_t cursor) const;
    double critic_update(const Discriminator& d, Adam& opt, const Tensor& real, const Tensor& fake,
                         Rng& gp_rng);
    Var berhu_scoped(const Var& pred, const Var& gt) const;

    TranslationConfig cfg_;
    DomainSpec source_domain_, target_domain_;
    LoadedSet src_, tgt_;
    DrdgModel model_;
    Adam gen_opt_, ds_opt_, dt_opt_;
    int64_t step_ = 0;
    double critic_s_ = 0, critic_t_ = 0;
};

// Translate every source sample to target geometry (labels nearest-neighbor,
// depth copied through at source geometry) and write a translated manifest.
std::filesystem::path translate_dataset(const GeneratorBundle& g_st, const DatasetManifest& source,
                                        const DomainSpec& target_domain,
                                        const std::filesystem::path& out_dir);

}  // namespace drdg
