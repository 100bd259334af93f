#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "chroma/data.hpp"
#include "chroma/losses.hpp"
#include "chroma/networks.hpp"

namespace chroma {

enum class Variant {
    full,            // color + adversarial + class distribution
    no_class,        // lambda_s forced to 0, teacher never run
    no_adversarial,  // lambda_g forced to 0, critic never run or updated
};

std::string to_string(Variant v);
/// Accepts "full", "no_class", "no_adversarial". Throws ConfigError.
Variant parse_variant(const std::string& name);

struct TrainConfig {
    int epochs = 5;
    int batch_size = 10;
    double lr = 2e-5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int critic_steps_per_gen_step = 1;
    LossWeights weights;
    std::uint64_t seed = 0;
    int side = 224;
    int num_classes = 1000;
    Variant variant = Variant::full;

    // Architecture and runtime knobs.
    int width_divisor = 1;
    std::uint64_t teacher_seed = 1234;
    std::string backbone_weights;
    int workers = 1;
    int checkpoint_every = 1;
    bool shuffle = true;

    /// 224 px, 1000 classes, batch 10, five epochs.
    static TrainConfig reference_profile();
    /// 64 px, 10 classes, batch 4.
    static TrainConfig desk_profile();

    /// Weights after the variant's ablation switches.
    LossWeights effective_weights() const;
    GeneratorConfig generator_config() const;
    CriticConfig critic_config() const;
    TeacherConfig teacher_config() const;

    /// Throws ConfigError.
    void validate() const;

    /// "key = value" lines; `profile = desk|reference` resets to that profile first.
    std::string to_text() const;
    static TrainConfig from_text(const std::string& text);
    static TrainConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Everything one training run mutates. Single writer.
struct TrainState {
    TrainConfig config;
    Generator generator{nullptr};
    PatchCritic critic{nullptr};
    Teacher teacher{nullptr};
    std::unique_ptr<torch::optim::Adam> generator_opt;
    std::unique_ptr<torch::optim::Adam> critic_opt;
    std::int64_t step = 0;
};

/// Seeded models and fresh optimizers for `config`.
TrainState init_state(const TrainConfig& config);

/// Batch → (N×1×s×s luminance, N×2×s×s chroma) tensors.
std::pair<torch::Tensor, torch::Tensor> batch_tensors(const Batch& batch);

/// Critic update(s) on detached generator output, then one generator update.
/// Throws TrainingError naming the first non-finite term.
LossReport train_step(TrainState& state, const Batch& batch);

inline constexpr int kCheckpointVersion = 1;

/// Parameters, buffers, Adam moments, step and config; written atomically.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
/// Throws CheckpointError on version mismatch or corruption.
TrainState load_checkpoint(const std::filesystem::path& path);

struct FitOptions {
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> resume_from;
    /// Called after each step; returning false stops training after the
    /// current step (a checkpoint is still written).
    std::function<bool(std::int64_t step, const LossReport&)> on_step;
};

struct FitResult {
    TrainState state;
    std::filesystem::path checkpoint;
    std::filesystem::path metrics_log;
};

/// Runs epochs × batches steps, appending every step to out_dir/metrics.log and
/// writing out_dir/latest.chk every `checkpoint_every` epochs and at the end.
/// When resuming, the checkpoint's config is kept except for `epochs`.
FitResult fit(const TrainConfig& config, const Corpus& corpus, const FitOptions& options);

}  // namespace chroma
