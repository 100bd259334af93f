#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "chroma/archive.hpp"

namespace chroma {

/// Geometry of the colorization generator.
///
/// The shared backbone follows the first four VGG-16 stages (2, 2, 3, 3 convs,
/// max-pool between stages) and ends at side/8. The color branch and the class
/// branch split from there; the class branch's 256-d trunk vector is broadcast
/// over the side/8 grid and concatenated with the color features, then six
/// conv-ReLU modules with two 2× upsamplings and a tanh chroma layer reach
/// side/2, and a fixed bilinear 2× resize restores full resolution.
struct GeneratorConfig {
    int input_side = 224;
    int num_classes = 1000;
    std::vector<int> backbone_widths = {64, 128, 256, 512};
    std::vector<int> backbone_convs = {2, 2, 3, 3};
    std::vector<int> color_widths = {256, 128};
    int class_conv_width = 512;
    std::vector<int> class_fc_widths = {1024, 512, 256};
    std::vector<int> head_widths = {256, 128, 128, 64, 64, 32};

    /// Throws ConfigError.
    void validate() const;
    /// Side of the fusion grid (input_side / 8).
    int fusion_side() const { return input_side / 8; }
    /// Side of the class branch grid after its two stride-2 convs.
    int class_grid_side() const;

    /// Same architecture with every width divided by `factor` (min 1).
    GeneratorConfig narrowed(int factor) const;
};

struct CriticConfig {
    int in_channels = 3;
    std::vector<int> widths = {64, 128, 256, 512};
    double leaky_slope = 0.2;

    void validate() const;
};

struct TeacherConfig {
    int num_classes = 1000;
    std::vector<int> widths = {16, 32, 64};
    double logit_gain = 8.0;
    std::uint64_t seed = 1234;
};

/// ab: N×2×side×side, encoded chroma in [-1,1]. class_dist: N×m, rows sum to 1.
struct GeneratorOutput {
    torch::Tensor ab;
    torch::Tensor class_dist;
};

class GeneratorImpl : public torch::nn::Cloneable<GeneratorImpl> {
public:
    explicit GeneratorImpl(GeneratorConfig config);

    void reset() override;
    /// L: N×1×side×side, encoded luminance (L/100). Throws ShapeError.
    GeneratorOutput forward(const torch::Tensor& L);

    const GeneratorConfig& config() const { return config_; }

    torch::nn::Sequential backbone{nullptr};
    torch::nn::Sequential color_branch{nullptr};
    torch::nn::Sequential class_conv{nullptr};
    torch::nn::Sequential class_fc{nullptr};
    torch::nn::Linear class_head{nullptr};
    torch::nn::Sequential fusion{nullptr};

private:
    GeneratorConfig config_;
};
TORCH_MODULE(Generator);

/// Patch critic: three stride-2 4×4 convs then two stride-1 3×3 convs, LeakyReLU
/// between; emits one unbounded score per patch on a side/8 grid.
class PatchCriticImpl : public torch::nn::Cloneable<PatchCriticImpl> {
public:
    explicit PatchCriticImpl(CriticConfig config = {});

    void reset() override;
    /// lab: N×C×side×side with side divisible by 8 → N×side/8×side/8.
    torch::Tensor forward(const torch::Tensor& lab);

    const CriticConfig& config() const { return config_; }
    torch::nn::Sequential body{nullptr};

private:
    CriticConfig config_;
};
TORCH_MODULE(PatchCritic);

/// Frozen classifier producing the target class distribution from (L,L,L).
/// Parameters never require gradients; forward runs in eval mode under no-grad.
class TeacherImpl : public torch::nn::Module {
public:
    explicit TeacherImpl(TeacherConfig config);

    torch::Tensor forward(const torch::Tensor& L);

    const TeacherConfig& config() const { return config_; }
    std::uint64_t invocations() const { return invocations_.load(); }

    torch::nn::Sequential features{nullptr};
    torch::nn::Linear classifier{nullptr};

private:
    TeacherConfig config_;
    std::atomic<std::uint64_t> invocations_{0};
};
TORCH_MODULE(Teacher);

/// Stacks encoded L (N×1×s×s) and ab (N×2×s×s) into the critic's N×3×s×s input.
torch::Tensor stack_lab(const torch::Tensor& L, const torch::Tensor& ab);

/// N×1×s×s → N×3×s×s with identical channels.
torch::Tensor triplicate(const torch::Tensor& L);

struct NamedParameter {
    std::string name;
    torch::Tensor tensor;
};

/// Disjoint named parameter groups of the generator and critic.
struct ParameterPartition {
    std::vector<NamedParameter> shared;
    std::vector<NamedParameter> color_branch;
    std::vector<NamedParameter> class_branch;
    std::vector<NamedParameter> fusion;
    std::vector<NamedParameter> critic;

    /// Generator groups by name: shared, color_branch, class_branch, fusion.
    std::map<std::string, const std::vector<NamedParameter>*> generator_groups() const;
    std::int64_t generator_numel() const;
};

/// Throws PartitionError if any parameter cannot be assigned to a group.
ParameterPartition parameter_partition(Generator& generator, PatchCritic& critic);

/// Seeded construction; backbone copied from `backbone_weights` when given.
Generator make_generator(const GeneratorConfig& config, std::uint64_t seed,
                         const std::optional<std::filesystem::path>& backbone_weights = std::nullopt);
PatchCritic make_critic(const CriticConfig& config, std::uint64_t seed);
Teacher make_teacher(const TeacherConfig& config);

/// Copies backbone tensors out of an archive whose names match
/// `generator->backbone` parameter names ("0.weight", ...). Throws
/// WeightLoadError naming the first missing or mis-shaped layer.
void load_backbone(Generator& generator, const TensorArchive& weights);
void load_backbone(Generator& generator, const std::filesystem::path& weights);
TensorArchive backbone_archive(Generator& generator);

/// Every parameter and buffer, keyed by module path.
void export_module(torch::nn::Module& module, const std::string& prefix, TensorArchive& archive);
/// Inverse of export_module; every parameter and buffer must be present with
/// identical shape. Throws FormatError.
void import_module(torch::nn::Module& module, const std::string& prefix, const TensorArchive& archive);

}  // namespace chroma
