#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include <torch/torch.h>

namespace chroma {

/// Weights of the total objective: color + lambda_g·adversarial + lambda_s·KL.
/// gp_weight scales the gradient penalty in the critic objective.
struct LossWeights {
    double lambda_g = 0.1;
    double lambda_s = 0.003;
    double gp_weight = 1.0;

    /// Throws ConfigError if any weight is negative or non-finite.
    void validate() const;
};

/// Per-step scalars. adv_generator is −mean D(L, predicted ab).
struct LossReport {
    double color_error = 0.0;
    double class_kl = 0.0;
    double adv_generator = 0.0;
    double critic_real = 0.0;
    double critic_fake = 0.0;
    double gradient_penalty = 0.0;
    double total_generator = 0.0;
    double total_critic = 0.0;

    /// Field names and values in log order.
    std::map<std::string, double> fields() const;
    /// Empty when every field is finite, else the first offending name.
    std::string first_non_finite() const;

    /// "step=<n> color_error=<v> ..." with round-trippable float formatting.
    std::string to_log_line(std::int64_t step) const;
    static LossReport from_log_line(const std::string& line, std::int64_t* step = nullptr);

    bool operator==(const LossReport&) const = default;
};

/// A critic maps an N×… batch to scores whose leading dimension is N.
using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// Mean over batch and pixels of the squared Euclidean distance between
/// N×2×H×W chroma maps. Throws ShapeError.
torch::Tensor color_error(const torch::Tensor& pred_ab, const torch::Tensor& real_ab);

/// Batch mean of KL(target ‖ pred) over N×m rows; pred is floored at 1e-8 and
/// 0·log 0 = 0. Throws ShapeError.
torch::Tensor class_kl(const torch::Tensor& target, const torch::Tensor& pred);

inline constexpr double kProbabilityFloor = 1e-8;

/// One Uniform[0,1) draw per sample, reproducible for a given seed.
torch::Tensor interpolation_weights(std::int64_t n, std::uint64_t seed,
                                    torch::ScalarType dtype = torch::kFloat32);

/// Per-sample critic score: patch maps are averaged, per-sample vectors pass through.
torch::Tensor per_sample_score(const torch::Tensor& scores);

/// mean_i (‖∇ D(Î_i)‖₂ − 1)², Î_i = u_i·real_i + (1−u_i)·fake_i, u_i ~ U[0,1).
/// The returned tensor keeps its graph so it can be differentiated w.r.t. the
/// critic's parameters. Throws ConfigError when autograd is disabled.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::uint64_t seed);

struct CriticTerms {
    torch::Tensor total;     // −(mean D(real) − mean D(fake)) + gp_weight·gp
    torch::Tensor real_score;
    torch::Tensor fake_score;
    torch::Tensor penalty;
};

CriticTerms critic_objective(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                             const LossWeights& weights, std::uint64_t seed);

struct GeneratorTerms {
    torch::Tensor total;
    torch::Tensor color;
    torch::Tensor adversarial;  // −mean D(L, pred); zero when not evaluated
    torch::Tensor kl;           // zero when not evaluated
};

template <typename T>
T weighted_generator_total(const T& color, const T& adversarial, const T& kl, const LossWeights& w) {
    return color + adversarial * w.lambda_g + kl * w.lambda_s;
}

/// color + lambda_g·(−mean D(L, pred_ab)) + lambda_s·KL(target ‖ pred_dist).
/// The adversarial term is zero when `critic` is empty and the KL term is zero
/// when `target_dist` is undefined; neither input is touched in that case.
GeneratorTerms generator_objective(const torch::Tensor& pred_ab, const torch::Tensor& real_ab,
                                   const torch::Tensor& L, const torch::Tensor& pred_dist,
                                   const torch::Tensor& target_dist, const CriticFn& critic,
                                   const LossWeights& weights);

/// Turns off requires_grad on a module's parameters for the guard's lifetime.
class FrozenParameters {
public:
    explicit FrozenParameters(torch::nn::Module& module);
    ~FrozenParameters();
    FrozenParameters(const FrozenParameters&) = delete;
    FrozenParameters& operator=(const FrozenParameters&) = delete;

private:
    std::vector<std::pair<torch::Tensor, bool>> saved_;
};

}  // namespace chroma
