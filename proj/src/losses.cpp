#include "chroma/losses.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "chroma/error.hpp"

namespace chroma {
namespace {

std::string shape_str(torch::IntArrayRef s) {
    std::ostringstream os;
    os << s;
    return os.str();
}

const char* const kFieldOrder[] = {"color_error",      "class_kl",        "adv_generator",
                                   "critic_real",      "critic_fake",     "gradient_penalty",
                                   "total_generator",  "total_critic"};

double* field_ptr(LossReport& r, const std::string& name) {
    if (name == "color_error") return &r.color_error;
    if (name == "class_kl") return &r.class_kl;
    if (name == "adv_generator") return &r.adv_generator;
    if (name == "critic_real") return &r.critic_real;
    if (name == "critic_fake") return &r.critic_fake;
    if (name == "gradient_penalty") return &r.gradient_penalty;
    if (name == "total_generator") return &r.total_generator;
    if (name == "total_critic") return &r.total_critic;
    return nullptr;
}

}  // namespace

void LossWeights::validate() const {
    for (double w : {lambda_g, lambda_s, gp_weight}) {
        if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and >= 0");
    }
}

std::map<std::string, double> LossReport::fields() const {
    std::map<std::string, double> out;
    LossReport copy = *this;
    for (const char* name : kFieldOrder) out[name] = *field_ptr(copy, name);
    return out;
}

std::string LossReport::first_non_finite() const {
    LossReport copy = *this;
    for (const char* name : kFieldOrder) {
        if (!std::isfinite(*field_ptr(copy, name))) return name;
    }
    return {};
}

std::string LossReport::to_log_line(std::int64_t step) const {
    LossReport copy = *this;
    std::string line = "step=" + std::to_string(step);
    char buf[64];
    for (const char* name : kFieldOrder) {
        std::snprintf(buf, sizeof(buf), " %s=%.17g", name, *field_ptr(copy, name));
        line += buf;
    }
    return line;
}

LossReport LossReport::from_log_line(const std::string& line, std::int64_t* step) {
    LossReport r;
    std::istringstream in(line);
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw FormatError("malformed metrics record: " + line);
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "step") {
            if (step) *step = std::stoll(value);
        } else if (double* f = field_ptr(r, key)) {
            *f = std::stod(value);
        }
    }
    return r;
}

torch::Tensor color_error(const torch::Tensor& pred_ab, const torch::Tensor& real_ab) {
    if (pred_ab.sizes() != real_ab.sizes()) {
        throw ShapeError("color_error shape mismatch: " + shape_str(pred_ab.sizes()) + " vs " +
                         shape_str(real_ab.sizes()));
    }
    if (pred_ab.dim() != 4 || pred_ab.size(1) != 2) {
        throw ShapeError("color_error expects N×2×H×W, got " + shape_str(pred_ab.sizes()));
    }
    return (pred_ab - real_ab).pow(2).sum(1).mean();
}

torch::Tensor class_kl(const torch::Tensor& target, const torch::Tensor& pred) {
    if (target.sizes() != pred.sizes() || target.dim() != 2) {
        throw ShapeError("class_kl expects matching N×m distributions, got " + shape_str(target.sizes()) +
                         " and " + shape_str(pred.sizes()));
    }
    const torch::Tensor log_pred = torch::log(pred.clamp_min(kProbabilityFloor));
    const torch::Tensor per_row = (torch::xlogy(target, target) - target * log_pred).sum(1);
    return per_row.mean();
}

torch::Tensor interpolation_weights(std::int64_t n, std::uint64_t seed, torch::ScalarType dtype) {
    std::mt19937_64 rng(seed);
    std::vector<double> u(static_cast<std::size_t>(n));
    for (auto& v : u) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return torch::tensor(u, torch::kFloat64).to(dtype);
}

torch::Tensor per_sample_score(const torch::Tensor& scores) {
    if (scores.dim() == 0) throw ShapeError("critic must return one score (or score map) per sample");
    return scores.dim() == 1 ? scores : scores.flatten(1).mean(1);
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::uint64_t seed) {
    if (real.sizes() != fake.sizes()) {
        throw ShapeError("gradient_penalty: real " + shape_str(real.sizes()) + " vs fake " +
                         shape_str(fake.sizes()));
    }
    if (!torch::GradMode::is_enabled() || c10::InferenceMode::is_enabled()) {
        throw ConfigError("gradient_penalty needs autograd; critic is evaluated with gradients disabled");
    }
    const std::int64_t n = real.size(0);
    std::vector<std::int64_t> bshape(static_cast<std::size_t>(real.dim()), 1);
    bshape[0] = n;
    const torch::Tensor u = interpolation_weights(n, seed, real.scalar_type()).view(bshape);
    const torch::Tensor interp = (u * real.detach() + (1.0 - u) * fake.detach()).requires_grad_(true);

    const torch::Tensor score = per_sample_score(critic(interp));
    torch::Tensor grad;
    if (score.requires_grad()) {
        grad = torch::autograd::grad({score.sum()}, {interp}, {}, /*retain_graph=*/true,
                                     /*create_graph=*/true, /*allow_unused=*/true)[0];
    }
    // A critic that ignores its input has zero gradient.
    if (!grad.defined()) grad = torch::zeros_like(interp);
    const torch::Tensor norms = grad.flatten(1).pow(2).sum(1).sqrt();
    return (norms - 1.0).pow(2).mean();
}

CriticTerms critic_objective(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                             const LossWeights& weights, std::uint64_t seed) {
    CriticTerms t;
    t.real_score = per_sample_score(critic(real)).mean();
    t.fake_score = per_sample_score(critic(fake.detach())).mean();
    t.penalty = gradient_penalty(critic, real, fake, seed);
    t.total = -(t.real_score - t.fake_score) + t.penalty * weights.gp_weight;
    return t;
}

GeneratorTerms generator_objective(const torch::Tensor& pred_ab, const torch::Tensor& real_ab,
                                   const torch::Tensor& L, const torch::Tensor& pred_dist,
                                   const torch::Tensor& target_dist, const CriticFn& critic,
                                   const LossWeights& weights) {
    GeneratorTerms t;
    t.color = color_error(pred_ab, real_ab);
    const torch::Tensor zero = torch::zeros({}, pred_ab.options());
    if (critic) {
        t.adversarial = -per_sample_score(critic(torch::cat({L, pred_ab}, 1))).mean();
    } else {
        t.adversarial = zero;
    }
    if (target_dist.defined()) {
        t.kl = class_kl(target_dist, pred_dist);
    } else {
        t.kl = zero;
    }
    t.total = weighted_generator_total(t.color, t.adversarial, t.kl, weights);
    return t;
}

FrozenParameters::FrozenParameters(torch::nn::Module& module) {
    for (auto& p : module.parameters(true)) {
        saved_.emplace_back(p, p.requires_grad());
        p.set_requires_grad(false);
    }
}

FrozenParameters::~FrozenParameters() {
    for (auto& [p, flag] : saved_) p.set_requires_grad(flag);
}

}  // namespace chroma
