#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <torch/torch.h>

#include "chroma/error.hpp"
#include "chroma/losses.hpp"
#include "chroma/networks.hpp"
#include "oracles.hpp"

using namespace chroma;

namespace {

torch::Tensor random_dist(std::int64_t n, std::int64_t m) { return torch::softmax(torch::randn({n, m}) * 3, 1); }

torch::Tensor one_hot_rows(std::int64_t n, std::int64_t m) {
    auto t = torch::zeros({n, m});
    for (std::int64_t i = 0; i < n; ++i) t[i][i % m] = 1.0;
    return t;
}

}  // namespace

TEST_CASE("color error closed forms") {
    torch::manual_seed(0);
    const auto x = torch::randn({3, 2, 8, 8});
    CHECK(color_error(x, x).item<double>() == 0.0);

    for (double c : {0.25, -0.5, 1.5}) {
        CAPTURE(c);
        const auto xd = x.to(torch::kFloat64);
        CHECK(std::abs(color_error(xd + c, xd).item<double>() - 2 * c * c) <= 1e-6);
    }
    const auto y = torch::randn({3, 2, 8, 8});
    CHECK(color_error(x, y).item<double>() == color_error(y, x).item<double>());
    CHECK(color_error(x, y).item<double>() > 0.0);

    CHECK_THROWS_AS(color_error(x, torch::zeros({3, 2, 8, 4})), ShapeError);
    CHECK_THROWS_AS(color_error(torch::zeros({3, 3, 8, 8}), torch::zeros({3, 3, 8, 8})), ShapeError);
}

TEST_CASE("class KL closed forms") {
    torch::manual_seed(1);
    const auto p = random_dist(4, 10);
    CHECK(std::abs(class_kl(p, p).item<double>()) <= 1e-6);

    for (std::int64_t m : {4, 10, 1000}) {
        CAPTURE(m);
        const auto target = one_hot_rows(3, m).to(torch::kFloat64);
        const auto uniform = torch::full({3, m}, 1.0 / static_cast<double>(m), torch::kFloat64);
        CHECK(std::abs(class_kl(target, uniform).item<double>() - std::log(double(m))) <= 1e-6);
    }

    // Zero-probability predictions are floored rather than producing infinity.
    const auto target = one_hot_rows(1, 3);
    const auto pred = torch::tensor({{0.0f, 0.5f, 0.5f}});
    const double kl = class_kl(target, pred).item<double>();
    CHECK(std::isfinite(kl));
    CHECK(kl == doctest::Approx(-std::log(kProbabilityFloor)).epsilon(1e-5));

    CHECK_THROWS_AS(class_kl(random_dist(2, 4), random_dist(2, 5)), ShapeError);
}

TEST_CASE("class KL is non-negative") {
    torch::manual_seed(2);
    const auto a = random_dist(1000, 10);
    const auto b = random_dist(1000, 10);
    for (std::int64_t i = 0; i < 1000; ++i) {
        CHECK(class_kl(a.slice(0, i, i + 1), b.slice(0, i, i + 1)).item<double>() >= -1e-7);
    }
}

TEST_CASE("gradient penalty of analytic critics") {
    torch::manual_seed(3);
    const auto real = torch::randn({4, 3, 16, 16}, torch::kFloat64);
    const auto fake = torch::randn({4, 3, 16, 16}, torch::kFloat64);
    CHECK(std::abs(gradient_penalty(oracles::linear_critic(1.0), real, fake, 1).item<double>()) <= 1e-6);
    CHECK(std::abs(gradient_penalty(oracles::constant_critic(), real, fake, 1).item<double>() - 1.0) <= 1e-6);
    CHECK(std::abs(gradient_penalty(oracles::linear_critic(0.0), real, fake, 1).item<double>() - 1.0) <= 1e-6);
    CHECK(std::abs(gradient_penalty(oracles::linear_critic(2.0), real, fake, 1).item<double>() - 1.0) <= 1e-6);

    // Patch-map critics are averaged per sample before differentiation.
    const CriticFn patchy = [](const torch::Tensor& x) { return x.narrow(1, 0, 1).squeeze(1) * 16.0; };
    CHECK(std::abs(gradient_penalty(patchy, real, fake, 5).item<double>()) <= 1e-6);
}

TEST_CASE("gradient penalty needs autograd") {
    const auto x = torch::randn({2, 3, 8, 8});
    {
        torch::NoGradGuard ng;
        CHECK_THROWS_AS(gradient_penalty(oracles::linear_critic(1.0), x, x, 0), ConfigError);
    }
    {
        torch::InferenceMode im;
        CHECK_THROWS_AS(gradient_penalty(oracles::linear_critic(1.0), x, x, 0), ConfigError);
    }
    CHECK_THROWS_AS(gradient_penalty(oracles::linear_critic(1.0), x, torch::zeros({2, 3, 8, 4}), 0), ShapeError);
}

TEST_CASE("interpolation weights are seeded uniforms") {
    const auto a = interpolation_weights(1000, 9, torch::kFloat64);
    CHECK(torch::equal(a, interpolation_weights(1000, 9, torch::kFloat64)));
    CHECK_FALSE(torch::equal(a, interpolation_weights(1000, 10, torch::kFloat64)));
    CHECK(a.min().item<double>() >= 0.0);
    CHECK(a.max().item<double>() < 1.0);
    CHECK(std::abs(a.mean().item<double>() - 0.5) < 0.05);
}

TEST_CASE("critic objective arithmetic") {
    const std::int64_t n = 2, side = 8;
    const double elems = 3.0 * side * side;
    const auto real = torch::full({n, 3, side, side}, 3.0 / std::sqrt(elems), torch::kFloat64);
    const auto fake = torch::full({n, 3, side, side}, 1.0 / std::sqrt(elems), torch::kFloat64);
    const auto t = critic_objective(oracles::linear_critic(1.0), real, fake, LossWeights{}, 4);
    CHECK(std::abs(t.real_score.item<double>() - 3.0) <= 1e-9);
    CHECK(std::abs(t.fake_score.item<double>() - 1.0) <= 1e-9);
    CHECK(std::abs(t.penalty.item<double>()) <= 1e-9);
    CHECK(std::abs(t.total.item<double>() + 2.0) <= 1e-6);

    PatchCritic d = make_critic(CriticConfig{3, {8, 8, 8, 8}}, 1);
    const CriticFn fn = [d](const torch::Tensor& x) mutable { return d->forward(x); };
    const auto same = torch::randn({n, 3, 16, 16});
    const auto s = critic_objective(fn, same, same, LossWeights{}, 4);
    CHECK((s.real_score - s.fake_score).item<double>() == 0.0);
}

TEST_CASE("descending the critic objective widens the gap") {
    PatchCritic d = make_critic(CriticConfig{3, {8, 8, 8, 8}}, 6);
    const CriticFn fn = [d](const torch::Tensor& x) mutable { return d->forward(x); };
    torch::manual_seed(6);
    const auto real = torch::rand({4, 3, 16, 16});
    const auto fake = torch::rand({4, 3, 16, 16}) * 0.5;
    LossWeights w;
    w.gp_weight = 0.0;
    torch::optim::SGD opt(d->parameters(), torch::optim::SGDOptions(1e-3));
    auto gap = [&] {
        const auto t = critic_objective(fn, real, fake, w, 0);
        return (t.real_score - t.fake_score).item<double>();
    };
    const double before = gap();
    for (int i = 0; i < 5; ++i) {
        opt.zero_grad();
        critic_objective(fn, real, fake, w, 0).total.backward();
        opt.step();
    }
    CHECK(gap() > before);
}

TEST_CASE("critic gradient matches finite differences") {
    const auto r = oracles::critic_gradient_check();
    CHECK(r.parameters <= 1000);
    CHECK(r.relative_error < 1e-3);
}

TEST_CASE("generator objective weighting") {
    const LossWeights w;  // 0.1, 0.003
    CHECK(weighted_generator_total(2.0, 1.0, 3.0, w) == doctest::Approx(2.109).epsilon(1e-12));

    // Build tensors with color = 2, adversarial = 1, KL = 3.
    const auto L = torch::zeros({2, 1, 8, 8}, torch::kFloat64);
    const auto real = torch::zeros({2, 2, 8, 8}, torch::kFloat64);
    const auto pred = torch::ones({2, 2, 8, 8}, torch::kFloat64);
    const CriticFn minus_one = [](const torch::Tensor& x) { return torch::full({x.size(0)}, -1.0, x.options()); };
    const double q = std::exp(-3.0);
    const auto target = torch::tensor({{1.0, 0.0}, {1.0, 0.0}}, torch::kFloat64);
    const auto dist = torch::tensor({{q, 1 - q}, {q, 1 - q}}, torch::kFloat64);
    const auto t = generator_objective(pred, real, L, dist, target, minus_one, w);
    CHECK(t.color.item<double>() == doctest::Approx(2.0));
    CHECK(t.adversarial.item<double>() == doctest::Approx(1.0));
    CHECK(t.kl.item<double>() == doctest::Approx(3.0));
    CHECK(std::abs(t.total.item<double>() - 2.109) <= 1e-9);

    const LossWeights none{0.0, 0.0, 1.0};
    const auto plain = generator_objective(pred, real, L, dist, target, minus_one, none);
    CHECK(plain.total.item<double>() == plain.color.item<double>());
}

TEST_CASE("ablation weights cut their terms") {
    torch::manual_seed(8);
    const auto L = torch::rand({2, 1, 16, 16});
    const auto real = torch::rand({2, 2, 16, 16}) * 2 - 1;
    const auto pred = (torch::rand({2, 2, 16, 16}) * 2 - 1).requires_grad_(true);
    const auto dist = random_dist(2, 10).requires_grad_(true);
    PatchCritic d1 = make_critic(CriticConfig{3, {8, 8, 8, 8}}, 1);
    PatchCritic d2 = make_critic(CriticConfig{3, {8, 8, 8, 8}}, 2);
    const CriticFn c1 = [d1](const torch::Tensor& x) mutable { return d1->forward(x); };
    const CriticFn c2 = [d2](const torch::Tensor& x) mutable { return d2->forward(x); };

    SUBCASE("lambda_s = 0") {
        const LossWeights w{0.1, 0.0, 1.0};
        const auto a = generator_objective(pred, real, L, dist, random_dist(2, 10), c1, w);
        const auto b = generator_objective(pred, real, L, dist, random_dist(2, 10), c1, w);
        CHECK(a.total.item<double>() == b.total.item<double>());
        a.total.backward();
        CHECK((!dist.grad().defined() || dist.grad().abs().max().item<double>() == 0.0));
    }
    SUBCASE("lambda_g = 0") {
        const LossWeights w{0.0, 0.003, 1.0};
        const auto target = random_dist(2, 10);
        const auto a = generator_objective(pred, real, L, dist, target, c1, w);
        const auto b = generator_objective(pred, real, L, dist, target, c2, w);
        CHECK(a.total.item<double>() == b.total.item<double>());
    }
    SUBCASE("absent inputs are never touched") {
        const auto t = generator_objective(pred, real, L, dist, torch::Tensor(), CriticFn{}, LossWeights{});
        CHECK(t.kl.item<double>() == 0.0);
        CHECK(t.adversarial.item<double>() == 0.0);
        CHECK(t.total.item<double>() == t.color.item<double>());
    }
}

TEST_CASE("frozen parameters guard") {
    PatchCritic d = make_critic(CriticConfig{3, {4, 4, 4, 4}}, 0);
    {
        FrozenParameters f(*d);
        for (const auto& p : d->parameters()) CHECK_FALSE(p.requires_grad());
    }
    for (const auto& p : d->parameters()) CHECK(p.requires_grad());
}

TEST_CASE("loss weights validation") {
    CHECK_NOTHROW(LossWeights{}.validate());
    CHECK_THROWS_AS((LossWeights{-0.1, 0.003, 1.0}.validate()), ConfigError);
    CHECK_THROWS_AS((LossWeights{0.1, std::numeric_limits<double>::quiet_NaN(), 1.0}.validate()), ConfigError);
}

TEST_CASE("loss report log line round trip") {
    LossReport r;
    r.color_error = 0.1234567890123456789;
    r.class_kl = 1e-300;
    r.adv_generator = -3.0;
    r.critic_real = 1.0 / 3.0;
    r.critic_fake = -2.5e10;
    r.gradient_penalty = 0.0;
    r.total_generator = 7.0;
    r.total_critic = -0.0;
    const std::string line = r.to_log_line(42);
    CHECK(line.rfind("step=42 ", 0) == 0);
    std::int64_t step = -1;
    CHECK(LossReport::from_log_line(line, &step) == r);
    CHECK(step == 42);
    CHECK(r.fields().size() == 8);
    CHECK(r.first_non_finite().empty());
    r.class_kl = std::numeric_limits<double>::infinity();
    CHECK(r.first_non_finite() == "class_kl");
    CHECK_THROWS_AS(LossReport::from_log_line("garbage"), FormatError);
}
