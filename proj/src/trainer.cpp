#include "chroma/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "chroma/error.hpp"

namespace chroma {
namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t penalty_seed(std::uint64_t seed, std::int64_t step, int critic_iter) {
    return splitmix64(splitmix64(seed ^ 0xC0FFEEull) + static_cast<std::uint64_t>(step) * 64 +
                      static_cast<std::uint64_t>(critic_iter));
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (!in || !(in >> std::ws).eof()) throw ConfigError("bad value for '" + key + "': " + value);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("bad boolean for '" + key + "': " + value);
}

torch::optim::AdamOptions adam_options(const TrainConfig& c) {
    return torch::optim::AdamOptions(c.lr).betas({c.beta1, c.beta2});
}

void export_optimizer(torch::optim::Adam& opt, const std::string& prefix, TensorArchive& archive) {
    const auto& params = opt.param_groups().at(0).params();
    auto& state = opt.state();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto it = state.find(params[i].unsafeGetTensorImpl());
        if (it == state.end()) continue;
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        const std::string key = prefix + std::to_string(i);
        archive.put(key + ".step", torch::tensor(static_cast<std::int64_t>(s.step()), torch::kInt64));
        archive.put(key + ".exp_avg", s.exp_avg());
        archive.put(key + ".exp_avg_sq", s.exp_avg_sq());
    }
}

void import_optimizer(torch::optim::Adam& opt, const std::string& prefix, const TensorArchive& archive) {
    const auto& params = opt.param_groups().at(0).params();
    auto& state = opt.state();
    state.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string key = prefix + std::to_string(i);
        if (!archive.contains(key + ".step")) continue;
        const auto& avg = archive.get(key + ".exp_avg");
        const auto& avg_sq = archive.get(key + ".exp_avg_sq");
        if (avg.sizes() != params[i].sizes() || avg_sq.sizes() != params[i].sizes()) {
            throw FormatError("optimizer moment '" + key + "' does not match its parameter");
        }
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(archive.get(key + ".step").item<std::int64_t>());
        s->exp_avg(avg.clone());
        s->exp_avg_sq(avg_sq.clone());
        state[params[i].unsafeGetTensorImpl()] = std::move(s);
    }
}

void check_finite(const torch::Tensor& value, const char* term, std::int64_t step) {
    const double v = value.item<double>();
    if (!std::isfinite(v)) throw TrainingError(term, step, "non-finite value " + fmt_double(v));
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_class: return "no_class";
        case Variant::no_adversarial: return "no_adversarial";
    }
    return "full";
}

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::full;
    if (name == "no_class") return Variant::no_class;
    if (name == "no_adversarial") return Variant::no_adversarial;
    throw ConfigError("unknown variant '" + name + "' (expected full, no_class or no_adversarial)");
}

TrainConfig TrainConfig::reference_profile() { return TrainConfig{}; }

TrainConfig TrainConfig::desk_profile() {
    TrainConfig c;
    c.side = 64;
    c.num_classes = 10;
    c.batch_size = 4;
    c.lr = 2e-5;
    return c;
}

LossWeights TrainConfig::effective_weights() const {
    LossWeights w = weights;
    if (variant == Variant::no_class) w.lambda_s = 0.0;
    if (variant == Variant::no_adversarial) w.lambda_g = 0.0;
    return w;
}

GeneratorConfig TrainConfig::generator_config() const {
    GeneratorConfig g;
    g.input_side = side;
    g.num_classes = num_classes;
    return width_divisor > 1 ? g.narrowed(width_divisor) : g;
}

CriticConfig TrainConfig::critic_config() const {
    CriticConfig c;
    if (width_divisor > 1) {
        for (int& w : c.widths) w = std::max(1, w / width_divisor);
    }
    return c;
}

TeacherConfig TrainConfig::teacher_config() const {
    TeacherConfig t;
    t.num_classes = num_classes;
    t.seed = teacher_seed;
    return t;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("beta1 and beta2 must lie in [0, 1)");
    }
    if (critic_steps_per_gen_step < 1) throw ConfigError("critic_steps_per_gen_step must be >= 1");
    if (width_divisor < 1) throw ConfigError("width_divisor must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    weights.validate();
    generator_config().validate();
}

std::string TrainConfig::to_text() const {
    std::ostringstream os;
    os << "epochs = " << epochs << '\n'
       << "batch_size = " << batch_size << '\n'
       << "lr = " << fmt_double(lr) << '\n'
       << "beta1 = " << fmt_double(beta1) << '\n'
       << "beta2 = " << fmt_double(beta2) << '\n'
       << "critic_steps_per_gen_step = " << critic_steps_per_gen_step << '\n'
       << "lambda_g = " << fmt_double(weights.lambda_g) << '\n'
       << "lambda_s = " << fmt_double(weights.lambda_s) << '\n'
       << "gp_weight = " << fmt_double(weights.gp_weight) << '\n'
       << "seed = " << seed << '\n'
       << "side = " << side << '\n'
       << "num_classes = " << num_classes << '\n'
       << "variant = " << to_string(variant) << '\n'
       << "width_divisor = " << width_divisor << '\n'
       << "teacher_seed = " << teacher_seed << '\n'
       << "backbone_weights = " << backbone_weights << '\n'
       << "workers = " << workers << '\n'
       << "checkpoint_every = " << checkpoint_every << '\n'
       << "shuffle = " << (shuffle ? "true" : "false") << '\n';
    return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
    TrainConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "profile") {
            if (value == "desk") c = desk_profile();
            else if (value == "reference") c = reference_profile();
            else throw ConfigError("unknown profile '" + value + "'");
        } else if (key == "epochs") c.epochs = parse_number<int>(key, value);
        else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
        else if (key == "lr") c.lr = parse_number<double>(key, value);
        else if (key == "beta1") c.beta1 = parse_number<double>(key, value);
        else if (key == "beta2") c.beta2 = parse_number<double>(key, value);
        else if (key == "critic_steps_per_gen_step") c.critic_steps_per_gen_step = parse_number<int>(key, value);
        else if (key == "lambda_g") c.weights.lambda_g = parse_number<double>(key, value);
        else if (key == "lambda_s") c.weights.lambda_s = parse_number<double>(key, value);
        else if (key == "gp_weight") c.weights.gp_weight = parse_number<double>(key, value);
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "side") c.side = parse_number<int>(key, value);
        else if (key == "num_classes") c.num_classes = parse_number<int>(key, value);
        else if (key == "variant") c.variant = parse_variant(value);
        else if (key == "width_divisor") c.width_divisor = parse_number<int>(key, value);
        else if (key == "teacher_seed") c.teacher_seed = parse_number<std::uint64_t>(key, value);
        else if (key == "backbone_weights") c.backbone_weights = value;
        else if (key == "workers") c.workers = parse_number<int>(key, value);
        else if (key == "checkpoint_every") c.checkpoint_every = parse_number<int>(key, value);
        else if (key == "shuffle") c.shuffle = parse_bool(key, value);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

void TrainConfig::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config " + path.string());
    out << to_text();
}

// ---------------------------------------------------------------------------

TrainState init_state(const TrainConfig& config) {
    config.validate();
    TrainState s;
    s.config = config;
    s.teacher = make_teacher(config.teacher_config());
    std::optional<fs::path> backbone;
    if (!config.backbone_weights.empty()) backbone = fs::path(config.backbone_weights);
    s.generator = make_generator(config.generator_config(), config.seed, backbone);
    s.critic = make_critic(config.critic_config(), splitmix64(config.seed));
    s.generator_opt = std::make_unique<torch::optim::Adam>(s.generator->parameters(), adam_options(config));
    s.critic_opt = std::make_unique<torch::optim::Adam>(s.critic->parameters(), adam_options(config));
    return s;
}

std::pair<torch::Tensor, torch::Tensor> batch_tensors(const Batch& batch) {
    if (batch.size() == 0) throw ShapeError("empty batch");
    const int side = batch.side();
    const auto n = static_cast<std::int64_t>(batch.size());
    torch::Tensor L = torch::empty({n, 1, side, side});
    torch::Tensor ab = torch::empty({n, 2, side, side});
    const auto plane = static_cast<std::size_t>(side) * side;
    for (std::int64_t i = 0; i < n; ++i) {
        const Sample& s = batch.samples[i];
        if (s.side != side || s.input_L.size() != plane || s.target_ab.size() != 2 * plane) {
            throw ShapeError("batch samples disagree on side or plane size");
        }
        std::memcpy(L[i].data_ptr<float>(), s.input_L.data(), plane * sizeof(float));
        std::memcpy(ab[i].data_ptr<float>(), s.target_ab.data(), 2 * plane * sizeof(float));
    }
    return {L, ab};
}

LossReport train_step(TrainState& state, const Batch& batch) {
    const TrainConfig& cfg = state.config;
    const LossWeights w = cfg.effective_weights();
    const bool adversarial = cfg.variant != Variant::no_adversarial;
    const bool use_teacher = cfg.variant != Variant::no_class;
    const std::int64_t step = state.step;

    auto [L, real_ab] = batch_tensors(batch);
    if (L.size(2) != cfg.side) {
        throw ShapeError("batch side " + std::to_string(L.size(2)) + " != configured side " +
                         std::to_string(cfg.side));
    }
    state.generator->train();
    state.critic->train();

    GeneratorOutput out = state.generator->forward(L);
    LossReport report;

    PatchCritic critic = state.critic;
    const CriticFn critic_fn = [critic](const torch::Tensor& x) mutable { return critic->forward(x); };

    if (adversarial) {
        const torch::Tensor real = stack_lab(L, real_ab);
        const torch::Tensor fake = stack_lab(L, out.ab.detach());
        for (int k = 0; k < cfg.critic_steps_per_gen_step; ++k) {
            CriticTerms terms = critic_objective(critic_fn, real, fake, w, penalty_seed(cfg.seed, step, k));
            check_finite(terms.total, "total_critic", step);
            check_finite(terms.penalty, "gradient_penalty", step);
            state.critic_opt->zero_grad();
            terms.total.backward();
            state.critic_opt->step();
            report.critic_real = terms.real_score.item<double>();
            report.critic_fake = terms.fake_score.item<double>();
            report.gradient_penalty = terms.penalty.item<double>();
            report.total_critic = terms.total.item<double>();
        }
    }

    torch::Tensor target;
    if (use_teacher) target = state.teacher->forward(L);

    GeneratorTerms terms;
    {
        FrozenParameters frozen(*state.critic);
        terms = generator_objective(out.ab, real_ab, L, out.class_dist, target,
                                    adversarial ? critic_fn : CriticFn{}, w);
    }
    check_finite(terms.color, "color_error", step);
    check_finite(terms.kl, "class_kl", step);
    check_finite(terms.adversarial, "adv_generator", step);
    check_finite(terms.total, "total_generator", step);
    state.generator_opt->zero_grad();
    terms.total.backward();
    state.generator_opt->step();

    report.color_error = terms.color.item<double>();
    report.class_kl = terms.kl.item<double>();
    report.adv_generator = terms.adversarial.item<double>();
    report.total_generator = terms.total.item<double>();
    ++state.step;
    return report;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const TrainState& state, const fs::path& path) {
    TensorArchive archive;
    auto& s = const_cast<TrainState&>(state);
    export_module(*s.generator, "generator.", archive);
    export_module(*s.critic, "critic.", archive);
    export_module(*s.teacher, "teacher.", archive);
    export_optimizer(*s.generator_opt, "generator_opt.", archive);
    export_optimizer(*s.critic_opt, "critic_opt.", archive);
    archive.metadata()["checkpoint_version"] = std::to_string(kCheckpointVersion);
    archive.metadata()["step"] = std::to_string(state.step);
    archive.metadata()["config"] = state.config.to_text();
    try {
        archive.save(path);
    } catch (const FormatError& e) {
        throw CheckpointError(e.what());
    }
}

TrainState load_checkpoint(const fs::path& path) {
    try {
        const TensorArchive archive = TensorArchive::load(path);
        const auto& meta = archive.metadata();
        const auto version = meta.find("checkpoint_version");
        if (version == meta.end()) throw CheckpointError(path.string() + ": not a training checkpoint");
        if (version->second != std::to_string(kCheckpointVersion)) {
            throw CheckpointError(path.string() + ": checkpoint version " + version->second + ", expected " +
                                  std::to_string(kCheckpointVersion));
        }
        TrainConfig config = TrainConfig::from_text(meta.at("config"));
        // Weights come from the checkpoint, not the original backbone file.
        config.backbone_weights.clear();
        TrainState state = init_state(config);
        import_module(*state.generator, "generator.", archive);
        import_module(*state.critic, "critic.", archive);
        import_module(*state.teacher, "teacher.", archive);
        import_optimizer(*state.generator_opt, "generator_opt.", archive);
        import_optimizer(*state.critic_opt, "critic_opt.", archive);
        state.step = std::stoll(meta.at("step"));
        return state;
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

FitResult fit(const TrainConfig& config, const Corpus& corpus, const FitOptions& options) {
    fs::create_directories(options.out_dir);
    TrainState state;
    if (options.resume_from) {
        state = load_checkpoint(*options.resume_from);
        state.config.epochs = config.epochs;
    } else {
        state = init_state(config);
    }
    const TrainConfig& cfg = state.config;

    std::optional<std::uint64_t> shuffle_seed;
    if (cfg.shuffle) shuffle_seed = cfg.seed;
    BatchIterator batches(corpus, cfg.batch_size, shuffle_seed, cfg.side, cfg.workers);
    const auto per_epoch = static_cast<std::int64_t>(batches.batches_per_epoch());

    FitResult result;
    result.metrics_log = options.out_dir / "metrics.log";
    result.checkpoint = options.out_dir / "latest.chk";
    std::ofstream log(result.metrics_log, std::ios::app);
    if (!log) throw ConfigError("cannot open metrics log " + result.metrics_log.string());

    bool stop = false;
    std::int64_t saved_at = -1;
    for (auto epoch = static_cast<int>(state.step / per_epoch); epoch < cfg.epochs && !stop; ++epoch) {
        for (std::int64_t index = state.step - epoch * per_epoch; index < per_epoch && !stop; ++index) {
            Batch batch;
            LossReport report;
            const std::int64_t step = state.step;
            try {
                batch = batches.load_batch(epoch, static_cast<std::size_t>(index));
                report = train_step(state, batch);
            } catch (const TrainingError&) {
                throw;
            } catch (const Error& e) {
                throw Error("epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ": " + e.what());
            }
            log << report.to_log_line(step) << '\n';
            log.flush();
            if (options.on_step && !options.on_step(step, report)) stop = true;
        }
        const bool epoch_done = state.step % per_epoch == 0;
        if (epoch_done && !stop && (epoch + 1) % cfg.checkpoint_every == 0) {
            save_checkpoint(state, result.checkpoint);
            saved_at = state.step;
        }
    }
    if (saved_at != state.step) save_checkpoint(state, result.checkpoint);
    result.state = std::move(state);
    return result;
}

}  // namespace chroma
