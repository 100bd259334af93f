#include "chroma/networks.hpp"

#include <algorithm>
#include <sstream>

#include "chroma/error.hpp"

namespace chroma {
namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

std::string shape_str(torch::IntArrayRef s) {
    std::ostringstream os;
    os << s;
    return os.str();
}

nn::Conv2d conv3x3(int in, int out, int stride = 1) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

void conv_bn_relu(nn::Sequential& seq, int in, int out, int stride = 1) {
    seq->push_back(conv3x3(in, out, stride));
    seq->push_back(nn::BatchNorm2d(out));
    seq->push_back(nn::ReLU());
}

int halve_ceil(int s) { return (s + 1) / 2; }  // 3×3, stride 2, pad 1

void check_positive(const std::vector<int>& widths, const char* what) {
    for (int w : widths) {
        if (w < 1) throw ConfigError(std::string(what) + " widths must be positive");
    }
}

}  // namespace

void GeneratorConfig::validate() const {
    if (input_side < 8 || input_side % 8 != 0) {
        throw ConfigError("input_side must be a positive multiple of 8, got " + std::to_string(input_side));
    }
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (backbone_widths.size() != 4 || backbone_convs.size() != 4) {
        throw ConfigError("backbone has exactly four stages ending at side/8");
    }
    if (color_widths.size() != 2) throw ConfigError("color branch has two conv modules");
    if (class_fc_widths.size() != 3) throw ConfigError("class branch has three fully-connected layers");
    if (head_widths.size() != 6) throw ConfigError("fusion head has six conv modules");
    check_positive(backbone_widths, "backbone");
    check_positive(backbone_convs, "backbone conv count");
    check_positive(color_widths, "color branch");
    check_positive(class_fc_widths, "class branch");
    check_positive(head_widths, "head");
    if (class_conv_width < 1) throw ConfigError("class conv width must be positive");
}

int GeneratorConfig::class_grid_side() const { return halve_ceil(halve_ceil(fusion_side())); }

GeneratorConfig GeneratorConfig::narrowed(int factor) const {
    GeneratorConfig c = *this;
    auto shrink = [factor](std::vector<int>& v) {
        for (int& w : v) w = std::max(1, w / factor);
    };
    shrink(c.backbone_widths);
    shrink(c.color_widths);
    shrink(c.class_fc_widths);
    shrink(c.head_widths);
    c.class_conv_width = std::max(1, c.class_conv_width / factor);
    return c;
}

void CriticConfig::validate() const {
    if (in_channels < 1) throw ConfigError("critic in_channels must be positive");
    if (widths.size() != 4) throw ConfigError("critic has four hidden conv layers");
    check_positive(widths, "critic");
}

// ---------------------------------------------------------------------------

GeneratorImpl::GeneratorImpl(GeneratorConfig config) : config_(std::move(config)) {
    config_.validate();
    reset();
}

void GeneratorImpl::reset() {
    const auto& c = config_;

    nn::Sequential bb;
    int in = 3;
    for (std::size_t stage = 0; stage < 4; ++stage) {
        if (stage > 0) bb->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2)));
        for (int k = 0; k < c.backbone_convs[stage]; ++k) {
            bb->push_back(conv3x3(in, c.backbone_widths[stage]));
            bb->push_back(nn::ReLU());
            in = c.backbone_widths[stage];
        }
    }
    backbone = register_module("backbone", bb);
    const int features = in;

    nn::Sequential color;
    conv_bn_relu(color, features, c.color_widths[0]);
    conv_bn_relu(color, c.color_widths[0], c.color_widths[1]);
    color_branch = register_module("color_branch", color);

    nn::Sequential cconv;
    conv_bn_relu(cconv, features, c.class_conv_width, 2);
    conv_bn_relu(cconv, c.class_conv_width, c.class_conv_width, 1);
    conv_bn_relu(cconv, c.class_conv_width, c.class_conv_width, 2);
    conv_bn_relu(cconv, c.class_conv_width, c.class_conv_width, 1);
    class_conv = register_module("class_conv", cconv);

    const int grid = c.class_grid_side();
    nn::Sequential fc;
    fc->push_back(nn::Flatten());
    int width = c.class_conv_width * grid * grid;
    for (int out : c.class_fc_widths) {
        fc->push_back(nn::Linear(width, out));
        fc->push_back(nn::ReLU());
        width = out;
    }
    class_fc = register_module("class_fc", fc);
    class_head = register_module("class_head", nn::Linear(width, c.num_classes));

    nn::Sequential head;
    in = c.color_widths[1] + c.class_fc_widths.back();
    for (std::size_t i = 0; i < c.head_widths.size(); ++i) {
        head->push_back(conv3x3(in, c.head_widths[i]));
        head->push_back(nn::ReLU());
        in = c.head_widths[i];
        if (i == 1 || i == 3) {
            head->push_back(nn::Upsample(
                nn::UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest)));
        }
    }
    head->push_back(conv3x3(in, 2));
    head->push_back(nn::Tanh());
    fusion = register_module("fusion", head);
}

GeneratorOutput GeneratorImpl::forward(const torch::Tensor& L) {
    const int side = config_.input_side;
    if (L.dim() != 4 || L.size(1) != 1 || L.size(2) != side || L.size(3) != side) {
        throw ShapeError("generator expects N×1×" + std::to_string(side) + "×" + std::to_string(side) +
                         " luminance, got " + shape_str(L.sizes()));
    }
    const torch::Tensor features = backbone->forward(triplicate(L));

    const torch::Tensor color = color_branch->forward(features);
    const torch::Tensor global = class_fc->forward(class_conv->forward(features));
    const torch::Tensor class_dist = torch::softmax(class_head->forward(global), 1);

    const auto grid = features.size(2);
    const torch::Tensor tiled = global.unsqueeze(2).unsqueeze(3).expand({-1, -1, grid, grid});
    torch::Tensor ab = fusion->forward(torch::cat({color, tiled}, 1));
    ab = F::interpolate(ab, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{side, side})
                                .mode(torch::kBilinear)
                                .align_corners(false));
    return {ab, class_dist};
}

// ---------------------------------------------------------------------------

PatchCriticImpl::PatchCriticImpl(CriticConfig config) : config_(std::move(config)) {
    config_.validate();
    reset();
}

void PatchCriticImpl::reset() {
    const auto& w = config_.widths;
    const auto act = [this] {
        return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(config_.leaky_slope));
    };
    nn::Sequential seq;
    int in = config_.in_channels;
    for (int i = 0; i < 3; ++i) {
        seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, w[i], 4).stride(2).padding(1)));
        seq->push_back(act());
        in = w[i];
    }
    seq->push_back(conv3x3(in, w[3]));
    seq->push_back(act());
    seq->push_back(conv3x3(w[3], 1));
    body = register_module("body", seq);
}

torch::Tensor PatchCriticImpl::forward(const torch::Tensor& lab) {
    if (lab.dim() != 4 || lab.size(1) != config_.in_channels) {
        throw ShapeError("critic expects N×" + std::to_string(config_.in_channels) + "×H×W, got " +
                         shape_str(lab.sizes()));
    }
    if (lab.size(2) % 8 != 0 || lab.size(3) % 8 != 0) {
        throw ShapeError("critic input sides must be multiples of 8, got " + shape_str(lab.sizes()));
    }
    return body->forward(lab).squeeze(1);
}

// ---------------------------------------------------------------------------

TeacherImpl::TeacherImpl(TeacherConfig config) : config_(std::move(config)) {
    if (config_.num_classes < 2) throw ConfigError("teacher num_classes must be >= 2");
    nn::Sequential seq;
    int in = 3;
    for (int w : config_.widths) {
        seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, w, 3).stride(2).padding(1)));
        seq->push_back(nn::ReLU());
        in = w;
    }
    seq->push_back(nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)));
    seq->push_back(nn::Flatten());
    features = register_module("features", seq);
    classifier = register_module("classifier", nn::Linear(in, config_.num_classes));
    for (auto& p : parameters()) p.set_requires_grad(false);
    eval();
}

torch::Tensor TeacherImpl::forward(const torch::Tensor& L) {
    if (L.dim() != 4 || L.size(1) != 1) {
        throw ShapeError("teacher expects N×1×H×W luminance, got " + shape_str(L.sizes()));
    }
    ++invocations_;
    torch::NoGradGuard no_grad;
    const torch::Tensor logits = classifier->forward(features->forward(triplicate(L)));
    return torch::softmax(logits * config_.logit_gain, 1);
}

// ---------------------------------------------------------------------------

torch::Tensor stack_lab(const torch::Tensor& L, const torch::Tensor& ab) { return torch::cat({L, ab}, 1); }

torch::Tensor triplicate(const torch::Tensor& L) { return L.expand({-1, 3, -1, -1}); }

std::map<std::string, const std::vector<NamedParameter>*> ParameterPartition::generator_groups() const {
    return {{"shared", &shared}, {"color_branch", &color_branch}, {"class_branch", &class_branch}, {"fusion", &fusion}};
}

std::int64_t ParameterPartition::generator_numel() const {
    std::int64_t n = 0;
    for (const auto& [name, group] : generator_groups()) {
        for (const auto& p : *group) n += p.tensor.numel();
    }
    return n;
}

ParameterPartition parameter_partition(Generator& generator, PatchCritic& critic) {
    ParameterPartition part;
    const std::vector<std::pair<std::string, std::vector<NamedParameter>*>> routes = {
        {"backbone.", &part.shared},
        {"color_branch.", &part.color_branch},
        {"class_conv.", &part.class_branch},
        {"class_fc.", &part.class_branch},
        {"class_head.", &part.class_branch},
        {"fusion.", &part.fusion},
    };
    for (const auto& item : generator->named_parameters(true)) {
        bool placed = false;
        for (const auto& [prefix, group] : routes) {
            if (item.key().rfind(prefix, 0) == 0) {
                group->push_back({item.key(), item.value()});
                placed = true;
                break;
            }
        }
        if (!placed) throw PartitionError("generator parameter '" + item.key() + "' belongs to no group");
    }
    for (const auto& item : critic->named_parameters(true)) part.critic.push_back({item.key(), item.value()});
    return part;
}

// ---------------------------------------------------------------------------

Generator make_generator(const GeneratorConfig& config, std::uint64_t seed,
                         const std::optional<std::filesystem::path>& backbone_weights) {
    torch::manual_seed(seed);
    Generator g(config);
    if (backbone_weights) load_backbone(g, *backbone_weights);
    return g;
}

PatchCritic make_critic(const CriticConfig& config, std::uint64_t seed) {
    torch::manual_seed(seed);
    return PatchCritic(config);
}

Teacher make_teacher(const TeacherConfig& config) {
    torch::manual_seed(config.seed);
    return Teacher(config);
}

void load_backbone(Generator& generator, const TensorArchive& weights) {
    // Validate everything before touching the model so a bad file leaves it intact.
    const auto params = generator->backbone->named_parameters(true);
    for (const auto& item : params) {
        if (!weights.contains(item.key())) {
            throw WeightLoadError("backbone weights missing layer '" + item.key() + "'");
        }
        const auto& src = weights.get(item.key());
        if (src.sizes() != item.value().sizes()) {
            throw WeightLoadError("backbone layer '" + item.key() + "' has shape " + shape_str(src.sizes()) +
                                  ", model expects " + shape_str(item.value().sizes()));
        }
    }
    torch::NoGradGuard no_grad;
    for (const auto& item : params) {
        item.value().copy_(weights.get(item.key()).to(item.value().scalar_type()));
    }
}

void load_backbone(Generator& generator, const std::filesystem::path& weights) {
    TensorArchive archive;
    try {
        archive = TensorArchive::load(weights);
    } catch (const FormatError& e) {
        throw WeightLoadError(e.what());
    }
    load_backbone(generator, archive);
}

TensorArchive backbone_archive(Generator& generator) {
    TensorArchive archive;
    for (const auto& item : generator->backbone->named_parameters(true)) archive.put(item.key(), item.value());
    archive.metadata()["kind"] = "backbone";
    return archive;
}

void export_module(torch::nn::Module& module, const std::string& prefix, TensorArchive& archive) {
    for (const auto& item : module.named_parameters(true)) archive.put(prefix + item.key(), item.value());
    for (const auto& item : module.named_buffers(true)) archive.put(prefix + item.key(), item.value());
}

void import_module(torch::nn::Module& module, const std::string& prefix, const TensorArchive& archive) {
    auto check = [&](const std::string& key, const torch::Tensor& dst) {
        const std::string name = prefix + key;
        if (!archive.contains(name)) throw FormatError("archive missing '" + name + "'");
        if (archive.get(name).sizes() != dst.sizes()) {
            throw FormatError("archive entry '" + name + "' has shape " + shape_str(archive.get(name).sizes()) +
                              ", expected " + shape_str(dst.sizes()));
        }
    };
    const auto params = module.named_parameters(true);
    const auto buffers = module.named_buffers(true);
    for (const auto& item : params) check(item.key(), item.value());
    for (const auto& item : buffers) check(item.key(), item.value());

    torch::NoGradGuard no_grad;
    for (const auto& item : params) item.value().copy_(archive.get(prefix + item.key()));
    for (const auto& item : buffers) item.value().copy_(archive.get(prefix + item.key()));
}

}  // namespace chroma
