#include "cotic/model.hpp"

#include <cmath>

#include <json.hpp>

#include "cotic/errors.hpp"

namespace cotic {

using nlohmann::json;

DilationSchedule DilationSchedule::parse(const std::string& text) {
    if (text == "doubling") return doubling();
    try {
        const std::size_t pos_check = text.find_first_not_of("0123456789");
        if (pos_check != std::string::npos) throw std::invalid_argument(text);
        const unsigned long v = std::stoul(text);
        if (v < 1) throw std::invalid_argument(text);
        return fixed_at(v);
    } catch (const std::exception&) {
        throw ConfigError("dilation must be 'doubling' or a positive integer, got '" + text +
                          "'");
    }
}

std::string DilationSchedule::str() const {
    return kind == Kind::Doubling ? "doubling" : std::to_string(fixed);
}

std::size_t ModelConfig::receptive_field() const {
    std::size_t dil_sum = 0;
    for (std::size_t l = 0; l < num_layers; ++l) dil_sum += dilation.at(l);
    return 1 + (kernel_size - 1) * dil_sum;
}

void ModelConfig::validate() const {
    if (num_types < 1) throw ConfigError("num_types must be at least 1");
    if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("widths must be positive");
    if (kernel_size < 1) throw ConfigError("kernel_size must be at least 1");
    if (!(leaky_slope > 0.0)) throw ConfigError("leaky_slope must be positive");
    if (!(time_scale > 0.0)) throw ConfigError("time_scale must be positive");
    if (init_rate < 0.0) throw ConfigError("init_rate must be non-negative");
}

std::string ModelConfig::to_json_string() const {
    json j;
    j["num_types"] = num_types;
    j["embed_dim"] = embed_dim;
    j["hidden_dim"] = hidden_dim;
    j["layers"] = num_layers;
    j["kernel_size"] = kernel_size;
    j["dilation"] = dilation.str();
    j["activation"] = to_string(kernel_activation);
    j["leaky_slope"] = leaky_slope;
    j["kernel_hidden"] = kernel_hidden;
    j["head_hidden"] = head_hidden;
    j["init_rate"] = init_rate;
    j["time_scale"] = time_scale;
    return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
    }
    ModelConfig cfg;
    try {
        cfg.num_types = j.at("num_types").get<int>();
        cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
        cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        cfg.num_layers = j.at("layers").get<std::size_t>();
        cfg.kernel_size = j.at("kernel_size").get<std::size_t>();
        cfg.dilation = DilationSchedule::parse(j.at("dilation").get<std::string>());
        cfg.kernel_activation = activation_from_string(j.at("activation").get<std::string>());
        cfg.leaky_slope = j.at("leaky_slope").get<double>();
        cfg.kernel_hidden = j.at("kernel_hidden").get<std::vector<std::size_t>>();
        cfg.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
        cfg.init_rate = j.at("init_rate").get<double>();
        cfg.time_scale = j.at("time_scale").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config field error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

CoticModel::CoticModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);

    const auto K = static_cast<std::size_t>(config_.num_types);
    const double emb_bound = 1.0 / std::sqrt(static_cast<double>(config_.embed_dim));
    embedding_ = uniform_init({K, config_.embed_dim}, emb_bound, rng);

    layers_.reserve(config_.num_layers);
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        ContConvLayer layer;
        const std::size_t d_in = l == 0 ? config_.embed_dim : config_.hidden_dim;
        layer.kernel = KernelNetwork(d_in, config_.hidden_dim, config_.kernel_hidden,
                                     config_.kernel_activation, config_.leaky_slope, rng);
        layer.kernel_size = config_.kernel_size;
        layer.dilation = config_.dilation.at(l);
        layers_.push_back(std::move(layer));
    }

    // Dimension of what the stack hands to the heads; a zero-layer stack
    // passes the raw mark embeddings through.
    const std::size_t backbone_out =
        config_.num_layers == 0 ? config_.embed_dim : config_.hidden_dim;

    intensity_conv_.kernel =
        KernelNetwork(backbone_out, config_.hidden_dim, config_.kernel_hidden,
                      config_.kernel_activation, config_.leaky_slope, rng);
    intensity_conv_.kernel_size = config_.kernel_size;
    // Base spacing: the intensity head reads consecutive recent embeddings,
    // which already summarize the dilated stack's receptive field.
    intensity_conv_.dilation = config_.dilation.at(0);
    // The likelihood needs a predictable intensity: at an event time the
    // curve depends on strictly earlier events only, otherwise the event
    // term can reward a measure-zero spike the compensator never pays for.
    intensity_conv_.strictly_past = true;

    const double lin_bound = 1.0 / std::sqrt(static_cast<double>(config_.hidden_dim));
    intensity_weight_ = uniform_init({config_.hidden_dim, K}, lin_bound, rng);
    intensity_bias_ = Array({K});
    if (config_.init_rate > 0.0) {
        const double b0 = softplus_inv(config_.init_rate / static_cast<double>(K));
        for (std::size_t k = 0; k < K; ++k) intensity_bias_[k] = b0;
    }

    std::vector<std::size_t> time_dims{backbone_out};
    time_dims.insert(time_dims.end(), config_.head_hidden.begin(), config_.head_hidden.end());
    time_dims.push_back(1);
    head_time_ = DenseStack::make(time_dims, Activation::LeakyRelu, config_.leaky_slope, rng);

    std::vector<std::size_t> type_dims{backbone_out};
    type_dims.insert(type_dims.end(), config_.head_hidden.begin(), config_.head_hidden.end());
    type_dims.push_back(K);
    head_type_ = DenseStack::make(type_dims, Activation::LeakyRelu, config_.leaky_slope, rng);
}

std::vector<ParamRef> CoticModel::parameters() {
    std::vector<ParamRef> out = backbone_parameters();
    const auto heads = head_parameters();
    out.insert(out.end(), heads.begin(), heads.end());
    return out;
}

std::vector<ConstParamRef> CoticModel::parameters() const {
    std::vector<ConstParamRef> out;
    out.push_back({"embedding", &embedding_});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].kernel.collect("backbone." + std::to_string(l) + ".kernel", out);
    }
    intensity_conv_.kernel.collect("intensity.kernel", out);
    out.push_back({"intensity.linear.weight", &intensity_weight_});
    out.push_back({"intensity.linear.bias", &intensity_bias_});
    head_time_.collect("head_time", out);
    head_type_.collect("head_type", out);
    return out;
}

std::vector<ParamRef> CoticModel::backbone_parameters() {
    std::vector<ParamRef> out;
    out.push_back({"embedding", &embedding_});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].kernel.collect("backbone." + std::to_string(l) + ".kernel", out);
    }
    intensity_conv_.kernel.collect("intensity.kernel", out);
    out.push_back({"intensity.linear.weight", &intensity_weight_});
    out.push_back({"intensity.linear.bias", &intensity_bias_});
    return out;
}

std::vector<ParamRef> CoticModel::head_parameters() {
    std::vector<ParamRef> out;
    head_time_.collect("head_time", out);
    head_type_.collect("head_type", out);
    return out;
}

Array CoticModel::embed_marks(const std::vector<int>& marks) const {
    std::vector<std::size_t> rows;
    rows.reserve(marks.size());
    for (int m : marks) {
        if (m < 1 || m > config_.num_types) {
            throw DomainError("mark " + std::to_string(m) + " outside [1, " +
                              std::to_string(config_.num_types) + "]");
        }
        rows.push_back(static_cast<std::size_t>(m - 1));
    }
    GraphBinder bind;
    return gather_rows(bind(embedding_), std::move(rows)).value();
}

ModelPass::ModelPass(const CoticModel& model, const EventSequence& seq)
    : model_(model), seq_(seq) {}

const Tensor& ModelPass::embeddings() {
    if (!backbone_) {
        std::vector<std::size_t> rows;
        rows.reserve(seq_.marks.size());
        for (int m : seq_.marks) {
            if (m < 1 || m > model_.config_.num_types) {
                throw DomainError("mark " + std::to_string(m) + " outside [1, " +
                                  std::to_string(model_.config_.num_types) + "]");
            }
            rows.push_back(static_cast<std::size_t>(m - 1));
        }
        Tensor h = gather_rows(bind_(model_.embedding_), std::move(rows));
        for (const auto& layer : model_.layers_) {
            h = leaky_relu(layer.forward(bind_, seq_.times, h, seq_.times),
                           model_.config_.leaky_slope);
        }
        backbone_ = h;
    }
    return *backbone_;
}

Tensor ModelPass::intensity_at(const std::vector<double>& queries) {
    for (double q : queries) {
        if (q < 0.0) throw DomainError("intensity query times must be non-negative");
    }
    const Tensor& h = embeddings();
    Tensor y = model_.intensity_conv_.forward(bind_, seq_.times, h, queries);
    y = leaky_relu(y, model_.config_.leaky_slope);
    y = matmul(y, bind_(model_.intensity_weight_)) + bind_(model_.intensity_bias_);
    return softplus(y);
}

std::pair<Tensor, Tensor> ModelPass::heads() {
    const Tensor& h = embeddings();
    return {model_.head_time_.forward(bind_, h), model_.head_type_.forward(bind_, h)};
}

Array CoticModel::backbone_embeddings(const EventSequence& seq) const {
    ModelPass pass(*this, seq);
    return pass.embeddings().value();
}

IntensityCurve CoticModel::intensity(const EventSequence& seq,
                                     const std::vector<double>& query_times) const {
    ModelPass pass(*this, seq);
    IntensityCurve curve;
    curve.grid = query_times;
    curve.per_type = pass.intensity_at(query_times).value();
    curve.total.resize(query_times.size(), 0.0);
    const auto K = static_cast<std::size_t>(config_.num_types);
    for (std::size_t i = 0; i < query_times.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += curve.per_type.at(i, k);
        curve.total[i] = s;
    }
    return curve;
}

HeadOutputs CoticModel::predict_heads(const EventSequence& seq) const {
    ModelPass pass(*this, seq);
    auto [dt, scores] = pass.heads();
    return {dt.value(), scores.value()};
}

}  // namespace cotic
