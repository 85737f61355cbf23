#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cotic/conv.hpp"
#include "cotic/events.hpp"

namespace cotic {

struct DilationSchedule {
    enum class Kind { Fixed, Doubling };
    Kind kind = Kind::Doubling;
    std::size_t fixed = 1;

    std::size_t at(std::size_t layer) const {
        return kind == Kind::Fixed ? fixed : (std::size_t{1} << layer);
    }

    static DilationSchedule doubling() { return {Kind::Doubling, 1}; }
    static DilationSchedule fixed_at(std::size_t d) { return {Kind::Fixed, d}; }

    static DilationSchedule parse(const std::string& text);
    std::string str() const;
};

struct ModelConfig {
    int num_types = 1;                           // K
    std::size_t embed_dim = 32;                  // mark embedding width
    std::size_t hidden_dim = 32;                 // channel width of the stack
    std::size_t num_layers = 3;                  // L
    std::size_t kernel_size = 5;                 // s, events per convolution
    DilationSchedule dilation = DilationSchedule::doubling();
    Activation kernel_activation = Activation::LeakyRelu;
    double leaky_slope = 0.1;
    std::vector<std::size_t> kernel_hidden = {16, 16};
    std::vector<std::size_t> head_hidden = {64, 64};
    // When positive, the intensity head's output bias starts at
    // softplus_inv(rate) so the initial curve sits near the data's
    // homogeneous event rate instead of softplus(0).
    double init_rate = 0.0;
    // Raw-time divisor the model was trained with; carried so artifacts can
    // re-express new data in the model's units.
    double time_scale = 1.0;

    // Events per backbone output: 1 + (s-1) * sum of layer dilations.
    std::size_t receptive_field() const;

    void validate() const;
    std::string to_json_string() const;
    static ModelConfig from_json_string(const std::string& text);
};

// Per-type intensities on a query grid; total is the per-type sum.
struct IntensityCurve {
    std::vector<double> grid;
    Array per_type;  // grid x K
    std::vector<double> total;
};

struct HeadOutputs {
    Array return_time_raw;  // k x 1, unconstrained reals
    Array type_scores;      // k x K
};

class CoticModel;

// Differentiable forward pass over one sequence. Leaves are shared through
// the binder, so gradients from the likelihood and the head losses combine
// in a single backward sweep.
class ModelPass {
public:
    ModelPass(const CoticModel& model, const EventSequence& seq);

    // Backbone embeddings at the event times, k x hidden_dim.
    const Tensor& embeddings();

    // Positive per-type intensity at the queries, |queries| x K.
    Tensor intensity_at(const std::vector<double>& queries);

    // (k x 1 raw return-time, k x K type scores).
    std::pair<Tensor, Tensor> heads();

    GraphBinder& binder() { return bind_; }

private:
    const CoticModel& model_;
    const EventSequence& seq_;
    GraphBinder bind_;
    std::optional<Tensor> backbone_;
};

// Mark embedding, L stacked continuous convolutions with LeakyReLU, a
// convolutional intensity head mapped through softplus, and two MLP
// prediction heads.
class CoticModel {
public:
    CoticModel() = default;
    CoticModel(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ModelConfig& mutable_config() { return config_; }

    std::vector<ParamRef> parameters();
    std::vector<ConstParamRef> parameters() const;
    // Everything the likelihood loss trains: embedding, stack, intensity.
    std::vector<ParamRef> backbone_parameters();
    // The two prediction heads, frozen during warm-up epochs.
    std::vector<ParamRef> head_parameters();

    // Embedding rows for 1-based marks; out-of-range marks are a domain
    // error.
    Array embed_marks(const std::vector<int>& marks) const;

    // Per-event embeddings h_1..h_k (k x hidden_dim).
    Array backbone_embeddings(const EventSequence& seq) const;

    // Per-type intensity curve at the queries; queries must be >= 0.
    IntensityCurve intensity(const EventSequence& seq,
                             const std::vector<double>& query_times) const;

    HeadOutputs predict_heads(const EventSequence& seq) const;

    friend class ModelPass;

private:
    ModelConfig config_;
    Array embedding_;                     // K x embed_dim
    std::vector<ContConvLayer> layers_;   // backbone stack
    ContConvLayer intensity_conv_;        // kernel over backbone embeddings
    Array intensity_weight_;              // hidden_dim x K
    Array intensity_bias_;                // K
    DenseStack head_time_;                // hidden_dim -> ... -> 1
    DenseStack head_type_;                // hidden_dim -> ... -> K
};

}  // namespace cotic
