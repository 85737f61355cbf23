#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cotic/autodiff.hpp"
#include "cotic/rng.hpp"

namespace cotic {

enum class Activation { LeakyRelu, Sine };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation act);

// Named handle to one trainable array. Registries are built in a fixed
// creation order so optimizer state and checkpoints line up by index.
struct ParamRef {
    std::string name;
    Array* array;
};

struct ConstParamRef {
    std::string name;
    const Array* array;
};

// Caches one leaf tensor per parameter array for the duration of a forward
// pass, so every use of a parameter shares a single graph node and gradients
// from several loss terms combine.
class GraphBinder {
public:
    Tensor operator()(const Array& param);

    // Leaf created during this pass, or nullptr when the parameter was never
    // touched.
    const Tensor* find(const Array& param) const;

private:
    std::unordered_map<const Array*, Tensor> leaves_;
};

// Fully-connected stack. Weights are (in x out) so inputs multiply on the
// left; hidden layers are activated, the output layer is affine.
struct DenseStack {
    std::vector<Array> weights;
    std::vector<Array> biases;
    Activation activation = Activation::LeakyRelu;
    double slope = 0.1;

    // dims = {in, hidden..., out}; weights start uniform in
    // [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases at zero.
    static DenseStack make(const std::vector<std::size_t>& dims, Activation act, double slope,
                           Rng& rng);

    std::size_t in_dim() const { return weights.front().extent(0); }
    std::size_t out_dim() const { return weights.back().extent(1); }

    Tensor forward(GraphBinder& bind, const Tensor& x) const;
    Array forward_value(const Array& x) const;

    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    void collect(const std::string& prefix, std::vector<ConstParamRef>& out) const;
};

Array uniform_init(std::vector<std::size_t> shape, double bound, Rng& rng);

// Inverse of the softplus: softplus(softplus_inv(y)) == y for y > 0.
double softplus_inv(double y);

}  // namespace cotic
