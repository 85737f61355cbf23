#include "cotic/nn.hpp"

#include <cmath>

#include "cotic/errors.hpp"

namespace cotic {

Activation activation_from_string(const std::string& name) {
    if (name == "leaky_relu") return Activation::LeakyRelu;
    if (name == "sine") return Activation::Sine;
    throw ConfigError("unknown activation '" + name + "' (expected leaky_relu or sine)");
}

std::string to_string(Activation act) {
    switch (act) {
        case Activation::LeakyRelu: return "leaky_relu";
        case Activation::Sine: return "sine";
    }
    return "leaky_relu";
}

Tensor GraphBinder::operator()(const Array& param) {
    auto it = leaves_.find(&param);
    if (it != leaves_.end()) return it->second;
    Tensor leaf = Tensor::param(param);
    leaves_.emplace(&param, leaf);
    return leaf;
}

const Tensor* GraphBinder::find(const Array& param) const {
    auto it = leaves_.find(&param);
    return it == leaves_.end() ? nullptr : &it->second;
}

Array uniform_init(std::vector<std::size_t> shape, double bound, Rng& rng) {
    Array a(std::move(shape));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-bound, bound);
    return a;
}

double softplus_inv(double y) {
    if (!(y > 0.0)) throw DomainError("softplus_inv requires a positive argument");
    // log(e^y - 1) = y + log(1 - e^{-y})
    return y + std::log1p(-std::exp(-y));
}

DenseStack DenseStack::make(const std::vector<std::size_t>& dims, Activation act, double slope,
                            Rng& rng) {
    if (dims.size() < 2) throw ContractError("dense stack needs at least in and out dims");
    DenseStack s;
    s.activation = act;
    s.slope = slope;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        s.weights.push_back(uniform_init({dims[i], dims[i + 1]}, bound, rng));
        s.biases.push_back(Array({dims[i + 1]}));
    }
    return s;
}

Tensor DenseStack::forward(GraphBinder& bind, const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        h = matmul(h, bind(weights[i])) + bind(biases[i]);
        if (i + 1 < weights.size()) {
            h = activation == Activation::Sine ? sine(h) : leaky_relu(h, slope);
        }
    }
    return h;
}

Array DenseStack::forward_value(const Array& x) const {
    GraphBinder bind;
    return forward(bind, Tensor::constant(x)).value();
}

void DenseStack::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back({prefix + "." + std::to_string(i) + ".weight", &weights[i]});
        out.push_back({prefix + "." + std::to_string(i) + ".bias", &biases[i]});
    }
}

void DenseStack::collect(const std::string& prefix, std::vector<ConstParamRef>& out) const {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back({prefix + "." + std::to_string(i) + ".weight", &weights[i]});
        out.push_back({prefix + "." + std::to_string(i) + ".bias", &biases[i]});
    }
}

}  // namespace cotic
