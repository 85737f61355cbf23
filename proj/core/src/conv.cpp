#include "cotic/conv.hpp"

#include <algorithm>

#include "cotic/errors.hpp"

namespace cotic {

KernelNetwork::KernelNetwork(std::size_t d_in, std::size_t d_out,
                             const std::vector<std::size_t>& hidden, Activation act,
                             double slope, Rng& rng)
    : d_in_(d_in), d_out_(d_out) {
    std::vector<std::size_t> dims;
    dims.push_back(1);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(d_out * d_in);
    net = DenseStack::make(dims, act, slope, rng);
}

Tensor KernelNetwork::forward_lags(GraphBinder& bind, const std::vector<double>& lags) const {
    Array input({lags.size(), 1});
    for (std::size_t i = 0; i < lags.size(); ++i) input[i] = lags[i];
    return net.forward(bind, Tensor::constant(std::move(input)));
}

Tensor KernelNetwork::hidden_forward(GraphBinder& bind, const std::vector<double>& lags) const {
    Array input({lags.size(), 1});
    for (std::size_t i = 0; i < lags.size(); ++i) input[i] = lags[i];
    Tensor h = Tensor::constant(std::move(input));
    for (std::size_t i = 0; i + 1 < net.weights.size(); ++i) {
        h = matmul(h, bind(net.weights[i])) + bind(net.biases[i]);
        h = net.activation == Activation::Sine ? sine(h) : leaky_relu(h, net.slope);
    }
    return h;
}

void KernelNetwork::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    net.collect(prefix, out);
}

void KernelNetwork::collect(const std::string& prefix, std::vector<ConstParamRef>& out) const {
    net.collect(prefix, out);
}

std::vector<Array> kernel_eval(const KernelNetwork& kernel, const std::vector<double>& lags) {
    std::vector<double> causal;
    causal.reserve(lags.size());
    for (double lag : lags) {
        if (lag >= 0.0) causal.push_back(lag);
    }
    GraphBinder bind;
    Array flat = causal.empty() ? Array({0, kernel.d_out() * kernel.d_in()})
                                : kernel.forward_lags(bind, causal).value();
    std::vector<Array> out;
    out.reserve(lags.size());
    std::size_t next = 0;
    for (double lag : lags) {
        Array m({kernel.d_out(), kernel.d_in()});
        if (lag >= 0.0) {
            const double* src = flat.data() + next * m.size();
            for (std::size_t i = 0; i < m.size(); ++i) m[i] = src[i];
            ++next;
        }
        out.push_back(std::move(m));
    }
    return out;
}

ConvPairs enumerate_pairs(const std::vector<double>& event_times,
                          const std::vector<double>& query_times, std::size_t kernel_size,
                          std::size_t dilation, bool strictly_past) {
    if (kernel_size < 1) throw ContractError("kernel size must be at least 1");
    if (dilation < 1) throw ContractError("dilation must be at least 1");
    ConvPairs pairs;
    pairs.query.reserve(query_times.size() * std::min<std::size_t>(kernel_size, 8));
    for (std::size_t q = 0; q < query_times.size(); ++q) {
        const double t = query_times[q];
        // Most recent admissible event anchors the index set.
        const auto it = strictly_past
                            ? std::lower_bound(event_times.begin(), event_times.end(), t)
                            : std::upper_bound(event_times.begin(), event_times.end(), t);
        if (it == event_times.begin()) continue;
        const std::ptrdiff_t anchor = (it - event_times.begin()) - 1;
        for (std::size_t c = 0; c < kernel_size; ++c) {
            const std::ptrdiff_t j = anchor - static_cast<std::ptrdiff_t>(c * dilation);
            if (j < 0) break;
            pairs.query.push_back(q);
            pairs.event.push_back(static_cast<std::size_t>(j));
            pairs.lag.push_back(t - event_times[static_cast<std::size_t>(j)]);
        }
    }
    return pairs;
}

Tensor ContConvLayer::forward(GraphBinder& bind, const std::vector<double>& event_times,
                              const Tensor& features, const std::vector<double>& query_times) const {
    if (features.value().rank() != 2 || features.value().extent(1) != kernel.d_in()) {
        throw DimensionError("conv features must be (events x " +
                             std::to_string(kernel.d_in()) + ")");
    }
    if (features.value().extent(0) != event_times.size()) {
        throw DimensionError("conv needs one feature row per event");
    }
    ConvPairs pairs = enumerate_pairs(event_times, query_times, kernel_size, dilation,
                                      strictly_past);

    // The kernel net's final affine layer commutes with the feature product:
    //   k(lag) m = sum_t hidden_t(lag) (V_t m) + C m,
    // so the heavy V and C projections run once per event, not once per
    // (query, event) pair.
    const std::size_t d_out = kernel.d_out();
    const std::size_t d_in = kernel.d_in();
    Tensor hidden = kernel.hidden_forward(bind, pairs.lag);
    const Array& v_last = kernel.net.weights.back();
    const Array& c_last = kernel.net.biases.back();
    Tensor projected = matmul(features, kernel_weight_regroup(bind(v_last), d_out, d_in));
    Tensor base = matmul(
        features,
        kernel_weight_regroup(reshape(bind(c_last), {1, d_out * d_in}), d_out, d_in));
    Tensor mixed = indexed_block_vecmat(hidden, projected, pairs.event, d_out);
    Tensor per_pair = mixed + gather_rows(base, std::move(pairs.event));
    return segment_sum(per_pair, std::move(pairs.query), query_times.size());
}

Array conv_at_queries(const ContConvLayer& layer, const std::vector<double>& event_times,
                      const Array& event_features, const std::vector<double>& query_times) {
    GraphBinder bind;
    return layer.forward(bind, event_times, Tensor::constant(event_features), query_times)
        .value();
}

Array conv_at_events(const ContConvLayer& layer, const std::vector<double>& event_times,
                     const Array& event_features) {
    return conv_at_queries(layer, event_times, event_features, event_times);
}

}  // namespace cotic
