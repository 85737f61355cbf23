#pragma once

#include <vector>

#include "cotic/nn.hpp"

namespace cotic {

// Feed-forward map from a scalar time lag to a d_out x d_in weight matrix.
// The causal mask is hard: k(lag) is exactly zero for negative lags.
class KernelNetwork {
public:
    KernelNetwork() = default;
    KernelNetwork(std::size_t d_in, std::size_t d_out, const std::vector<std::size_t>& hidden,
                  Activation act, double slope, Rng& rng);

    std::size_t d_in() const { return d_in_; }
    std::size_t d_out() const { return d_out_; }

    // Network applied to each lag; all lags must be non-negative here (the
    // convolution only enumerates causal pairs). Rows of the result hold the
    // flattened d_out x d_in matrices.
    Tensor forward_lags(GraphBinder& bind, const std::vector<double>& lags) const;

    // Everything up to the final affine layer, one row per lag.
    Tensor hidden_forward(GraphBinder& bind, const std::vector<double>& lags) const;

    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    void collect(const std::string& prefix, std::vector<ConstParamRef>& out) const;

    DenseStack net;

private:
    std::size_t d_in_ = 0;
    std::size_t d_out_ = 0;
};

// One weight matrix per lag; exact zero matrices for negative lags.
std::vector<Array> kernel_eval(const KernelNetwork& kernel, const std::vector<double>& lags);

// One continuous causal convolution with kernel-size truncation and
// dilation: the output at a query t sums kernel(t - t_j) * feature_j over
// the most recent `kernel_size` events at spacing `dilation`, all with
// t_j <= t. With strictly_past set, an event at exactly the query time is
// excluded; an intensity built this way is predictable, so its likelihood
// cannot reward a spike at the event itself.
struct ContConvLayer {
    KernelNetwork kernel;
    std::size_t kernel_size = 5;
    std::size_t dilation = 1;
    bool strictly_past = false;

    Tensor forward(GraphBinder& bind, const std::vector<double>& event_times,
                   const Tensor& features, const std::vector<double>& query_times) const;
};

// Truncated dilated index set: for each query, the admissible
// (query, event, lag) triples in enumeration order.
struct ConvPairs {
    std::vector<std::size_t> query;
    std::vector<std::size_t> event;
    std::vector<double> lag;

    std::size_t size() const { return query.size(); }
};

ConvPairs enumerate_pairs(const std::vector<double>& event_times,
                          const std::vector<double>& query_times, std::size_t kernel_size,
                          std::size_t dilation, bool strictly_past = false);

// Value-level convolution at arbitrary query times.
Array conv_at_queries(const ContConvLayer& layer, const std::vector<double>& event_times,
                      const Array& event_features, const std::vector<double>& query_times);

// Value-level convolution evaluated at the event times themselves.
Array conv_at_events(const ContConvLayer& layer, const std::vector<double>& event_times,
                     const Array& event_features);

}  // namespace cotic
