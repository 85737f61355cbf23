#include <cmath>
#include <vector>

#include <doctest.h>

#include "cotic/conv.hpp"
#include "cotic/errors.hpp"
#include "support/checks.hpp"

using namespace cotic;

namespace {

KernelNetwork small_kernel(std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
    Rng rng(seed);
    return KernelNetwork(d_in, d_out, {4}, Activation::LeakyRelu, 0.1, rng);
}

void zero_params(KernelNetwork& k) {
    std::vector<ParamRef> refs;
    k.collect("k", refs);
    for (auto& r : refs) *r.array = Array(r.array->shape());
}

// Full truncated sum straight from the definition, built on kernel_eval and
// a hand matrix-vector product; independent of the batched graph path.
Array naive_conv(const ContConvLayer& layer, const std::vector<double>& times,
                 const Array& feats, const std::vector<double>& queries) {
    const std::size_t d_out = layer.kernel.d_out();
    const std::size_t d_in = layer.kernel.d_in();
    Array out({queries.size(), d_out});
    for (std::size_t q = 0; q < queries.size(); ++q) {
        std::ptrdiff_t anchor = -1;
        for (std::size_t j = 0; j < times.size(); ++j) {
            if (times[j] <= queries[q]) anchor = static_cast<std::ptrdiff_t>(j);
        }
        for (std::size_t c = 0; c < layer.kernel_size; ++c) {
            const std::ptrdiff_t j = anchor - static_cast<std::ptrdiff_t>(c * layer.dilation);
            if (j < 0) break;
            const Array k =
                kernel_eval(layer.kernel, {queries[q] - times[static_cast<std::size_t>(j)]})[0];
            for (std::size_t r = 0; r < d_out; ++r) {
                double acc = 0.0;
                for (std::size_t i = 0; i < d_in; ++i) {
                    acc += k.at(r, i) * feats.at(static_cast<std::size_t>(j), i);
                }
                out.at(q, r) += acc;
            }
        }
    }
    return out;
}

Array random_feats(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Array a({rows, cols});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-1.0, 1.0);
    return a;
}

}  // namespace

TEST_CASE("negative lags evaluate to exact zero matrices") {
    const KernelNetwork k = small_kernel(2, 3, 1);
    const auto mats = kernel_eval(k, {-0.5, 0.25, -1e-12});
    for (std::size_t i = 0; i < mats[0].size(); ++i) CHECK(mats[0][i] == 0.0);
    for (std::size_t i = 0; i < mats[2].size(); ++i) CHECK(mats[2][i] == 0.0);
    bool any_nonzero = false;
    for (std::size_t i = 0; i < mats[1].size(); ++i) any_nonzero |= mats[1][i] != 0.0;
    CHECK(any_nonzero);
}

TEST_CASE("a zero network maps every lag to the zero matrix") {
    KernelNetwork k = small_kernel(2, 2, 2);
    zero_params(k);
    for (const Array& m : kernel_eval(k, {0.0, 0.3, 1.7})) {
        for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i] == 0.0);
    }
}

TEST_CASE("hand-evaluated 1-1-1 kernel network") {
    Rng rng(3);
    KernelNetwork k(1, 1, {1}, Activation::LeakyRelu, 0.01, rng);
    k.net.weights[0] = Array({1, 1}, {2.0});
    k.net.biases[0] = Array({1});
    k.net.weights[1] = Array({1, 1}, {3.0});
    k.net.biases[1] = Array({1});
    const Array m = kernel_eval(k, {0.5})[0];
    CHECK(m.item() == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("convolution with no events is identically zero") {
    ContConvLayer layer{small_kernel(2, 3, 4), 3, 1};
    const Array out = conv_at_queries(layer, {}, Array({0, 2}), {0.1, 0.5, 0.9});
    CHECK(out.extent(0) == 3);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("queries before the first event see nothing") {
    ContConvLayer layer{small_kernel(2, 2, 5), 3, 1};
    const Array feats = random_feats(3, 2, 6);
    const Array out = conv_at_queries(layer, {1.0, 2.0, 3.0}, feats, {0.0, 0.5, 0.999});
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("truncated sum matches the naive oracle") {
    ContConvLayer layer{small_kernel(2, 3, 7), 2, 1};
    const std::vector<double> times{0.2, 0.5, 1.1};
    const Array feats = random_feats(3, 2, 8);
    const Array fast = conv_at_events(layer, times, feats);
    const Array slow = naive_conv(layer, times, feats, times);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) {
        CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
    }
    // y(t_3) is exactly the two most recent terms under s=2.
    const Array k0 = kernel_eval(layer.kernel, {0.0})[0];
    const Array k1 = kernel_eval(layer.kernel, {1.1 - 0.5})[0];
    for (std::size_t r = 0; r < 3; ++r) {
        double expect = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            expect += k0.at(r, i) * feats.at(2, i) + k1.at(r, i) * feats.at(1, i);
        }
        CHECK(fast.at(2, r) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("a single event convolves with the zero-lag kernel") {
    ContConvLayer layer{small_kernel(2, 3, 9), 4, 1};
    const Array feats = random_feats(1, 2, 10);
    const Array out = conv_at_events(layer, {0.7}, feats);
    const Array k0 = kernel_eval(layer.kernel, {0.0})[0];
    for (std::size_t r = 0; r < 3; ++r) {
        double expect = 0.0;
        for (std::size_t i = 0; i < 2; ++i) expect += k0.at(r, i) * feats.at(0, i);
        CHECK(out.at(0, r) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("output length equals the event count") {
    ContConvLayer layer{small_kernel(1, 2, 11), 3, 2};
    for (std::size_t n : {0u, 1u, 5u, 9u}) {
        std::vector<double> times;
        for (std::size_t i = 0; i < n; ++i) times.push_back(0.1 * static_cast<double>(i + 1));
        const Array out = conv_at_events(layer, times, random_feats(n, 1, 12));
        CHECK(out.extent(0) == n);
    }
}

TEST_CASE("an oversized kernel equals the untruncated sum") {
    const std::vector<double> times{0.1, 0.3, 0.35, 0.6, 0.61, 0.8, 1.0, 1.4, 1.9, 2.0};
    const Array feats = random_feats(10, 2, 13);
    ContConvLayer truncated{small_kernel(2, 2, 14), 10, 1};
    ContConvLayer huge{truncated.kernel, 1000000, 1};
    const Array a = conv_at_events(truncated, times, feats);
    const Array b = conv_at_events(huge, times, feats);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("dilated index sets skip events") {
    const std::vector<double> times{1, 2, 3, 4, 5, 6, 7};
    const ConvPairs pairs = enumerate_pairs(times, {7.0}, 3, 2);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs.event[0] == 6);
    CHECK(pairs.event[1] == 4);
    CHECK(pairs.event[2] == 2);
    CHECK(pairs.lag[1] == doctest::Approx(2.0));
}

TEST_CASE("causality: perturbing future events never changes earlier outputs") {
    ContConvLayer layer{small_kernel(2, 2, 15), 3, 1};
    std::vector<double> times{0.1, 0.4, 0.9, 1.5, 2.2};
    Array feats = random_feats(5, 2, 16);
    const std::vector<double> queries{0.05, 0.4, 1.0, 1.49};
    const Array before = conv_at_queries(layer, times, feats, queries);

    // Perturb the last event's time and features; all queries precede it.
    times[4] = 2.9;
    feats.at(4, 0) += 10.0;
    feats.at(4, 1) -= 3.0;
    const Array after = conv_at_queries(layer, times, feats, queries);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("truncation: events outside the index set cannot influence the output") {
    ContConvLayer layer{small_kernel(1, 2, 17), 2, 2};
    std::vector<double> times{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    Array feats = random_feats(6, 1, 18);
    // Output at event 5 (0-based) depends on events {5, 3} only.
    const Array before = conv_at_events(layer, times, feats);
    feats.at(4, 0) += 5.0;
    feats.at(2, 0) -= 2.0;
    feats.at(0, 0) *= -3.0;
    const Array after = conv_at_events(layer, times, feats);
    CHECK(before.at(5, 0) == after.at(5, 0));
    CHECK(before.at(5, 1) == after.at(5, 1));
}

TEST_CASE("kernel parameter gradients match finite differences") {
    Rng rng(19);
    KernelNetwork proto(2, 2, {4}, Activation::LeakyRelu, 0.1, rng);
    std::vector<ParamRef> refs;
    proto.collect("k", refs);
    std::vector<Array> params;
    for (auto& r : refs) params.push_back(*r.array);

    const std::vector<double> times{0.2, 0.5, 0.9, 1.4};
    const Array feats = random_feats(4, 2, 20);
    const std::vector<double> queries{0.3, 0.8, 1.2, 1.6};

    testsupport::check_gradients(
        params,
        [&](const std::vector<Tensor>& p) {
            // Same wiring as ContConvLayer::forward, but consuming the
            // caller's parameter tensors.
            ConvPairs pairs = enumerate_pairs(times, queries, 3, 1);
            Array lags({pairs.size(), 1});
            for (std::size_t i = 0; i < pairs.size(); ++i) lags[i] = pairs.lag[i];
            Tensor h = Tensor::constant(std::move(lags));
            for (std::size_t i = 0; i + 1 < p.size(); i += 2) {
                h = add(matmul(h, p[i]), p[i + 1]);
                if (i + 2 < p.size()) h = leaky_relu(h, 0.1);
            }
            Tensor g = gather_rows(Tensor::constant(feats), pairs.event);
            Tensor prod = block_matvec(h, g, 2);
            Tensor y = segment_sum(prod, pairs.query, queries.size());
            return sum_all(tanh(y));
        },
        1e-4);
}

TEST_CASE("layer gradients match finite differences through the fused path") {
    Rng rng(29);
    ContConvLayer layer{KernelNetwork(2, 3, {4, 4}, Activation::LeakyRelu, 0.1, rng), 3, 1};
    const std::vector<double> times{0.15, 0.5, 0.8, 1.3, 1.7};
    const Array feats = random_feats(5, 2, 30);
    const std::vector<double> queries{0.1, 0.6, 1.0, 1.5, 1.9};

    std::vector<ParamRef> refs;
    layer.kernel.collect("k", refs);
    // Shift biases off zero so no activation sits on the LeakyReLU kink.
    Rng jitter(31);
    for (auto& r : refs) {
        for (std::size_t i = 0; i < r.array->size(); ++i) {
            (*r.array)[i] += jitter.uniform(-0.3, 0.3);
        }
    }

    const auto objective = [&]() {
        GraphBinder bind;
        Tensor out = layer.forward(bind, times, Tensor::constant(feats), queries);
        return std::make_pair(sum_all(tanh(out)), std::move(bind));
    };

    auto [root, bind] = objective();
    backward(root);
    const double step = 1e-5;
    for (auto& r : refs) {
        const Tensor* leaf = bind.find(*r.array);
        for (std::size_t i = 0; i < r.array->size(); ++i) {
            const double saved = (*r.array)[i];
            (*r.array)[i] = saved + step;
            const double up = objective().first.value().item();
            (*r.array)[i] = saved - step;
            const double dn = objective().first.value().item();
            (*r.array)[i] = saved;
            const double numeric = (up - dn) / (2.0 * step);
            const double analytic = leaf != nullptr && leaf->has_grad() ? leaf->grad()[i] : 0.0;
            CAPTURE(r.name);
            CAPTURE(i);
            CHECK(testsupport::grad_close(analytic, numeric, 1e-4));
        }
    }
}

TEST_CASE("layer forward gradients flow through the whole conv graph") {
    Rng rng(23);
    ContConvLayer layer{KernelNetwork(2, 2, {4}, Activation::Sine, 0.1, rng), 2, 1};
    const std::vector<double> times{0.2, 0.6, 1.1};
    const Array feats = random_feats(3, 2, 24);

    GraphBinder bind;
    Tensor out = layer.forward(bind, times, Tensor::param(feats), times);
    backward(sum_all(out));

    std::vector<ParamRef> refs;
    layer.kernel.collect("k", refs);
    bool some_grad = false;
    for (auto& r : refs) {
        const Tensor* leaf = bind.find(*r.array);
        if (leaf != nullptr && leaf->has_grad()) some_grad = true;
    }
    CHECK(some_grad);
}

TEST_CASE("feature dimension mismatch is rejected") {
    ContConvLayer layer{small_kernel(3, 2, 25), 2, 1};
    GraphBinder bind;
    CHECK_THROWS_AS(
        layer.forward(bind, {0.1, 0.2}, Tensor::constant(Array({2, 2})), {0.15}),
        DimensionError);
}
