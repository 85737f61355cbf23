#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cotic/errors.hpp"

namespace cotic {

// Deterministic random source. mt19937_64 raw output is pinned by the
// standard; the distributions here are hand-rolled so that streams are
// bit-identical across standard libraries as well.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // Exponential with the given rate; rate must be positive.
    double exponential(double rate) {
        if (!(rate > 0.0)) throw DomainError("exponential rate must be positive");
        return -std::log1p(-unit()) / rate;
    }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t index(std::uint64_t n) {
        if (n == 0) throw DomainError("index bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // Draw from a categorical distribution given non-negative weights.
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw DomainError("categorical weights must sum to a positive value");
        const double u = unit() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cotic
