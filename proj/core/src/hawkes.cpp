#include "cotic/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cotic/errors.hpp"
#include "cotic/rng.hpp"

namespace cotic {

void HawkesParams::validate() const {
    if (!(mu > 0.0)) throw DomainError("hawkes: mu must be positive");
    if (!(a >= 0.0)) throw DomainError("hawkes: excitation must be non-negative");
    if (!(b > 0.0)) throw DomainError("hawkes: decay must be positive");
    if (!(a / b < 1.0)) {
        throw DomainError("hawkes: unstable parameters, branching ratio a/b must be < 1");
    }
    for (double w : mark_weights) {
        if (!(w >= 0.0)) throw DomainError("hawkes: mark weights must be non-negative");
    }
    if (!mark_weights.empty()) {
        const double total = std::accumulate(mark_weights.begin(), mark_weights.end(), 0.0);
        if (!(total > 0.0)) throw DomainError("hawkes: mark weights must sum to a positive value");
    }
}

EventSequence simulate_hawkes(const HawkesParams& params, double horizon, std::uint64_t seed) {
    params.validate();
    if (!(horizon >= 0.0)) throw DomainError("hawkes: horizon must be non-negative");

    EventSequence seq;
    seq.horizon = horizon;
    Rng rng(seed);

    double t = 0.0;
    double excitation = 0.0;  // a * sum exp(-b (t - t_j)), decayed to current t
    while (true) {
        // The intensity decays between events, so its value just after the
        // current point dominates the whole remaining interval.
        const double bound = params.mu + excitation;
        const double wait = rng.exponential(bound);
        const double candidate = t + wait;
        if (candidate > horizon) break;
        const double decayed = excitation * std::exp(-params.b * wait);
        const double lambda = params.mu + decayed;
        t = candidate;
        excitation = decayed;
        if (rng.unit() * bound <= lambda) {
            seq.times.push_back(t);
            excitation += params.a;
            if (params.mark_weights.empty()) {
                seq.marks.push_back(1);
            } else {
                seq.marks.push_back(static_cast<int>(rng.categorical(params.mark_weights)) + 1);
            }
        }
    }
    return seq;
}

double hawkes_intensity(const HawkesParams& params, const std::vector<double>& history,
                        double t) {
    double sum = 0.0;
    for (double tj : history) {
        if (tj < t) sum += std::exp(-params.b * (t - tj));
    }
    return params.mu + params.a * sum;
}

std::vector<double> hawkes_intensity_at(const HawkesParams& params,
                                        const std::vector<double>& history,
                                        const std::vector<double>& queries) {
    std::vector<std::size_t> order(queries.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return queries[i] < queries[j]; });

    std::vector<double> out(queries.size(), params.mu);
    double state = 0.0;  // sum exp(-b (t - t_j)) advanced along sorted queries
    double prev = 0.0;
    std::size_t next_event = 0;
    for (std::size_t oi : order) {
        const double t = queries[oi];
        // Fold in events that fall strictly before this query.
        while (next_event < history.size() && history[next_event] < t) {
            state = state * std::exp(-params.b * (history[next_event] - prev)) + 1.0;
            prev = history[next_event];
            ++next_event;
        }
        const double decayed = state * std::exp(-params.b * (t - prev));
        out[oi] = params.mu + params.a * decayed;
    }
    return out;
}

double hawkes_compensator(const HawkesParams& params, const std::vector<double>& history,
                          double t) {
    double sum = 0.0;
    for (double tj : history) {
        if (tj < t) sum += 1.0 - std::exp(-params.b * (t - tj));
    }
    return params.mu * t + (params.a / params.b) * sum;
}

double hawkes_nll_exact(const HawkesParams& params, const EventSequence& seq, double horizon) {
    params.validate();
    double nll = params.mu * horizon;
    double state = 0.0;  // sum exp(-b (t_j - t_i)), i < j, advanced recursively
    double prev = 0.0;
    for (std::size_t j = 0; j < seq.length(); ++j) {
        const double t = seq.times[j];
        state *= std::exp(-params.b * (t - prev));
        const double lambda = params.mu + params.a * state;
        nll -= std::log(lambda);
        nll += (params.a / params.b) * (1.0 - std::exp(-params.b * (horizon - t)));
        state += 1.0;
        prev = t;
    }
    return nll;
}

double survival_prob(const HawkesParams& params, const std::vector<double>& history,
                     double t_from, double t_to) {
    if (!(t_from <= t_to)) throw DomainError("survival_prob: t_from must not exceed t_to");
    double integral = params.mu * (t_to - t_from);
    for (double tj : history) {
        if (tj < t_from) {
            integral += (params.a / params.b) *
                        (std::exp(-params.b * (t_from - tj)) - std::exp(-params.b * (t_to - tj)));
        }
    }
    return std::exp(-integral);
}

}  // namespace cotic
