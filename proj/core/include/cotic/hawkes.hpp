#pragma once

#include <cstdint>
#include <vector>

#include "cotic/events.hpp"

namespace cotic {

// Exponential-kernel self-exciting process:
//   lambda(t) = mu + a * sum_{t_j < t} exp(-b (t - t_j))
// Stable whenever the branching ratio a/b is below one.
struct HawkesParams {
    double mu = 1.0;   // base rate, > 0
    double a = 0.0;    // excitation jump, >= 0
    double b = 1.0;    // decay rate, > 0
    // Mark distribution for multi-type synthesis; event types are drawn
    // i.i.d. from these weights, independent of time. Empty means one type.
    std::vector<double> mark_weights;

    double branching_ratio() const { return a / b; }
    int num_types() const {
        return mark_weights.empty() ? 1 : static_cast<int>(mark_weights.size());
    }
    // Throws DomainError when the parameters are invalid or unstable.
    void validate() const;
};

// Ogata thinning with the exact exponential-decay envelope; deterministic
// per seed. Returned times are raw (unnormalized), horizon = T.
EventSequence simulate_hawkes(const HawkesParams& params, double horizon, std::uint64_t seed);

// Conditional intensity at t given the history events strictly before t.
double hawkes_intensity(const HawkesParams& params, const std::vector<double>& history,
                        double t);

// Intensity at many query points; O(n log n + k) sweep, same values as the
// per-point form.
std::vector<double> hawkes_intensity_at(const HawkesParams& params,
                                        const std::vector<double>& history,
                                        const std::vector<double>& queries);

// Integral of the intensity over [0, t] given the full history before t.
double hawkes_compensator(const HawkesParams& params, const std::vector<double>& history,
                          double t);

// Exact negative log-likelihood over [0, horizon]:
//   mu T + (a/b) sum_j (1 - e^{-b (T - t_j)}) - sum_j log lambda(t_j)
double hawkes_nll_exact(const HawkesParams& params, const EventSequence& seq, double horizon);

// P(no event in (t_from, t_to]) with the history frozen before t_from.
double survival_prob(const HawkesParams& params, const std::vector<double>& history,
                     double t_from, double t_to);

}  // namespace cotic
