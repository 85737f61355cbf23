#pragma once

#include <functional>
#include <vector>

#include "cotic/autodiff.hpp"
#include "cotic/events.hpp"
#include "cotic/model.hpp"
#include "cotic/rng.hpp"

namespace cotic {

// Produces the |times| x K per-type intensity at the requested times. The
// model supplies one through ModelPass; oracles wrap closed forms as
// constant tensors.
using IntensityFn = std::function<Tensor(const std::vector<double>& times)>;

// Monte-Carlo integral of f over [0, T]: (sum f(u_i) / n) * T with
// u_i ~ Uniform[0, T]. The sum-first ordering keeps constant integrands
// exact.
double mc_integral(const std::function<double(double)>& f, double T, std::size_t n, Rng& rng);

inline constexpr double kIntensityLogFloor = 1e-9;

// Negative log-likelihood of one sequence: Monte-Carlo compensator of the
// total intensity over [0, t_k] minus the per-type log-intensities at the
// events. An empty sequence integrates over [0, horizon] instead.
Tensor nll(const IntensityFn& intensity, const EventSequence& seq, std::size_t n_mc, Rng& rng,
           double log_floor = kIntensityLogFloor);

// Return-time loss of a residual x = predicted - target:
//   x + log(1 + e^{-2x})
double logcosh_loss(double predicted, double target);

// -log softmax(scores)[true_type], true_type is 1-based.
double cross_entropy_loss(const std::vector<double>& scores, int true_type);

// Mean logcosh over positions 1..k-1 against the next inter-event time; a
// sequence shorter than two events contributes zero.
Tensor return_time_loss(const Tensor& raw_dt, const EventSequence& seq);

// Mean cross-entropy over positions 1..k-1 against the next event type.
Tensor type_loss(const Tensor& scores, const EventSequence& seq);

struct SequenceLoss {
    Tensor ll;
    Tensor time;
    Tensor type;
};

enum class TrainPhase { BackboneOnly = 1, Joint = 2 };

struct LossReport {
    double ll = 0.0;
    double time = 0.0;
    double type = 0.0;
    double combined = 0.0;
    std::size_t mc_samples = 0;
};

// Batch objective: mean L_ll in phase one, mean (L_ll + alpha L_time +
// beta L_type) in phase two.
Tensor combined_loss(const std::vector<SequenceLoss>& losses, double alpha, double beta,
                     TrainPhase phase);

// All three per-sequence losses from one shared forward pass.
SequenceLoss sequence_loss(ModelPass& pass, const EventSequence& seq, std::size_t n_mc,
                           Rng& rng);

}  // namespace cotic
