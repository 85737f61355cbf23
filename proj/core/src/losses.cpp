#include "cotic/losses.hpp"

#include <cmath>
#include <numeric>

#include "cotic/errors.hpp"

namespace cotic {

double mc_integral(const std::function<double(double)>& f, double T, std::size_t n, Rng& rng) {
    if (n < 1) throw ContractError("mc_integral needs at least one sample");
    if (T < 0.0) throw DomainError("mc_integral domain must be non-negative");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += f(rng.uniform(0.0, T));
    return sum / static_cast<double>(n) * T;
}

Tensor nll(const IntensityFn& intensity, const EventSequence& seq, std::size_t n_mc, Rng& rng,
           double log_floor) {
    if (n_mc < 1) throw ContractError("nll needs at least one Monte-Carlo sample");
    const std::size_t k = seq.length();
    const double upper = k > 0 ? seq.times.back() : seq.horizon;

    std::vector<double> queries = seq.times;
    queries.reserve(k + n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) queries.push_back(rng.uniform(0.0, upper));

    Tensor lambda = intensity(queries);
    if (lambda.value().rank() != 2 || lambda.value().extent(0) != queries.size()) {
        throw DimensionError("intensity function must return one row per query time");
    }
    const std::size_t num_types = lambda.value().extent(1);

    // Compensator: total intensity integrated by Monte-Carlo over [0, upper].
    std::vector<std::size_t> mc_rows(n_mc);
    std::iota(mc_rows.begin(), mc_rows.end(), k);
    Tensor mc_vals = gather_rows(lambda, std::move(mc_rows));
    Tensor row_totals = matmul(mc_vals, Tensor::constant(Array::full({num_types, 1}, 1.0)));
    Tensor compensator = scale(div_scalar(sum_all(row_totals), static_cast<double>(n_mc)), upper);

    if (k == 0) return compensator;

    // Event term: per-type intensity at each event, log guarded by a floor.
    std::vector<std::size_t> event_rows(k);
    std::iota(event_rows.begin(), event_rows.end(), 0);
    std::vector<std::size_t> cols;
    cols.reserve(k);
    for (int m : seq.marks) {
        if (m < 1 || static_cast<std::size_t>(m) > num_types) {
            throw DomainError("event mark outside the intensity's type range");
        }
        cols.push_back(static_cast<std::size_t>(m - 1));
    }
    Tensor event_vals = pick_per_row(gather_rows(lambda, std::move(event_rows)), std::move(cols));
    Tensor event_term = sum_all(log_floored(event_vals, log_floor));
    return compensator - event_term;
}

double logcosh_loss(double predicted, double target) {
    return logcosh_shifted(predicted - target);
}

double cross_entropy_loss(const std::vector<double>& scores, int true_type) {
    if (true_type < 1 || static_cast<std::size_t>(true_type) > scores.size()) {
        throw DomainError("true event type outside [1, K]");
    }
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - mx);
    return mx + std::log(sum) - scores[static_cast<std::size_t>(true_type - 1)];
}

Tensor return_time_loss(const Tensor& raw_dt, const EventSequence& seq) {
    const std::size_t k = seq.length();
    if (raw_dt.value().extent(0) != k) {
        throw DimensionError("return-time head output must have one row per event");
    }
    if (k < 2) return Tensor::constant(Array::scalar(0.0));
    std::vector<std::size_t> rows(k - 1);
    std::iota(rows.begin(), rows.end(), 0);
    Array targets({k - 1, 1});
    for (std::size_t j = 0; j + 1 < k; ++j) targets[j] = seq.times[j + 1] - seq.times[j];
    Tensor residual = gather_rows(raw_dt, std::move(rows)) - Tensor::constant(std::move(targets));
    return div_scalar(sum_all(logcosh_shift(residual)), static_cast<double>(k - 1));
}

Tensor type_loss(const Tensor& scores, const EventSequence& seq) {
    const std::size_t k = seq.length();
    if (scores.value().extent(0) != k) {
        throw DimensionError("type head output must have one row per event");
    }
    if (k < 2) return Tensor::constant(Array::scalar(0.0));
    const std::size_t num_types = scores.value().extent(1);
    std::vector<std::size_t> rows(k - 1);
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<std::size_t> targets;
    targets.reserve(k - 1);
    for (std::size_t j = 1; j < k; ++j) {
        const int m = seq.marks[j];
        if (m < 1 || static_cast<std::size_t>(m) > num_types) {
            throw DomainError("event mark outside the head's type range");
        }
        targets.push_back(static_cast<std::size_t>(m - 1));
    }
    Tensor picked = gather_rows(scores, std::move(rows));
    return div_scalar(sum_all(cross_entropy_rows(picked, std::move(targets))),
                      static_cast<double>(k - 1));
}

Tensor combined_loss(const std::vector<SequenceLoss>& losses, double alpha, double beta,
                     TrainPhase phase) {
    if (losses.empty()) throw ContractError("combined_loss needs at least one sequence");
    if (alpha < 0.0 || beta < 0.0) throw DomainError("loss weights must be non-negative");
    Tensor total;
    for (const auto& loss : losses) {
        Tensor term = loss.ll;
        if (phase == TrainPhase::Joint) {
            term = term + scale(loss.time, alpha) + scale(loss.type, beta);
        }
        total = total.defined() ? total + term : term;
    }
    return div_scalar(total, static_cast<double>(losses.size()));
}

SequenceLoss sequence_loss(ModelPass& pass, const EventSequence& seq, std::size_t n_mc,
                           Rng& rng) {
    SequenceLoss out;
    out.ll = nll([&pass](const std::vector<double>& ts) { return pass.intensity_at(ts); }, seq,
                 n_mc, rng);
    auto [raw_dt, scores] = pass.heads();
    out.time = return_time_loss(raw_dt, seq);
    out.type = type_loss(scores, seq);
    return out;
}

}  // namespace cotic
