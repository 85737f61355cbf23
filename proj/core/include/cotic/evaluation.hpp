#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cotic/events.hpp"
#include "cotic/model.hpp"
#include "cotic/training.hpp"

namespace cotic {

struct MetricsReport {
    double ll_per_event = 0.0;
    // Absent when no sequence has two or more events.
    std::optional<double> return_mae;         // normalized time units
    std::optional<double> return_mae_denorm;  // x time_scale
    std::optional<double> type_accuracy;
    std::size_t n_predictions = 0;
    std::size_t n_events = 0;

    std::string to_json_string() const;
};

// Log-likelihood per event, return-time MAE over positions 1..k-1, and
// argmax type accuracy (ties resolved toward the lowest type id). The
// return-time prediction is softplus-clamped at metric time. Per-sequence
// Monte-Carlo seeds are derived from sequence content, so the report is
// invariant to dataset order.
MetricsReport evaluate(const CoticModel& model, const Dataset& data, std::size_t n_mc,
                       std::uint64_t seed);

// CSV rows `t,lambda_1..lambda_K,lambda_total` on a uniform grid over
// [0, t_k].
void export_intensity(const CoticModel& model, const EventSequence& seq, std::size_t grid_size,
                      std::ostream& out);
void export_intensity(const CoticModel& model, const EventSequence& seq, std::size_t grid_size,
                      const std::string& path);

enum class SweepAxis { Layers, KernelSize, Activation };

SweepAxis sweep_axis_from_string(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepCell {
    std::string axis;
    std::string value;
    std::size_t receptive_field = 0;
    std::optional<MetricsReport> metrics;   // absent when the cell failed
    std::string error;                      // populated on failure
    TrainStatus train_status = TrainStatus::Completed;

    std::string to_json_line() const;
};

// One full train + evaluate per axis value with a shared seed. Failures are
// recorded per cell without aborting the sweep. When init_rate_from_train is
// set, each cell re-derives the intensity-bias seed from its train split,
// matching a standalone training run.
std::vector<SweepCell> ablation_sweep(const ModelConfig& base_model, const TrainConfig& base_train,
                                      SweepAxis axis, const std::vector<std::string>& values,
                                      const Dataset& dataset, bool init_rate_from_train = false);

// Re-expresses a dataset in a model's time units (times were normalized by
// their own maximum; the model may have been trained with another divisor).
Dataset rescale_dataset(const Dataset& data, double target_scale);

}  // namespace cotic
