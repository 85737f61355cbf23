#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cotic/events.hpp"
#include "cotic/model.hpp"

namespace cotic {

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::size_t epochs_max = 100;
    std::size_t warm_epochs = 10;  // N0: likelihood-only, heads frozen
    std::size_t batch_size = 32;
    double alpha = 1.0;  // return-time loss weight
    double beta = 1.0;   // type loss weight
    std::size_t n_mc = 100;
    std::uint64_t seed = 0;
    std::size_t patience = 15;  // early stop on validation L_ll
    double clip_norm = 10.0;    // global gradient-norm guard

    void validate() const;
};

// First/second moments and per-parameter step counts, aligned with a
// parameter registry by index. Head slots are re-zeroed at the phase
// boundary, so their bias correction restarts when they unfreeze.
struct AdamState {
    std::vector<Array> m;
    std::vector<Array> v;
    std::vector<std::uint64_t> step;

    static AdamState like(const std::vector<ParamRef>& params);
    void reset(std::size_t index);
};

// One bias-corrected Adam update. Returns false (leaving the parameter and
// state untouched) when the gradient is not finite.
bool adam_step(Array& param, const Array& grad, Array& m, Array& v, std::uint64_t& step,
               double lr, double beta1, double beta2, double eps);

struct EpochRecord {
    std::size_t epoch = 0;
    int phase = 1;
    double train_ll = 0.0;
    double val_ll = 0.0;
    double train_time_loss = 0.0;
    double train_type_loss = 0.0;
    double wall_seconds = 0.0;
    std::size_t clipped_steps = 0;
    std::size_t rejected_steps = 0;

    std::string to_json_line() const;
    static EpochRecord from_json_line(const std::string& line);
};

enum class TrainStatus { Completed, EarlyStopped, Diverged };

std::string to_string(TrainStatus status);

struct TrainResult {
    std::vector<EpochRecord> history;
    TrainStatus status = TrainStatus::Completed;
    std::size_t best_epoch = 0;
    double best_val_ll = 0.0;
};

// Two-phase schedule: epochs 1..N0 update only the backbone and intensity
// parameters with the likelihood loss; later epochs train everything with
// the combined loss. The model is left at the best-validation checkpoint
// (or the last good one if the loss diverges).
TrainResult train(CoticModel& model, const Dataset& train_data, const Dataset& val_data,
                  const TrainConfig& cfg);

// Checkpoint container: magic, config echo, named parameter arrays, FNV-1a
// checksum. Round-trips are bit-exact.
void save_checkpoint(const CoticModel& model, const std::string& path);
void save_checkpoint(const CoticModel& model, std::ostream& out);

// Reconstructs a model from the embedded config echo.
CoticModel read_checkpoint(const std::string& path);
CoticModel read_checkpoint(std::istream& in);

// Loads parameters into an existing model; the stored config must match.
void load_checkpoint(CoticModel& model, const std::string& path);

std::string checkpoint_bytes(const CoticModel& model);
CoticModel model_from_bytes(const std::string& bytes);

void write_history(const std::vector<EpochRecord>& history, const std::string& path);
std::vector<EpochRecord> read_history(const std::string& path);

}  // namespace cotic
