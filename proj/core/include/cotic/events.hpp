#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cotic {

// One realization of a marked temporal point process. Times are strictly
// increasing; marks are 1-based type ids; the horizon is the end of the
// observation window and is never below the last event time.
struct EventSequence {
    std::vector<double> times;
    std::vector<int> marks;
    double horizon = 0.0;
    std::string id;  // source sequence id, kept for exports

    std::size_t length() const { return times.size(); }
    bool empty() const { return times.empty(); }

    // Number of events strictly before t.
    std::size_t count_before(double t) const;

    // Throws DataError when an invariant is violated.
    void validate(int num_types) const;
};

struct Dataset {
    std::vector<EventSequence> sequences;
    int num_types = 0;     // K
    double time_scale = 1.0;  // raw times were divided by this

    std::size_t total_events() const;
};

// Events per unit of (normalized) observed time, the homogeneous-Poisson
// maximum-likelihood rate of the whole dataset.
double homogeneous_event_rate(const Dataset& data);

// Padded view of a group of sequences. Entries beyond a row's true length
// are padding (time 0, mark 0).
struct Batch {
    std::vector<double> times;  // row-major, rows x max_len
    std::vector<int> marks;     // row-major, rows x max_len
    std::vector<std::size_t> lengths;
    std::vector<double> horizons;
    std::size_t max_len = 0;

    std::size_t rows() const { return lengths.size(); }
    EventSequence unpad(std::size_t row) const;
};

struct CsvSchema {
    std::string seq_id_column = "seq_id";
    std::string time_column = "time";
    std::string type_column = "event_type";
};

// Builds a normalized dataset from raw-time sequences: every time (and
// horizon) is divided by the maximum raw event time across the dataset, and
// K is the largest observed mark unless a larger num_types is forced.
Dataset make_dataset(std::vector<EventSequence> raw_sequences, int num_types = 0);

// Reads `seq_id,time,event_type` CSV (UTF-8, '.' decimal separator). One
// sequence per distinct id, ordered by first appearance; times sorted and
// normalized by the dataset-wide maximum raw time.
Dataset load_csv(const std::string& path, const CsvSchema& schema = {});

// Emits the same schema with raw (de-normalized) times, shortest-round-trip
// formatted.
void write_csv(const Dataset& dataset, const std::string& path,
               const CsvSchema& schema = {});

struct SplitRatios {
    double train = 8.0;
    double val = 1.0;
    double test = 1.0;
};

struct SplitResult {
    Dataset train;
    Dataset val;
    Dataset test;
};

// Disjoint partition by whole sequence. Validation and test receive the
// floor allocation but at least one sequence each; the remainder goes to
// train. Deterministic in the seed.
SplitResult split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed);

std::vector<Batch> batchify(const std::vector<EventSequence>& sequences,
                            std::size_t batch_size);

}  // namespace cotic
