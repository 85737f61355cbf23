#include "cotic/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "cotic/errors.hpp"
#include "cotic/rng.hpp"

namespace cotic {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& field, std::size_t row) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw DataError("row " + std::to_string(row) + ": cannot parse time '" + field + "'");
    }
    return v;
}

int parse_type(const std::string& field, std::size_t row) {
    int v = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || v <= 0) {
        throw DataError("row " + std::to_string(row) + ": event type must be a positive integer, got '" +
                        field + "'");
    }
    return v;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

std::size_t EventSequence::count_before(double t) const {
    return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) -
                                    times.begin());
}

void EventSequence::validate(int num_types) const {
    if (times.size() != marks.size()) {
        throw DataError("sequence has " + std::to_string(times.size()) + " times but " +
                        std::to_string(marks.size()) + " marks");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0)) throw DataError("event times must be non-negative");
        if (i > 0 && !(times[i] > times[i - 1])) {
            throw DataError("event times must be strictly increasing");
        }
        if (marks[i] < 1 || (num_types > 0 && marks[i] > num_types)) {
            throw DataError("mark " + std::to_string(marks[i]) + " outside [1, " +
                            std::to_string(num_types) + "]");
        }
    }
    if (!times.empty() && horizon < times.back()) {
        throw DataError("horizon is below the last event time");
    }
}

std::size_t Dataset::total_events() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.length();
    return n;
}

double homogeneous_event_rate(const Dataset& data) {
    double events = 0.0;
    double span = 0.0;
    for (const auto& seq : data.sequences) {
        events += static_cast<double>(seq.length());
        span += seq.empty() ? seq.horizon : seq.times.back();
    }
    return span > 0.0 ? events / span : 0.0;
}

EventSequence Batch::unpad(std::size_t row) const {
    EventSequence seq;
    const std::size_t len = lengths[row];
    seq.times.assign(times.begin() + row * max_len, times.begin() + row * max_len + len);
    seq.marks.assign(marks.begin() + row * max_len, marks.begin() + row * max_len + len);
    seq.horizon = horizons[row];
    return seq;
}

Dataset make_dataset(std::vector<EventSequence> raw_sequences, int num_types) {
    double max_time = 0.0;
    int max_mark = 0;
    for (const auto& s : raw_sequences) {
        s.validate(0);
        if (!s.empty()) max_time = std::max(max_time, s.times.back());
        for (int m : s.marks) max_mark = std::max(max_mark, m);
    }
    Dataset ds;
    ds.num_types = std::max(num_types, std::max(max_mark, 1));
    ds.time_scale = max_time > 0.0 ? max_time : 1.0;
    for (auto& s : raw_sequences) {
        for (double& t : s.times) t /= ds.time_scale;
        s.horizon /= ds.time_scale;
        if (!s.times.empty()) s.horizon = std::max(s.horizon, s.times.back());
    }
    ds.sequences = std::move(raw_sequences);
    return ds;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "': empty dataset (no header)");
    const auto header = split_line(line);
    std::size_t id_col = header.size(), time_col = header.size(), type_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == schema.seq_id_column) id_col = i;
        if (header[i] == schema.time_column) time_col = i;
        if (header[i] == schema.type_column) type_col = i;
    }
    if (id_col == header.size() || time_col == header.size() || type_col == header.size()) {
        throw DataError("'" + path + "': header must contain columns '" + schema.seq_id_column +
                        "', '" + schema.time_column + "', '" + schema.type_column + "'");
    }

    // Grouped by first appearance of the sequence id.
    std::vector<std::string> id_order;
    std::map<std::string, std::size_t> id_index;
    struct RawEvent {
        double time;
        int mark;
        std::size_t row;
    };
    std::vector<std::vector<RawEvent>> groups;

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_line(line);
        if (fields.size() != header.size()) {
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        const std::string& id = fields[id_col];
        const double t = parse_double(fields[time_col], row);
        if (!(t >= 0.0)) throw DataError("row " + std::to_string(row) + ": negative time");
        const int mark = parse_type(fields[type_col], row);
        auto it = id_index.find(id);
        if (it == id_index.end()) {
            it = id_index.emplace(id, groups.size()).first;
            id_order.push_back(id);
            groups.emplace_back();
        }
        groups[it->second].push_back({t, mark, row});
    }
    if (groups.empty()) throw DataError("'" + path + "': empty dataset");

    std::vector<EventSequence> raw;
    raw.reserve(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        auto& g = groups[gi];
        std::stable_sort(g.begin(), g.end(),
                         [](const RawEvent& a, const RawEvent& b) { return a.time < b.time; });
        for (std::size_t i = 1; i < g.size(); ++i) {
            if (g[i].time == g[i - 1].time) {
                throw DataError("row " + std::to_string(g[i].row) +
                                ": duplicate timestamp within a sequence");
            }
        }
        EventSequence s;
        s.id = id_order[gi];
        s.times.reserve(g.size());
        s.marks.reserve(g.size());
        for (const auto& e : g) {
            s.times.push_back(e.time);
            s.marks.push_back(e.mark);
        }
        s.horizon = s.times.empty() ? 0.0 : s.times.back();
        raw.push_back(std::move(s));
    }
    return make_dataset(std::move(raw));
}

void write_csv(const Dataset& dataset, const std::string& path, const CsvSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << schema.seq_id_column << ',' << schema.time_column << ',' << schema.type_column << '\n';
    for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
        const auto& s = dataset.sequences[i];
        const std::string id = s.id.empty() ? "s" + std::to_string(i) : s.id;
        for (std::size_t j = 0; j < s.length(); ++j) {
            out << id << ',' << format_double(s.times[j] * dataset.time_scale) << ','
                << s.marks[j] << '\n';
        }
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

SplitResult split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed) {
    if (dataset.sequences.empty()) throw DataError("cannot split an empty dataset");
    if (!(ratios.train > 0.0) || !(ratios.val > 0.0) || !(ratios.test > 0.0)) {
        throw DataError("split ratios must be positive");
    }
    const std::size_t n = dataset.sequences.size();
    if (n < 3) throw DataError("fewer sequences than split parts");

    const double total = ratios.train + ratios.val + ratios.test;
    // Floor allocations for val and test, at least one sequence each; the
    // remainder (floors included) goes to train.
    const auto floor_part = [&](double r) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                            static_cast<double>(n) * r / total)));
    };
    const std::size_t n_val = floor_part(ratios.val);
    const std::size_t n_test = floor_part(ratios.test);
    if (n_val + n_test >= n) throw DataError("not enough sequences for the requested ratios");
    const std::size_t n_train = n - n_val - n_test;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    const auto take = [&](std::size_t begin, std::size_t count) {
        Dataset part;
        part.num_types = dataset.num_types;
        part.time_scale = dataset.time_scale;
        part.sequences.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            part.sequences.push_back(dataset.sequences[order[begin + i]]);
        }
        return part;
    };

    SplitResult result;
    result.train = take(0, n_train);
    result.val = take(n_train, n_val);
    result.test = take(n_train + n_val, n_test);
    return result;
}

std::vector<Batch> batchify(const std::vector<EventSequence>& sequences,
                            std::size_t batch_size) {
    if (batch_size < 1) throw ContractError("batch_size must be at least 1");
    std::vector<Batch> batches;
    for (std::size_t begin = 0; begin < sequences.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, sequences.size());
        Batch b;
        for (std::size_t i = begin; i < end; ++i) {
            b.max_len = std::max(b.max_len, sequences[i].length());
        }
        const std::size_t rows = end - begin;
        b.times.assign(rows * b.max_len, 0.0);
        b.marks.assign(rows * b.max_len, 0);
        for (std::size_t i = begin; i < end; ++i) {
            const auto& s = sequences[i];
            const std::size_t r = i - begin;
            std::copy(s.times.begin(), s.times.end(), b.times.begin() + r * b.max_len);
            std::copy(s.marks.begin(), s.marks.end(), b.marks.begin() + r * b.max_len);
            b.lengths.push_back(s.length());
            b.horizons.push_back(s.horizon);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

}  // namespace cotic
