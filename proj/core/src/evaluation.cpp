#include "cotic/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cotic/errors.hpp"
#include "cotic/losses.hpp"

namespace cotic {

using nlohmann::json;

namespace {

// Content-derived seed so per-sequence Monte-Carlo draws do not depend on
// dataset order.
std::uint64_t sequence_hash(const EventSequence& seq) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (double t : seq.times) mix(&t, sizeof(t));
    for (int m : seq.marks) mix(&m, sizeof(m));
    mix(&seq.horizon, sizeof(seq.horizon));
    return h;
}

json metrics_json(const MetricsReport& r) {
    json j;
    j["ll_per_event"] = r.ll_per_event;
    j["return_mae"] = r.return_mae ? json(*r.return_mae) : json(nullptr);
    j["return_mae_denorm"] = r.return_mae_denorm ? json(*r.return_mae_denorm) : json(nullptr);
    j["type_accuracy"] = r.type_accuracy ? json(*r.type_accuracy) : json(nullptr);
    j["n_predictions"] = r.n_predictions;
    j["n_events"] = r.n_events;
    return j;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string MetricsReport::to_json_string() const { return metrics_json(*this).dump(2); }

MetricsReport evaluate(const CoticModel& model, const Dataset& data, std::size_t n_mc,
                       std::uint64_t seed) {
    if (data.sequences.empty()) throw DataError("cannot evaluate an empty dataset");
    if (data.num_types > model.config().num_types) {
        throw DataError("dataset has " + std::to_string(data.num_types) +
                        " event types, model supports " +
                        std::to_string(model.config().num_types));
    }

    MetricsReport report;
    double nll_sum = 0.0;
    double mae_sum = 0.0;
    std::size_t correct = 0;

    for (const auto& seq : data.sequences) {
        Rng rng(seed ^ sequence_hash(seq));
        ModelPass pass(model, seq);
        Tensor ll = nll([&pass](const std::vector<double>& ts) { return pass.intensity_at(ts); },
                        seq, n_mc, rng);
        nll_sum += ll.value().item();
        report.n_events += seq.length();

        if (seq.length() < 2) continue;
        auto [raw_dt, scores] = pass.heads();
        const Array& dt = raw_dt.value();
        const Array& sc = scores.value();
        const auto num_types = static_cast<std::size_t>(model.config().num_types);
        for (std::size_t j = 0; j + 1 < seq.length(); ++j) {
            const double target = seq.times[j + 1] - seq.times[j];
            const double predicted = softplus_stable(dt[j]);
            mae_sum += std::fabs(predicted - target);

            std::size_t best = 0;
            for (std::size_t c = 1; c < num_types; ++c) {
                if (sc.at(j, c) > sc.at(j, best)) best = c;
            }
            if (static_cast<int>(best) + 1 == seq.marks[j + 1]) ++correct;
            ++report.n_predictions;
        }
    }

    if (report.n_events == 0) throw DataError("dataset holds no events");
    report.ll_per_event = -nll_sum / static_cast<double>(report.n_events);
    if (report.n_predictions > 0) {
        report.return_mae = mae_sum / static_cast<double>(report.n_predictions);
        report.return_mae_denorm = *report.return_mae * data.time_scale;
        report.type_accuracy =
            static_cast<double>(correct) / static_cast<double>(report.n_predictions);
    }
    return report;
}

void export_intensity(const CoticModel& model, const EventSequence& seq, std::size_t grid_size,
                      std::ostream& out) {
    if (grid_size < 2) throw ContractError("intensity export needs a grid of at least 2 points");
    if (seq.empty()) throw DomainError("cannot export intensity for an empty sequence");
    const double t_end = seq.times.back();
    if (!(t_end > 0.0)) throw DomainError("intensity export needs a positive time span");

    std::vector<double> grid(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i) {
        grid[i] = t_end * static_cast<double>(i) / static_cast<double>(grid_size - 1);
    }
    const IntensityCurve curve = model.intensity(seq, grid);

    const auto K = static_cast<std::size_t>(model.config().num_types);
    out << "t";
    for (std::size_t k = 1; k <= K; ++k) out << ",lambda_" << k;
    out << ",lambda_total\n";
    for (std::size_t i = 0; i < grid_size; ++i) {
        out << format_double(grid[i]);
        for (std::size_t k = 0; k < K; ++k) out << ',' << format_double(curve.per_type.at(i, k));
        out << ',' << format_double(curve.total[i]) << '\n';
    }
}

void export_intensity(const CoticModel& model, const EventSequence& seq, std::size_t grid_size,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write curve file '" + path + "'");
    export_intensity(model, seq, grid_size, out);
    if (!out) throw IoError("curve write failed");
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "layers") return SweepAxis::Layers;
    if (name == "kernel_size") return SweepAxis::KernelSize;
    if (name == "activation") return SweepAxis::Activation;
    throw ConfigError("unknown sweep axis '" + name +
                      "' (expected layers, kernel_size, or activation)");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Layers: return "layers";
        case SweepAxis::KernelSize: return "kernel_size";
        case SweepAxis::Activation: return "activation";
    }
    return "layers";
}

std::string SweepCell::to_json_line() const {
    json j;
    j["axis"] = axis;
    j["value"] = value;
    j["receptive_field"] = receptive_field;
    j["status"] = error.empty() ? "ok" : "error";
    j["train_status"] = to_string(train_status);
    if (metrics) {
        j["metrics"] = metrics_json(*metrics);
    } else {
        j["error"] = error;
    }
    return j.dump();
}

namespace {

std::size_t parse_positive(const std::string& text, const char* what) {
    std::size_t v = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || v < 1) {
        throw ConfigError(std::string(what) + " must be a positive integer, got '" + text + "'");
    }
    return v;
}

}  // namespace

std::vector<SweepCell> ablation_sweep(const ModelConfig& base_model, const TrainConfig& base_train,
                                      SweepAxis axis, const std::vector<std::string>& values,
                                      const Dataset& dataset, bool init_rate_from_train) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    std::vector<SweepCell> table;
    table.reserve(values.size());
    for (const auto& value : values) {
        SweepCell cell;
        cell.axis = to_string(axis);
        cell.value = value;
        try {
            ModelConfig cfg = base_model;
            switch (axis) {
                case SweepAxis::Layers: cfg.num_layers = parse_positive(value, "layers"); break;
                case SweepAxis::KernelSize:
                    cfg.kernel_size = parse_positive(value, "kernel_size");
                    break;
                case SweepAxis::Activation:
                    cfg.kernel_activation = activation_from_string(value);
                    break;
            }
            cell.receptive_field = cfg.receptive_field();

            SplitResult parts = split(dataset, {}, base_train.seed);
            cfg.num_types = dataset.num_types;
            cfg.time_scale = dataset.time_scale;
            if (init_rate_from_train) cfg.init_rate = homogeneous_event_rate(parts.train);
            CoticModel model(cfg, base_train.seed);
            TrainResult trained = train(model, parts.train, parts.val, base_train);
            cell.train_status = trained.status;
            cell.metrics = evaluate(model, parts.test, base_train.n_mc, base_train.seed);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        table.push_back(std::move(cell));
    }
    return table;
}

Dataset rescale_dataset(const Dataset& data, double target_scale) {
    if (!(target_scale > 0.0)) throw DomainError("target time scale must be positive");
    Dataset out = data;
    const double factor = data.time_scale / target_scale;
    for (auto& seq : out.sequences) {
        for (double& t : seq.times) t *= factor;
        seq.horizon *= factor;
    }
    out.time_scale = target_scale;
    return out;
}

}  // namespace cotic
