#include "cotic/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cotic/errors.hpp"
#include "cotic/losses.hpp"
#include "cotic/rng.hpp"

namespace cotic {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'O', 'T', 'I', 'C', 'K', 'P', '1'};
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

static_assert(sizeof(double) == 8);

void fnv_mix(std::uint64_t& h, const char* bytes, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(bytes[i]);
        h *= kFnvPrime;
    }
}

struct ChecksumWriter {
    std::ostream& out;
    std::uint64_t hash = kFnvOffset;

    void bytes(const char* p, std::size_t n) {
        out.write(p, static_cast<std::streamsize>(n));
        fnv_mix(hash, p, n);
    }
    void u64(std::uint64_t v) {
        char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        bytes(buf, 8);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
};

// Reads from a fully checksum-verified buffer.
struct PayloadReader {
    const char* data;
    std::size_t size;
    std::size_t pos = 0;

    void bytes(char* p, std::size_t n) {
        if (pos + n > size) throw IntegrityError("checkpoint is truncated");
        std::memcpy(p, data + pos, n);
        pos += n;
    }
    std::uint64_t u64() {
        char buf[8];
        bytes(buf, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
        }
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

double global_grad_norm(const std::vector<Array>& grads) {
    double sq = 0.0;
    for (const auto& g : grads) {
        for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    }
    return std::sqrt(sq);
}

bool all_finite(const std::vector<Array>& grads) {
    for (const auto& g : grads) {
        if (!g.all_finite()) return false;
    }
    return true;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0, 1)");
    if (!(eps_adam > 0.0)) throw ConfigError("eps_adam must be positive");
    if (epochs_max < 1) throw ConfigError("epochs_max must be at least 1");
    if (warm_epochs > epochs_max) throw ConfigError("warm_epochs must not exceed epochs_max");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("loss weights must be non-negative");
    if (n_mc < 1) throw ConfigError("n_mc must be at least 1");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
}

AdamState AdamState::like(const std::vector<ParamRef>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
        s.m.emplace_back(p.array->shape());
        s.v.emplace_back(p.array->shape());
        s.step.push_back(0);
    }
    return s;
}

void AdamState::reset(std::size_t index) {
    m[index] = Array(m[index].shape());
    v[index] = Array(v[index].shape());
    step[index] = 0;
}

bool adam_step(Array& param, const Array& grad, Array& m, Array& v, std::uint64_t& step,
               double lr, double beta1, double beta2, double eps) {
    if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v)) {
        throw DimensionError("adam_step shapes disagree");
    }
    if (!grad.all_finite()) return false;
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    return true;
}

std::string EpochRecord::to_json_line() const {
    json j;
    j["epoch"] = epoch;
    j["phase"] = phase;
    j["train_ll"] = train_ll;
    j["val_ll"] = val_ll;
    j["train_time_loss"] = train_time_loss;
    j["train_type_loss"] = train_type_loss;
    j["wall_seconds"] = wall_seconds;
    j["clipped_steps"] = clipped_steps;
    j["rejected_steps"] = rejected_steps;
    return j.dump();
}

EpochRecord EpochRecord::from_json_line(const std::string& line) {
    EpochRecord r;
    // Non-finite losses (diverged epochs) serialize as JSON null.
    const auto number = [](const json& j, const char* key) {
        const json& v = j.at(key);
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    try {
        const json j = json::parse(line);
        r.epoch = j.at("epoch").get<std::size_t>();
        r.phase = j.at("phase").get<int>();
        r.train_ll = number(j, "train_ll");
        r.val_ll = number(j, "val_ll");
        r.train_time_loss = number(j, "train_time_loss");
        r.train_type_loss = number(j, "train_type_loss");
        r.wall_seconds = number(j, "wall_seconds");
        r.clipped_steps = j.at("clipped_steps").get<std::size_t>();
        r.rejected_steps = j.at("rejected_steps").get<std::size_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("bad history record: ") + e.what());
    }
    return r;
}

std::string to_string(TrainStatus status) {
    switch (status) {
        case TrainStatus::Completed: return "completed";
        case TrainStatus::EarlyStopped: return "early_stopped";
        case TrainStatus::Diverged: return "diverged";
    }
    return "completed";
}

namespace {

// Mean validation likelihood loss per sequence; forward only.
double validation_ll(const CoticModel& model, const Dataset& data, std::size_t n_mc,
                     std::uint64_t seed) {
    if (data.sequences.empty()) return 0.0;
    Rng rng(seed);
    double total = 0.0;
    for (const auto& seq : data.sequences) {
        ModelPass pass(model, seq);
        Tensor ll = nll([&pass](const std::vector<double>& ts) { return pass.intensity_at(ts); },
                        seq, n_mc, rng);
        total += ll.value().item();
    }
    return total / static_cast<double>(data.sequences.size());
}

}  // namespace

TrainResult train(CoticModel& model, const Dataset& train_data, const Dataset& val_data,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_data.sequences.empty()) throw DataError("training set is empty");

    auto params = model.parameters();
    const auto head_params = model.head_parameters();
    const std::size_t n_backbone = params.size() - head_params.size();

    AdamState adam = AdamState::like(params);
    Rng rng(cfg.seed);

    TrainResult result;
    std::string best_bytes = checkpoint_bytes(model);
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    bool diverged = false;

    for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const TrainPhase phase =
            epoch <= cfg.warm_epochs ? TrainPhase::BackboneOnly : TrainPhase::Joint;
        const std::size_t active =
            phase == TrainPhase::BackboneOnly ? n_backbone : params.size();
        if (epoch == cfg.warm_epochs + 1) {
            // Heads unfreeze here; their stale moments restart from zero.
            for (std::size_t i = n_backbone; i < params.size(); ++i) adam.reset(i);
        }

        std::vector<EventSequence> order = train_data.sequences;
        rng.shuffle(order);
        const auto batches = batchify(order, cfg.batch_size);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.phase = static_cast<int>(phase);
        double sum_ll = 0.0, sum_time = 0.0, sum_type = 0.0;
        std::size_t n_seq = 0;

        for (const auto& batch : batches) {
            std::vector<Array> grads;
            grads.reserve(active);
            for (std::size_t i = 0; i < active; ++i) grads.emplace_back(params[i].array->shape());

            const double inv_batch = 1.0 / static_cast<double>(batch.rows());
            bool batch_finite = true;
            for (std::size_t row = 0; row < batch.rows(); ++row) {
                const EventSequence seq = batch.unpad(row);
                ModelPass pass(model, seq);
                SequenceLoss loss = sequence_loss(pass, seq, cfg.n_mc, rng);

                Tensor objective = loss.ll;
                if (phase == TrainPhase::Joint) {
                    objective =
                        objective + scale(loss.time, cfg.alpha) + scale(loss.type, cfg.beta);
                }
                const double ll_v = loss.ll.value().item();
                sum_ll += ll_v;
                sum_time += loss.time.value().item();
                sum_type += loss.type.value().item();
                ++n_seq;
                if (!std::isfinite(ll_v) || !std::isfinite(objective.value().item())) {
                    batch_finite = false;
                    break;
                }

                backward(scale(objective, inv_batch));
                for (std::size_t i = 0; i < active; ++i) {
                    const Tensor* leaf = pass.binder().find(*params[i].array);
                    if (leaf == nullptr || !leaf->has_grad()) continue;
                    const Array& g = leaf->grad();
                    Array& acc = grads[i];
                    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
                }
            }
            if (!batch_finite) {
                diverged = true;
                break;
            }

            if (!all_finite(grads)) {
                ++rec.rejected_steps;
                continue;
            }
            const double norm = global_grad_norm(grads);
            if (norm > cfg.clip_norm) {
                const double shrink = cfg.clip_norm / norm;
                for (auto& g : grads) {
                    for (std::size_t j = 0; j < g.size(); ++j) g[j] *= shrink;
                }
                ++rec.clipped_steps;
            }
            for (std::size_t i = 0; i < active; ++i) {
                adam_step(*params[i].array, grads[i], adam.m[i], adam.v[i], adam.step[i], cfg.lr,
                          cfg.beta1, cfg.beta2, cfg.eps_adam);
            }
        }

        rec.train_ll = n_seq > 0 ? sum_ll / static_cast<double>(n_seq) : 0.0;
        rec.train_time_loss = n_seq > 0 ? sum_time / static_cast<double>(n_seq) : 0.0;
        rec.train_type_loss = n_seq > 0 ? sum_type / static_cast<double>(n_seq) : 0.0;

        if (diverged) {
            rec.val_ll = std::numeric_limits<double>::quiet_NaN();
            rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                   .count();
            result.history.push_back(rec);
            break;
        }

        rec.val_ll = validation_ll(model, val_data, cfg.n_mc, cfg.seed * 0x9e3779b97f4a7c15ULL + epoch);
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);

        if (rec.val_ll < best_val) {
            best_val = rec.val_ll;
            best_bytes = checkpoint_bytes(model);
            result.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= cfg.patience) {
                result.status = TrainStatus::EarlyStopped;
                break;
            }
        }
    }

    if (diverged) result.status = TrainStatus::Diverged;
    result.best_val_ll = best_val;

    // Hand back the best-validation model (the last good one on divergence).
    CoticModel best = model_from_bytes(best_bytes);
    model = std::move(best);
    return result;
}

void save_checkpoint(const CoticModel& model, std::ostream& out) {
    ChecksumWriter w{out};
    w.bytes(kMagic, sizeof(kMagic));
    const std::string cfg = model.config().to_json_string();
    w.u64(cfg.size());
    w.bytes(cfg.data(), cfg.size());
    const auto params = model.parameters();
    w.u64(params.size());
    for (const auto& p : params) {
        w.u64(p.name.size());
        w.bytes(p.name.data(), p.name.size());
        w.u64(p.array->rank());
        for (std::size_t d = 0; d < p.array->rank(); ++d) w.u64(p.array->extent(d));
        for (std::size_t i = 0; i < p.array->size(); ++i) w.f64((*p.array)[i]);
    }
    const std::uint64_t checksum = w.hash;
    w.u64(checksum);
    if (!out) throw IoError("checkpoint write failed");
}

void save_checkpoint(const CoticModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    save_checkpoint(model, out);
}

namespace {

CoticModel read_checkpoint_stream(std::istream& in) {
    const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < sizeof(kMagic) + 8) throw IntegrityError("checkpoint is truncated");

    // The trailing checksum guards everything else; verify it before
    // interpreting a single field.
    std::uint64_t expected = kFnvOffset;
    fnv_mix(expected, blob.data(), blob.size() - 8);
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) {
        stored |= static_cast<std::uint64_t>(
                      static_cast<unsigned char>(blob[blob.size() - 8 + i]))
                  << (8 * i);
    }
    if (stored != expected) throw IntegrityError("checkpoint checksum mismatch");

    PayloadReader r{blob.data(), blob.size() - 8};
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IntegrityError("not a checkpoint file (bad magic)");
    }
    const std::uint64_t cfg_len = r.u64();
    if (cfg_len > (64u << 20)) throw IntegrityError("checkpoint config block is implausibly large");
    std::string cfg_text(cfg_len, '\0');
    r.bytes(cfg_text.data(), cfg_len);
    const ModelConfig cfg = ModelConfig::from_json_string(cfg_text);

    CoticModel model(cfg, 0);
    auto params = model.parameters();
    const std::uint64_t n_params = r.u64();
    if (n_params != params.size()) {
        throw IntegrityError("checkpoint holds " + std::to_string(n_params) +
                             " parameters, model expects " + std::to_string(params.size()));
    }
    for (auto& p : params) {
        const std::uint64_t name_len = r.u64();
        if (name_len > 4096) throw IntegrityError("checkpoint parameter name too long");
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len);
        if (name != p.name) {
            throw IntegrityError("checkpoint parameter '" + name + "' does not match '" + p.name +
                                 "'");
        }
        const std::uint64_t rank = r.u64();
        if (rank != p.array->rank()) throw IntegrityError("checkpoint rank mismatch for " + name);
        std::size_t total = 1;
        for (std::uint64_t d = 0; d < rank; ++d) {
            const std::uint64_t e = r.u64();
            if (e != p.array->extent(d)) {
                throw IntegrityError("checkpoint shape mismatch for " + name);
            }
            total *= e;
        }
        for (std::size_t i = 0; i < total; ++i) (*p.array)[i] = r.f64();
    }
    if (r.pos != r.size) throw IntegrityError("checkpoint holds trailing bytes");
    return model;
}

}  // namespace

CoticModel read_checkpoint(std::istream& in) { return read_checkpoint_stream(in); }

CoticModel read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    return read_checkpoint_stream(in);
}

void load_checkpoint(CoticModel& model, const std::string& path) {
    CoticModel loaded = read_checkpoint(path);
    if (loaded.config().to_json_string() != model.config().to_json_string()) {
        throw IntegrityError("checkpoint config does not match the target model");
    }
    model = std::move(loaded);
}

std::string checkpoint_bytes(const CoticModel& model) {
    std::ostringstream os(std::ios::binary);
    save_checkpoint(model, os);
    return os.str();
}

CoticModel model_from_bytes(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    return read_checkpoint_stream(is);
}

void write_history(const std::vector<EpochRecord>& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write history '" + path + "'");
    for (const auto& rec : history) out << rec.to_json_line() << '\n';
    if (!out) throw IoError("history write failed");
}

std::vector<EpochRecord> read_history(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open history '" + path + "'");
    std::vector<EpochRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(EpochRecord::from_json_line(line));
    }
    return out;
}

}  // namespace cotic
