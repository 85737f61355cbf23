// Command-line front end: generate synthetic data, train, evaluate, export
// intensity curves, and run ablation sweeps.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cotic/cotic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

// Flat run configuration: one JSON object, flag overrides win.
struct RunConfig {
    std::string data;
    std::string out_dir = "runs/latest";
    std::uint64_t seed = 0;

    std::size_t layers = 3;
    std::size_t kernel_size = 5;
    std::string dilation = "doubling";
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 32;
    std::string activation = "leaky_relu";
    double leaky_slope = 0.1;
    std::vector<std::size_t> kernel_hidden = {16, 16};
    std::vector<std::size_t> head_hidden = {64, 64};
    bool init_rate_from_data = true;

    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::size_t epochs_max = 100;
    std::size_t warm_epochs = 10;
    std::size_t batch_size = 32;
    double alpha = 1.0;
    double beta = 1.0;
    std::size_t n_mc = 100;
    std::size_t patience = 15;
    double clip_norm = 10.0;
};

json run_config_json(const RunConfig& c) {
    json j;
    j["data"] = c.data;
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
    j["layers"] = c.layers;
    j["kernel_size"] = c.kernel_size;
    j["dilation"] = c.dilation;
    j["embed_dim"] = c.embed_dim;
    j["hidden_dim"] = c.hidden_dim;
    j["activation"] = c.activation;
    j["leaky_slope"] = c.leaky_slope;
    j["kernel_hidden"] = c.kernel_hidden;
    j["head_hidden"] = c.head_hidden;
    j["init_rate_from_data"] = c.init_rate_from_data;
    j["lr"] = c.lr;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps_adam"] = c.eps_adam;
    j["epochs_max"] = c.epochs_max;
    j["warm_epochs"] = c.warm_epochs;
    j["batch_size"] = c.batch_size;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["n_mc"] = c.n_mc;
    j["patience"] = c.patience;
    j["clip_norm"] = c.clip_norm;
    return j;
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    const json defaults = run_config_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) {
            throw cotic::ConfigError("unknown config key '" + key + "'");
        }
        (void)value;
    }
    try {
        if (j.contains("data")) c.data = j.at("data").get<std::string>();
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("layers")) c.layers = j.at("layers").get<std::size_t>();
        if (j.contains("kernel_size")) c.kernel_size = j.at("kernel_size").get<std::size_t>();
        if (j.contains("dilation")) {
            if (j.at("dilation").is_number_integer()) {
                c.dilation = std::to_string(j.at("dilation").get<std::size_t>());
            } else {
                c.dilation = j.at("dilation").get<std::string>();
            }
        }
        if (j.contains("embed_dim")) c.embed_dim = j.at("embed_dim").get<std::size_t>();
        if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        if (j.contains("activation")) c.activation = j.at("activation").get<std::string>();
        if (j.contains("leaky_slope")) c.leaky_slope = j.at("leaky_slope").get<double>();
        if (j.contains("kernel_hidden")) {
            c.kernel_hidden = j.at("kernel_hidden").get<std::vector<std::size_t>>();
        }
        if (j.contains("head_hidden")) {
            c.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
        }
        if (j.contains("init_rate_from_data")) {
            c.init_rate_from_data = j.at("init_rate_from_data").get<bool>();
        }
        if (j.contains("lr")) c.lr = j.at("lr").get<double>();
        if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
        if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
        if (j.contains("eps_adam")) c.eps_adam = j.at("eps_adam").get<double>();
        if (j.contains("epochs_max")) c.epochs_max = j.at("epochs_max").get<std::size_t>();
        if (j.contains("warm_epochs")) c.warm_epochs = j.at("warm_epochs").get<std::size_t>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
        if (j.contains("beta")) c.beta = j.at("beta").get<double>();
        if (j.contains("n_mc")) c.n_mc = j.at("n_mc").get<std::size_t>();
        if (j.contains("patience")) c.patience = j.at("patience").get<std::size_t>();
        if (j.contains("clip_norm")) c.clip_norm = j.at("clip_norm").get<double>();
    } catch (const json::exception& e) {
        throw cotic::ConfigError(std::string("config field error: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cotic::ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw cotic::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw cotic::ConfigError("config must be a flat JSON object");
    return run_config_from_json(j);
}

cotic::ModelConfig model_config_of(const RunConfig& c, int num_types, double time_scale,
                                   double init_rate) {
    cotic::ModelConfig m;
    m.num_types = num_types;
    m.embed_dim = c.embed_dim;
    m.hidden_dim = c.hidden_dim;
    m.num_layers = c.layers;
    m.kernel_size = c.kernel_size;
    m.dilation = cotic::DilationSchedule::parse(c.dilation);
    m.kernel_activation = cotic::activation_from_string(c.activation);
    m.leaky_slope = c.leaky_slope;
    m.kernel_hidden = c.kernel_hidden;
    m.head_hidden = c.head_hidden;
    m.init_rate = init_rate;
    m.time_scale = time_scale;
    m.validate();
    return m;
}

cotic::TrainConfig train_config_of(const RunConfig& c) {
    cotic::TrainConfig t;
    t.lr = c.lr;
    t.beta1 = c.beta1;
    t.beta2 = c.beta2;
    t.eps_adam = c.eps_adam;
    t.epochs_max = c.epochs_max;
    t.warm_epochs = c.warm_epochs;
    t.batch_size = c.batch_size;
    t.alpha = c.alpha;
    t.beta = c.beta;
    t.n_mc = c.n_mc;
    t.seed = c.seed;
    t.patience = c.patience;
    t.clip_norm = c.clip_norm;
    t.validate();
    return t;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cotic::IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw cotic::IoError("write to '" + path + "' failed");
}

std::vector<std::string> split_values(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_generate(const cotic::HawkesParams& params, double horizon, std::size_t n_sequences,
                 std::uint64_t seed, const std::string& out_path) {
    params.validate();
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw cotic::IoError("cannot write '" + out_path + "'");
    out << "seq_id,time,event_type\n";
    cotic::Rng master(seed);
    for (std::size_t i = 0; i < n_sequences; ++i) {
        const auto child_seed = master.raw();
        const cotic::EventSequence seq = cotic::simulate_hawkes(params, horizon, child_seed);
        for (std::size_t j = 0; j < seq.length(); ++j) {
            char buf[64];
            auto res = std::to_chars(buf, buf + sizeof(buf), seq.times[j]);
            out << 's' << i << ',' << std::string_view(buf, res.ptr - buf) << ','
                << seq.marks[j] << '\n';
        }
    }
    if (!out) throw cotic::IoError("write to '" + out_path + "' failed");
    std::cout << "wrote " << n_sequences << " sequences to " << out_path << "\n";
    return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.data.empty()) throw cotic::ConfigError("train needs a data CSV (--data)");
    const cotic::Dataset data = cotic::load_csv(cfg.data);
    const cotic::SplitResult parts = cotic::split(data, {}, cfg.seed);

    const double init_rate =
        cfg.init_rate_from_data ? cotic::homogeneous_event_rate(parts.train) : 0.0;
    cotic::CoticModel model(
        model_config_of(cfg, data.num_types, data.time_scale, init_rate), cfg.seed);
    const cotic::TrainConfig tcfg = train_config_of(cfg);

    fs::create_directories(cfg.out_dir);
    write_text((fs::path(cfg.out_dir) / "config.json").string(),
               run_config_json(cfg).dump(2) + "\n");

    const cotic::TrainResult result = cotic::train(model, parts.train, parts.val, tcfg);
    cotic::write_history(result.history, (fs::path(cfg.out_dir) / "history.jsonl").string());
    cotic::save_checkpoint(model, (fs::path(cfg.out_dir) / "checkpoint.ckpt").string());

    const cotic::MetricsReport metrics = cotic::evaluate(model, parts.test, cfg.n_mc, cfg.seed);
    write_text((fs::path(cfg.out_dir) / "metrics.json").string(),
               metrics.to_json_string() + "\n");

    std::cout << "status: " << cotic::to_string(result.status) << "\n"
              << "best epoch: " << result.best_epoch << " (val L_ll " << result.best_val_ll
              << ")\n"
              << "test metrics:\n"
              << metrics.to_json_string() << "\n";
    return result.status == cotic::TrainStatus::Diverged ? kExitDiverged : kExitOk;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_path, std::size_t n_mc,
                 std::uint64_t seed, const std::string& out_path) {
    const cotic::CoticModel model = cotic::read_checkpoint(checkpoint);
    cotic::Dataset data = cotic::load_csv(data_path);
    if (data.num_types > model.config().num_types) {
        throw cotic::DataError("dataset has " + std::to_string(data.num_types) +
                               " event types, checkpoint supports " +
                               std::to_string(model.config().num_types));
    }
    data = cotic::rescale_dataset(data, model.config().time_scale);
    const cotic::MetricsReport metrics = cotic::evaluate(model, data, n_mc, seed);
    const std::string text = metrics.to_json_string() + "\n";
    if (!out_path.empty()) write_text(out_path, text);
    std::cout << text;
    return kExitOk;
}

int cmd_export(const std::string& checkpoint, const std::string& data_path,
               const std::string& seq_id, std::size_t grid, const std::string& out_path) {
    const cotic::CoticModel model = cotic::read_checkpoint(checkpoint);
    cotic::Dataset data = cotic::load_csv(data_path);
    if (data.num_types > model.config().num_types) {
        throw cotic::DataError("dataset event types exceed the checkpoint's");
    }
    data = cotic::rescale_dataset(data, model.config().time_scale);
    const cotic::EventSequence* seq = nullptr;
    for (const auto& s : data.sequences) {
        if (s.id == seq_id) {
            seq = &s;
            break;
        }
    }
    if (seq == nullptr) throw cotic::DataError("sequence id '" + seq_id + "' not in dataset");
    cotic::export_intensity(model, *seq, grid, out_path);
    std::cout << "wrote curve for '" << seq_id << "' to " << out_path << "\n";
    return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const std::string& axis_name, const std::string& values_csv,
              const std::string& out_path) {
    if (cfg.data.empty()) throw cotic::ConfigError("sweep needs a data CSV (--data)");
    const cotic::SweepAxis axis = cotic::sweep_axis_from_string(axis_name);
    const std::vector<std::string> values = split_values(values_csv);
    if (values.empty()) throw cotic::ConfigError("sweep needs at least one value");

    const cotic::Dataset data = cotic::load_csv(cfg.data);
    const cotic::ModelConfig base_model = model_config_of(cfg, data.num_types, data.time_scale, 0.0);
    const cotic::TrainConfig base_train = train_config_of(cfg);

    const auto table = cotic::ablation_sweep(base_model, base_train, axis, values, data,
                                             cfg.init_rate_from_data);
    std::ostringstream os;
    for (const auto& cell : table) os << cell.to_json_line() << '\n';
    if (!out_path.empty()) write_text(out_path, os.str());
    std::cout << os.str();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-time convolutional model of marked event sequences"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Simulate Hawkes sequences to CSV");
    double g_mu = 1.0, g_a = 0.0, g_b = 1.0, g_T = 10.0;
    std::size_t g_n = 100, g_types = 1;
    std::uint64_t g_seed = 0;
    std::string g_out = "events.csv";
    gen->add_option("--mu", g_mu, "Base rate")->capture_default_str();
    gen->add_option("--excitation,--a", g_a, "Excitation jump a")->capture_default_str();
    gen->add_option("--decay,--b", g_b, "Decay rate b")->capture_default_str();
    gen->add_option("--horizon", g_T, "Observation window length")->capture_default_str();
    gen->add_option("--num-sequences", g_n, "Number of sequences")->capture_default_str();
    gen->add_option("--num-types", g_types, "Event types, drawn uniformly")->capture_default_str();
    gen->add_option("--seed", g_seed, "Seed")->capture_default_str();
    gen->add_option("--out", g_out, "Output CSV path")->capture_default_str();

    // shared train/sweep options
    const auto add_run_options = [](CLI::App* sub, std::string& config_path, RunConfig& flags) {
        sub->add_option("--config", config_path, "Flat JSON config file");
        sub->add_option("--data", flags.data, "Event CSV path");
        sub->add_option("--out-dir", flags.out_dir, "Artifact directory");
        sub->add_option("--seed", flags.seed, "Seed");
        sub->add_option("--layers", flags.layers, "Convolution layers L");
        sub->add_option("--kernel-size", flags.kernel_size, "Kernel size s");
        sub->add_option("--dilation", flags.dilation, "'doubling' or a fixed integer");
        sub->add_option("--embed-dim", flags.embed_dim, "Mark embedding width");
        sub->add_option("--hidden-dim", flags.hidden_dim, "Channel width");
        sub->add_option("--activation", flags.activation, "Kernel activation");
        sub->add_option("--lr", flags.lr, "Learning rate");
        sub->add_option("--epochs", flags.epochs_max, "Maximum epochs");
        sub->add_option("--warm-epochs", flags.warm_epochs, "Likelihood-only epochs N0");
        sub->add_option("--batch-size", flags.batch_size, "Batch size");
        sub->add_option("--alpha", flags.alpha, "Return-time loss weight");
        sub->add_option("--beta", flags.beta, "Type loss weight");
        sub->add_option("--n-mc", flags.n_mc, "Monte-Carlo samples per sequence");
        sub->add_option("--patience", flags.patience, "Early-stop patience");
    };

    auto* tr = app.add_subcommand("train", "Split 8:1:1, train, write artifacts");
    std::string tr_config;
    RunConfig tr_flags;
    add_run_options(tr, tr_config, tr_flags);

    auto* ev = app.add_subcommand("evaluate", "Metrics of a checkpoint on a CSV");
    std::string ev_ckpt, ev_data, ev_out;
    std::size_t ev_nmc = 100;
    std::uint64_t ev_seed = 0;
    ev->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
    ev->add_option("--data", ev_data, "Event CSV path")->required();
    ev->add_option("--n-mc", ev_nmc, "Monte-Carlo samples per sequence")->capture_default_str();
    ev->add_option("--seed", ev_seed, "Seed")->capture_default_str();
    ev->add_option("--out", ev_out, "Write the report here as well");

    auto* ex = app.add_subcommand("export-intensity", "Intensity curve CSV for one sequence");
    std::string ex_ckpt, ex_data, ex_id, ex_out = "curve.csv";
    std::size_t ex_grid = 200;
    ex->add_option("--checkpoint", ex_ckpt, "Checkpoint path")->required();
    ex->add_option("--data", ex_data, "Event CSV path")->required();
    ex->add_option("--seq-id", ex_id, "Sequence id from the CSV")->required();
    ex->add_option("--grid", ex_grid, "Grid points")->capture_default_str();
    ex->add_option("--out", ex_out, "Output CSV path")->capture_default_str();

    auto* sw = app.add_subcommand("sweep", "Train/evaluate across one config axis");
    std::string sw_config, sw_axis, sw_values, sw_out;
    RunConfig sw_flags;
    add_run_options(sw, sw_config, sw_flags);
    sw->add_option("--axis", sw_axis, "layers | kernel_size | activation")->required();
    sw->add_option("--values", sw_values, "Comma-separated values")->required();
    sw->add_option("--out", sw_out, "Write the JSONL table here as well");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            cotic::HawkesParams params;
            params.mu = g_mu;
            params.a = g_a;
            params.b = g_b;
            if (g_types > 1) params.mark_weights.assign(g_types, 1.0);
            return cmd_generate(params, g_T, g_n, g_seed, g_out);
        }
        const auto resolve = [&](CLI::App* sub, const std::string& config_path,
                                 const RunConfig& flags) {
            RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
            // Flags win over the file.
            const auto take = [&](const char* name, auto member) {
                if (sub->count(name) > 0) cfg.*member = flags.*member;
            };
            take("--data", &RunConfig::data);
            take("--out-dir", &RunConfig::out_dir);
            take("--seed", &RunConfig::seed);
            take("--layers", &RunConfig::layers);
            take("--kernel-size", &RunConfig::kernel_size);
            take("--dilation", &RunConfig::dilation);
            take("--embed-dim", &RunConfig::embed_dim);
            take("--hidden-dim", &RunConfig::hidden_dim);
            take("--activation", &RunConfig::activation);
            take("--lr", &RunConfig::lr);
            take("--epochs", &RunConfig::epochs_max);
            take("--warm-epochs", &RunConfig::warm_epochs);
            take("--batch-size", &RunConfig::batch_size);
            take("--alpha", &RunConfig::alpha);
            take("--beta", &RunConfig::beta);
            take("--n-mc", &RunConfig::n_mc);
            take("--patience", &RunConfig::patience);
            return cfg;
        };
        if (tr->parsed()) return cmd_train(resolve(tr, tr_config, tr_flags));
        if (ev->parsed()) return cmd_evaluate(ev_ckpt, ev_data, ev_nmc, ev_seed, ev_out);
        if (ex->parsed()) return cmd_export(ex_ckpt, ex_data, ex_id, ex_grid, ex_out);
        if (sw->parsed()) {
            return cmd_sweep(resolve(sw, sw_config, sw_flags), sw_axis, sw_values, sw_out);
        }
    } catch (const cotic::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cotic::DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cotic::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
