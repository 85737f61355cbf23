#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <doctest.h>

#include "cotic/errors.hpp"
#include "cotic/evaluation.hpp"
#include "cotic/hawkes.hpp"
#include "cotic/losses.hpp"
#include "cotic/training.hpp"

using namespace cotic;
namespace fs = std::filesystem;

namespace {

ModelConfig toy_model(int num_types) {
    ModelConfig cfg;
    cfg.num_types = num_types;
    cfg.embed_dim = 3;
    cfg.hidden_dim = 4;
    cfg.num_layers = 1;
    cfg.kernel_size = 3;
    cfg.dilation = DilationSchedule::fixed_at(1);
    cfg.kernel_hidden = {6};
    cfg.head_hidden = {5};
    return cfg;
}

Dataset toy_dataset(std::size_t n, double horizon, std::uint64_t seed) {
    HawkesParams params{0.5, 0.5, 1.0, {}};
    std::vector<EventSequence> raw;
    for (std::size_t i = 0; i < n; ++i) {
        raw.push_back(simulate_hawkes(params, horizon, seed + i));
    }
    return make_dataset(std::move(raw));
}

TrainConfig toy_train(std::size_t epochs, std::size_t warm) {
    TrainConfig cfg;
    cfg.epochs_max = epochs;
    cfg.warm_epochs = warm;
    cfg.batch_size = 4;
    cfg.n_mc = 20;
    cfg.patience = 1000;
    cfg.seed = 11;
    return cfg;
}

std::vector<Array> snapshot(CoticModel& model, const std::string& prefix) {
    std::vector<Array> out;
    for (auto& p : model.parameters()) {
        if (p.name.rfind(prefix, 0) == 0) out.push_back(*p.array);
    }
    return out;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / "cotic_train_test";
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

}  // namespace

TEST_CASE("adam with a zero gradient leaves parameters unchanged") {
    Array param({3}, {1.0, -2.0, 0.5});
    const Array before = param;
    Array grad({3});
    Array m({3}), v({3});
    std::uint64_t step = 0;
    CHECK(adam_step(param, grad, m, v, step, 0.01, 0.9, 0.999, 1e-8));
    CHECK(step == 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(param[i] == before[i]);
}

TEST_CASE("the first adam step has magnitude near the learning rate") {
    Array param({1}, {0.0});
    Array grad({1}, {0.3});
    Array m({1}), v({1});
    std::uint64_t step = 0;
    adam_step(param, grad, m, v, step, 0.01, 0.9, 0.999, 1e-8);
    CHECK(std::fabs(std::fabs(param[0]) - 0.01) < 1e-6);
    CHECK(param[0] < 0.0);
}

TEST_CASE("adam descends a quadratic") {
    Array w({1}, {1.0});
    Array m({1}), v({1});
    std::uint64_t step = 0;
    double prev = std::fabs(w[0]);
    for (int i = 0; i < 10; ++i) {
        Array grad({1}, {2.0 * w[0]});
        adam_step(w, grad, m, v, step, 0.05, 0.9, 0.999, 1e-8);
        CHECK(std::fabs(w[0]) < prev);
        prev = std::fabs(w[0]);
    }
}

TEST_CASE("non-finite gradients are rejected") {
    Array param({2}, {1.0, 2.0});
    const Array before = param;
    Array grad({2}, {1.0, std::nan("")});
    Array m({2}), v({2});
    std::uint64_t step = 0;
    CHECK_FALSE(adam_step(param, grad, m, v, step, 0.01, 0.9, 0.999, 1e-8));
    CHECK(step == 0);
    for (std::size_t i = 0; i < 2; ++i) CHECK(param[i] == before[i]);
}

TEST_CASE("one-epoch smoke run") {
    const Dataset data = toy_dataset(4, 10.0, 100);
    CoticModel model(toy_model(data.num_types), 1);
    Dataset train_part = data, val_part = data;
    train_part.sequences.resize(2);
    val_part.sequences.erase(val_part.sequences.begin(), val_part.sequences.begin() + 2);
    const TrainResult result = train(model, train_part, val_part, toy_train(1, 0));
    CHECK(result.history.size() == 1);
    CHECK(result.best_epoch == 1);
    CHECK(std::isfinite(result.history[0].train_ll));
    CHECK(std::isfinite(result.history[0].val_ll));
}

TEST_CASE("warm phase freezes the prediction heads") {
    const Dataset data = toy_dataset(6, 8.0, 200);
    Dataset train_part = data, val_part = data;
    train_part.sequences.resize(4);
    val_part.sequences.erase(val_part.sequences.begin(), val_part.sequences.begin() + 4);

    SUBCASE("all-warm training leaves heads bit-identical") {
        CoticModel model(toy_model(data.num_types), 2);
        const auto heads_before = snapshot(model, "head_");
        TrainConfig cfg = toy_train(3, 3);
        train(model, train_part, val_part, cfg);
        const auto heads_after = snapshot(model, "head_");
        REQUIRE(heads_before.size() == heads_after.size());
        for (std::size_t i = 0; i < heads_before.size(); ++i) {
            for (std::size_t e = 0; e < heads_before[i].size(); ++e) {
                CHECK(heads_before[i][e] == heads_after[i][e]);
            }
        }
        // The backbone did move.
        CoticModel fresh(toy_model(data.num_types), 2);
        const auto bb_before = snapshot(fresh, "backbone.");
        CoticModel model2(toy_model(data.num_types), 2);
        train(model2, train_part, val_part, cfg);
        const auto bb_after = snapshot(model2, "backbone.");
        bool moved = false;
        for (std::size_t i = 0; i < bb_before.size(); ++i) {
            for (std::size_t e = 0; e < bb_before[i].size(); ++e) {
                moved |= bb_before[i][e] != bb_after[i][e];
            }
        }
        CHECK(moved);
    }

    SUBCASE("no warm phase trains heads from the first step") {
        CoticModel model(toy_model(data.num_types), 3);
        const auto heads_before = snapshot(model, "head_");
        TrainConfig cfg = toy_train(1, 0);
        train(model, train_part, val_part, cfg);
        const auto heads_after = snapshot(model, "head_");
        bool moved = false;
        for (std::size_t i = 0; i < heads_before.size(); ++i) {
            for (std::size_t e = 0; e < heads_before[i].size(); ++e) {
                moved |= heads_before[i][e] != heads_after[i][e];
            }
        }
        CHECK(moved);
    }
}

TEST_CASE("training is bit-deterministic in config and seed") {
    const Dataset data = toy_dataset(6, 8.0, 300);
    Dataset train_part = data, val_part = data;
    train_part.sequences.resize(4);
    val_part.sequences.erase(val_part.sequences.begin(), val_part.sequences.begin() + 4);

    const auto run = [&]() {
        CoticModel model(toy_model(data.num_types), 5);
        return train(model, train_part, val_part, toy_train(3, 1));
    };
    const TrainResult a = run();
    const TrainResult b = run();
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_ll == b.history[i].train_ll);
        CHECK(a.history[i].val_ll == b.history[i].val_ll);
        CHECK(a.history[i].train_time_loss == b.history[i].train_time_loss);
        CHECK(a.history[i].train_type_loss == b.history[i].train_type_loss);
    }
}

TEST_CASE("the returned model is the best-validation checkpoint") {
    const Dataset data = toy_dataset(8, 8.0, 400);
    Dataset train_part = data, val_part = data;
    train_part.sequences.resize(5);
    val_part.sequences.erase(val_part.sequences.begin(), val_part.sequences.begin() + 5);
    CoticModel model(toy_model(data.num_types), 6);
    const TrainResult result = train(model, train_part, val_part, toy_train(4, 1));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& rec : result.history) best = std::min(best, rec.val_ll);
    CHECK(result.best_val_ll == best);
}

TEST_CASE("training beats the homogeneous-Poisson baseline on Hawkes data") {
    HawkesParams params{0.3, 0.9, 1.5, {}};
    std::vector<EventSequence> raw;
    for (std::uint64_t i = 0; i < 32; ++i) raw.push_back(simulate_hawkes(params, 60.0, 500 + i));
    Dataset data = make_dataset(std::move(raw));
    const SplitResult parts = split(data, {}, 3);

    ModelConfig mcfg = toy_model(1);
    mcfg.hidden_dim = 8;
    mcfg.kernel_hidden = {8, 8};
    mcfg.init_rate = homogeneous_event_rate(parts.train);

    CoticModel model(mcfg, 7);
    TrainConfig tcfg = toy_train(30, 5);
    tcfg.lr = 5e-3;
    tcfg.n_mc = 50;
    tcfg.batch_size = 8;
    const TrainResult result = train(model, parts.train, parts.val, tcfg);

    // Homogeneous MLE baseline on each validation sequence: lambda = k/t_k.
    double baseline_nll = 0.0, model_nll = 0.0;
    std::size_t events_val = 0;
    Rng rng(77);
    for (const auto& seq : parts.val.sequences) {
        if (seq.empty()) continue;
        const double k = static_cast<double>(seq.length());
        const double lam = k / seq.times.back();
        baseline_nll += lam * seq.times.back() - k * std::log(lam);
        ModelPass pass(model, seq);
        model_nll +=
            nll([&pass](const std::vector<double>& ts) { return pass.intensity_at(ts); }, seq,
                500, rng)
                .value()
                .item();
        events_val += seq.length();
    }
    REQUIRE(events_val > 0);
    CHECK(model_nll / static_cast<double>(events_val) <
          baseline_nll / static_cast<double>(events_val));
    CHECK(result.status != TrainStatus::Diverged);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    TempDir dir;
    const Dataset data = toy_dataset(4, 8.0, 600);
    CoticModel model(toy_model(data.num_types), 8);

    const fs::path p1 = dir.path / "a.ckpt";
    const fs::path p2 = dir.path / "b.ckpt";
    save_checkpoint(model, p1.string());
    CoticModel loaded = read_checkpoint(p1.string());
    save_checkpoint(loaded, p2.string());

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // Loss is identical to the last bit before and after the round trip.
    const EventSequence& seq = data.sequences[0];
    const auto loss_of = [&](const CoticModel& m) {
        ModelPass pass(m, seq);
        Rng rng(5);
        return nll([&pass](const std::vector<double>& ts) { return pass.intensity_at(ts); }, seq,
                   100, rng)
            .value()
            .item();
    };
    CHECK(loss_of(model) == loss_of(loaded));
}

TEST_CASE("checkpoint integrity and schema guards") {
    TempDir dir;
    CoticModel model(toy_model(2), 9);
    const fs::path path = dir.path / "c.ckpt";
    save_checkpoint(model, path.string());

    SUBCASE("corrupt payload is rejected") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        f.put('\x7f');
        f.close();
        CHECK_THROWS_AS(read_checkpoint(path.string()), IntegrityError);
    }

    SUBCASE("truncated file is rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();
        CHECK_THROWS_AS(read_checkpoint(path.string()), IntegrityError);
    }

    SUBCASE("type-count mismatch is rejected on load into a model") {
        CoticModel other(toy_model(3), 9);
        CHECK_THROWS_AS(load_checkpoint(other, path.string()), IntegrityError);
    }
}

TEST_CASE("divergent losses abort with the last good checkpoint") {
    const Dataset data = toy_dataset(4, 8.0, 700);
    Dataset train_part = data, val_part = data;
    train_part.sequences.resize(2);
    val_part.sequences.erase(val_part.sequences.begin(), val_part.sequences.begin() + 2);

    CoticModel model(toy_model(data.num_types), 10);
    // Poison one parameter so the first forward pass is non-finite.
    for (auto& p : model.parameters()) {
        if (p.name == "intensity.linear.bias") {
            (*p.array)[0] = std::numeric_limits<double>::infinity();
        }
    }
    const std::string before = checkpoint_bytes(model);
    CoticModel trained = model_from_bytes(before);
    const TrainResult result = train(trained, train_part, val_part, toy_train(3, 0));
    CHECK(result.status == TrainStatus::Diverged);
    // The handed-back model is the initial (last good) checkpoint.
    CHECK(checkpoint_bytes(trained) == before);
}
