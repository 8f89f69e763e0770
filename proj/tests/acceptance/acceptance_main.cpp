// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fuselab/byte_io.hpp"
#include "fuselab/dataset.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/fusion_gradcheck.hpp"
#include "fuselab/grid_search.hpp"
#include "fuselab/losses.hpp"
#include "fuselab/metrics.hpp"
#include "fuselab/model_io.hpp"
#include "fuselab/trainer.hpp"
#include "metrics_oracle.hpp"
#include "process.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace fuselab;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

template <class T>
std::vector<T> normal_vector(std::size_t n, Rng& rng) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.normal());
    return v;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
    constexpr double kTol = 1e-4;
    constexpr double kBudget = 300.0;
    constexpr std::size_t kCoords = 1024;
    Outcome o{true, ""};
    for (auto kind : kAllFusionKinds) {
        const auto t0 = Clock::now();
        FusionGradCheckOptions opts;  // full widths, batch 4, eps 1e-3, gamma 2
        opts.coords_per_block = kCoords;
        double worst = 0.0;
        std::size_t checked = 0, skipped = 0;
        std::string worst_block;
        for (const auto& b : check_fusion_gradients(kind, opts)) {
            checked += b.result.checked;
            skipped += b.result.skipped;
            if (b.result.checked == 0) o.pass = false;
            if (b.result.max_relative_error >= worst) {
                worst = b.result.max_relative_error;
                worst_block = b.name;
            }
        }
        const double secs = seconds_since(t0);
        if (!(worst < kTol) || secs > kBudget) o.pass = false;
        o.detail += fmt("%s: max rel err %.3g (%s), %zu coords, %zu skipped at kinks, %.1fs",
                        std::string(to_string(kind)).c_str(), worst, worst_block.c_str(), checked,
                        skipped, secs);
        if (!(worst < kTol)) {
            // Diagnostic only: a truncation-limited miss shrinks ~100x at eps/10.
            opts.eps = 1e-4;
            double fine = 0.0;
            for (const auto& b : check_fusion_gradients(kind, opts))
                fine = std::max(fine, b.result.max_relative_error);
            o.detail += fmt(" [same coords at eps=1e-4: %.3g]", fine);
        }
        o.detail += "; ";
    }
    return o;
}

template <class T>
bool check_attention_identities(double tol, std::string& detail) {
    Rng rng(sizeof(T) == 4 ? 101 : 202);
    const ModelDims dims;
    const std::size_t d = dims.model_dim;
    double max_single = 0.0, max_cross = 0.0, max_half = 0.0;
    bool weight_exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        // (a) single key
        auto q = Matrix<T>::row_vector(normal_vector<T>(d, rng));
        auto k = Matrix<T>::row_vector(normal_vector<T>(d, rng));
        auto v = Matrix<T>::row_vector(normal_vector<T>(d, rng));
        auto single = kernels::scaled_dot_attention(q, k, v, d);
        weight_exact = weight_exact && single.weights(0, 0) == T{1};
        for (std::size_t c = 0; c < d; ++c)
            max_single = std::max(max_single, std::abs(double(single.output(0, c)) - double(v(0, c))));

        // (b) dual-attention intermediates against an independent product
        auto model = init_params<T>(FusionKind::DualAttention, 1000 + trial, dims);
        auto t_in = Matrix<T>::row_vector(normal_vector<T>(d, rng));
        auto v_in = Matrix<T>::row_vector(normal_vector<T>(d, rng));
        auto cross = cross_attention_trace(t_in, v_in, *model.cross_text, *model.cross_image);
        auto t_ref = kernels::serial::matmul(v_in, model.cross_image->value);
        auto v_ref = kernels::serial::matmul(t_in, model.cross_text->value);
        for (std::size_t c = 0; c < d; ++c) {
            max_cross = std::max(max_cross, std::abs(double(cross.text_adjusted.output(0, c)) - double(t_ref(0, c))));
            max_cross = std::max(max_cross, std::abs(double(cross.image_adjusted.output(0, c)) - double(v_ref(0, c))));
        }

        // (c) self-attention over identical tokens
        auto tr = self_attention_trace(t_in, t_in, *model.self_attn);
        for (double w : tr.attention.weights.values()) max_half = std::max(max_half, std::abs(w - 0.5));
    }
    const bool ok = weight_exact && max_single == 0.0 && max_cross <= tol && max_half <= 1e-6;
    detail += fmt("%s: single-key weight exactly 1 %s, |out-v| %.3g, |t'-v W_Vv|,|v'-t W_Vt| %.3g (tol %.0e), |w-0.5| %.3g; ",
                  sizeof(T) == 4 ? "f32" : "f64", weight_exact ? "yes" : "no", max_single, max_cross, tol, max_half);
    return ok;
}

Outcome attention_identities() {
    Outcome o;
    const bool f = check_attention_identities<float>(1e-6, o.detail);
    const bool d = check_attention_identities<double>(1e-12, o.detail);
    o.pass = f && d;
    return o;
}

Outcome loss_reductions() {
    Rng rng(303);
    double max_gap = 0.0;
    std::size_t violations = 0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> p(3);
        double total = 0.0;
        for (auto& x : p) total += (x = -std::log(1.0 - rng.uniform()));
        for (auto& x : p) x /= total;
        const int y = static_cast<int>(rng.index(3));
        const double ce = cross_entropy<double>(p, y);
        max_gap = std::max(max_gap, std::abs(focal_loss<double>(p, y, 0.0) - ce));
        for (double g : {2.0, 3.0, 4.0})
            if (focal_loss<double>(p, y, g) > ce) ++violations;
    }
    return {max_gap <= 1e-12 && violations == 0,
            fmt("1000 pairs: max |FL(g=0)-CE| %.3g, FL>CE violations for g in {2,3,4}: %zu", max_gap, violations)};
}

Outcome metric_oracle() {
    Rng rng(404);
    std::size_t mismatches = 0, zero_support = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<int> p(200), y(200);
        // A quarter of the vectors draw labels and predictions from a reduced alphabet.
        const std::size_t yk = trial % 4 == 0 ? 1 + rng.index(2) : 3;
        const std::size_t pk = trial % 4 == 1 ? 1 + rng.index(2) : 3;
        for (std::size_t i = 0; i < 200; ++i) {
            y[i] = static_cast<int>(rng.index(yk));
            p[i] = static_cast<int>(rng.index(pk));
        }
        auto r = report(confusion(p, y));
        auto o = testing::oracle_scores(p, y);
        bool same = r.accuracy == o.accuracy && r.macro_f1 == o.macro_f1 && r.weighted_f1 == o.weighted_f1;
        for (int c = 0; c < 3; ++c) {
            same = same && r.per_class[c].f1 == o.f1[c];
            if (r.per_class[c].support == 0) ++zero_support;
        }
        if (!same) ++mismatches;
    }
    return {mismatches == 0 && zero_support > 0,
            fmt("1000 vectors of n=200: %zu mismatches, %zu zero-support classes exercised", mismatches, zero_support)};
}

Outcome trainability() {
    Outcome o{true, ""};
    const auto train_set = testing::separable_dataset(64, 505, 768, 384, 2.0, "tr");
    const auto val_set = testing::separable_dataset(30, 506, 768, 384, 2.0, "va");
    for (auto kind : kAllFusionKinds) {
        const auto t0 = Clock::now();
        TrainConfig cfg;
        cfg.learning_rate = 1e-3;
        cfg.focal_gamma = 2.0;
        cfg.dropout_rate = 0.0;
        cfg.max_epochs = 200;
        cfg.patience = 200;  // run until the training split is fit, not until validation stalls
        TrainOptions opts;
        opts.track_train_accuracy = true;
        int reached = 0;
        opts.on_epoch = [&](const EpochRecord& e) {
            if (*e.train_accuracy == 1.0) reached = e.epoch;
            return reached == 0;
        };
        auto r = train(init_params<float>(kind, 42), train_set, val_set, cfg, opts);
        const double secs = seconds_since(t0);
        const double final_acc = *r.history.epochs.back().train_accuracy;
        if (reached == 0 || secs > 120.0) o.pass = false;
        o.detail += fmt("%s: train acc %.3f at epoch %zu, %.1fs; ", std::string(to_string(kind)).c_str(),
                        final_acc, r.history.epochs.size(), secs);
    }
    return o;
}

Outcome cli_determinism() {
    testing::TempDir dir;
    const auto train_path = (dir / "train.mmeb").string(), val_path = (dir / "val.mmeb").string();
    save_embeddings(testing::separable_dataset(60, 7, 768, 384, 2.0, "tr"), train_path);
    save_embeddings(testing::separable_dataset(15, 8, 768, 384, 2.0, "va"), val_path);
    Outcome o{true, ""};
    for (auto kind : kAllFusionKinds) {
        const std::string k(to_string(kind));
        std::string files[2];
        for (int run = 0; run < 2; ++run) {
            files[run] = (dir / (k + std::to_string(run) + ".fmdl")).string();
            auto res = testing::run(std::string(FUSELAB_BIN) + " train --model " + k + " --train " + train_path +
                                    " --val " + val_path + " --epochs 4 --batch 16 --dropout 0.2 --seed 9 --quiet --out " +
                                    files[run] + " 2>/dev/null");
            if (res.exit_code != 0) o.pass = false;
        }
        const bool model_same = io::read_file(files[0]) == io::read_file(files[1]);
        const bool hist_same = io::read_file(files[0] + ".history.csv") == io::read_file(files[1] + ".history.csv");
        o.pass = o.pass && model_same && hist_same;
        o.detail += fmt("%s: model %s, history %s; ", k.c_str(), model_same ? "identical" : "DIFFERS",
                        hist_same ? "identical" : "DIFFERS");
    }
    return o;
}

template <class Fn>
bool rejects_with_format_error(Fn&& fn) {
    try {
        fn();
    } catch (const FormatError&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

Outcome format_round_trips() {
    testing::TempDir dir;
    auto ds = testing::separable_dataset(12, 9, 768, 384, 2.0, "r");
    save_embeddings(ds, dir / "a.mmeb");
    save_embeddings(load_embeddings(dir / "a.mmeb"), dir / "b.mmeb");
    const auto emb = io::read_file(dir / "a.mmeb");
    const bool emb_same = emb == io::read_file(dir / "b.mmeb");

    bool model_same = true;
    std::vector<std::uint8_t> model;
    for (auto kind : kAllFusionKinds) {
        save_model(init_params<float>(kind, 11), dir / "a.fmdl");
        save_model(load_model(dir / "a.fmdl"), dir / "b.fmdl");
        model = io::read_file(dir / "a.fmdl");
        model_same = model_same && model == io::read_file(dir / "b.fmdl");
    }

    int rejected = 0, cases = 0;
    auto expect = [&](bool r) { ++cases; rejected += r; };
    auto mutate = [](std::vector<std::uint8_t> b, std::size_t at, std::uint8_t v) { b[at] = v; return b; };
    auto cut = [](std::vector<std::uint8_t> b, std::size_t n) { b.resize(n); return b; };
    expect(rejects_with_format_error([&] { decode_embeddings(mutate(emb, 0, 'X')); }));
    expect(rejects_with_format_error([&] { decode_embeddings(mutate(emb, 4, 9)); }));
    expect(rejects_with_format_error([&] { decode_embeddings(cut(emb, 10)); }));
    expect(rejects_with_format_error([&] { decode_embeddings(cut(emb, emb.size() - 4)); }));
    expect(rejects_with_format_error([&] { decode_embeddings(cut(emb, emb.size() / 2)); }));
    expect(rejects_with_format_error([&] { decode_model(mutate(model, 0, 'X')); }));
    expect(rejects_with_format_error([&] { decode_model(mutate(model, 4, 9)); }));
    expect(rejects_with_format_error([&] { decode_model(cut(model, 6)); }));
    expect(rejects_with_format_error([&] { decode_model(cut(model, model.size() - 1)); }));
    expect(rejects_with_format_error([&] { decode_model(cut(model, model.size() / 2)); }));
    return {emb_same && model_same && rejected == cases,
            fmt("embedding file resave %s, model file resave %s, %d/%d malformed inputs rejected with format errors",
                emb_same ? "identical" : "DIFFERS", model_same ? "identical" : "DIFFERS", rejected, cases)};
}

Outcome grid_cardinality() {
    const auto grid = default_grid();
    const ModelDims dims{16, 8, 8, 8};
    const auto train_set = testing::noise_dataset(45, 12, 16, 8, "tr");
    const auto val_set = testing::separable_dataset(15, 13, 16, 8, 0.5, "va");
    TrainConfig base;
    base.max_epochs = 3;
    base.batch_size = 16;
    auto result = grid_search(train_set, val_set, grid, base, dims);

    std::stringstream csv;
    write_grid_csv(result, csv);
    std::string line;
    std::getline(csv, line);
    std::size_t rows = 0;
    double column_max = -1.0;
    std::vector<double> metrics;
    while (std::getline(csv, line)) {
        ++rows;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
        if (fields.size() > 5 && fields[4] == "ok") column_max = std::max(column_max, std::stod(fields[5]));
    }
    const bool best_ok = result.best && result.best_cell().metric == column_max;
    return {grid.cell_count() == 108 && rows == 108 && best_ok,
            fmt("grid cells %zu, csv rows %zu, best metric %.6g, column max %.6g", grid.cell_count(), rows,
                result.best ? result.best_cell().metric : -1.0, column_max)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"gradient-fidelity", gradient_fidelity},
        {"attention-identities", attention_identities},
        {"loss-reductions", loss_reductions},
        {"metric-oracle-equivalence", metric_oracle},
        {"trainability", trainability},
        {"cli-determinism", cli_determinism},
        {"format-round-trips", format_round_trips},
        {"grid-cardinality", grid_cardinality},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s :: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
