// fuselab: train, evaluate and inspect multimodal fusion heads over
// precomputed text/image embeddings.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fuselab/dataset.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/fusion_gradcheck.hpp"
#include "fuselab/fusion_model.hpp"
#include "fuselab/grid_search.hpp"
#include "fuselab/history.hpp"
#include "fuselab/model_io.hpp"
#include "fuselab/trainer.hpp"

namespace {

using namespace fuselab;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr double kGradTolerance = 1e-4;

/// Raised for flag combinations CLI11 cannot validate on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kKindNames{"basic", "self-attn", "dual-attn"};

struct TrainFlags {
    std::string kind;
    std::string train, val, test;
    double lr = 1e-3;
    double gamma = 2.0;
    double dropout = 0.0;
    std::string loss = "focal";
    int batch = 32;
    int epochs = 100;
    int patience = 5;
    std::uint64_t seed = 42;
    std::string metric;
    std::string style;
    std::string out, history, metrics;
    bool quiet = false;
};

struct EvalFlags {
    std::string model_file, kind, data;
    bool quiet = false;
};

struct GridFlags {
    std::string train, val;
    std::vector<double> lrs, gammas, dropouts;
    std::vector<std::string> kinds;
    std::string loss = "focal";
    int batch = 32, epochs = 100, patience = 5;
    std::uint64_t seed = 42;
    std::string metric, style, out, best;
    bool quiet = false;
};

struct GradFlags {
    double eps = 1e-3;
    std::uint64_t seed = 42;
    std::vector<std::string> kinds;
    std::size_t coords = 32;
    std::size_t batch = 4;
    double gamma = 2.0;
    std::string fault_block;
    bool quiet = false;
};

struct SplitFlags {
    std::string input, out;
    std::vector<double> fractions{0.8, 0.1, 0.1};
    std::uint64_t seed = 42;
    bool quiet = false;
};

struct ReportFlags {
    std::string history, out;
    bool quiet = false;
};

SelectionMetric resolve_metric(const std::string& metric, const std::string& style) {
    if (!metric.empty()) return parse_selection_metric(metric);
    if (style == "mvsa") return SelectionMetric::WeightedF1;
    return SelectionMetric::MacroF1;
}

std::string with_suffix(const std::string& base, const std::string& suffix) { return base + suffix; }

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw InputError("write failed for '" + path + "'");
}

int cmd_train(const TrainFlags& f) {
    TrainConfig cfg;
    cfg.learning_rate = f.lr;
    cfg.focal_gamma = f.gamma;
    cfg.dropout_rate = f.dropout;
    cfg.loss_kind = parse_loss_kind(f.loss);
    cfg.batch_size = f.batch;
    cfg.max_epochs = f.epochs;
    cfg.patience = f.patience;
    cfg.seed = f.seed;
    cfg.selection_metric = resolve_metric(f.metric, f.style);
    cfg.validate();

    const Dataset train_set = load_embeddings(f.train);
    const Dataset val_set = load_embeddings(f.val);
    const FusionKind kind = parse_fusion_kind(f.kind);
    ModelDims dims;
    dims.text_dim = train_set.text_dim;
    dims.image_dim = train_set.image_dim;

    TrainOptions opts;
    if (!f.quiet) {
        opts.on_epoch = [](const EpochRecord& e) {
            std::fprintf(stderr, "epoch %3d  loss %.5f  val_acc %.4f  macro_f1 %.4f  weighted_f1 %.4f\n",
                         e.epoch, e.train_loss, e.val_accuracy, e.val_macro_f1, e.val_weighted_f1);
            return true;
        };
    }
    auto result = train(init_params<float>(kind, cfg.seed, dims), train_set, val_set, cfg, opts);

    save_model(result.model, f.out);
    const std::string history_path = f.history.empty() ? with_suffix(f.out, ".history.csv") : f.history;
    const std::string metrics_path = f.metrics.empty() ? with_suffix(f.out, ".metrics.json") : f.metrics;
    write_history_csv(result.history, std::filesystem::path(history_path));

    json j{{"kind", std::string(to_string(kind))},
           {"seed", cfg.seed},
           {"config", to_json(cfg)},
           {"best_epoch", result.history.best_epoch},
           {"epochs_run", result.history.epochs.size()},
           {"validation", to_json(evaluate(result.model, val_set))}};
    if (!f.test.empty()) j["test"] = to_json(evaluate(result.model, load_embeddings(f.test)));
    write_text(metrics_path, j.dump(2) + "\n");
    if (!f.quiet)
        std::fprintf(stderr, "best epoch %d; wrote %s, %s, %s\n", result.history.best_epoch,
                     f.out.c_str(), history_path.c_str(), metrics_path.c_str());
    return kExitOk;
}

FusionModel<float> load_checked(const EvalFlags& f, const Dataset& ds) {
    auto model = load_model(f.model_file);
    if (!f.kind.empty() && parse_fusion_kind(f.kind) != model.kind)
        throw InputError("model file holds a " + std::string(to_string(model.kind)) +
                         " model, not " + f.kind);
    check_compatible(model, ds);
    return model;
}

int cmd_eval(const EvalFlags& f) {
    const Dataset ds = load_embeddings(f.data);
    const auto model = load_checked(f, ds);
    json j = to_json(evaluate(model, ds));
    j["kind"] = std::string(to_string(model.kind));
    j["records"] = ds.size();
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_predict(const EvalFlags& f) {
    const Dataset ds = load_embeddings(f.data);
    const auto model = load_checked(f, ds);
    const auto probs = predict_probabilities(model, ds);
    const auto preds = argmax_rows(probs);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto row = probs.row(i);
        json line{{"id", ds.records[i].id},
                  {"probs", std::vector<float>(row.begin(), row.end())},
                  {"pred", preds[i]},
                  {"pred_label", std::string(to_string(static_cast<Sentiment>(preds[i])))}};
        std::cout << line.dump() << "\n";
    }
    return kExitOk;
}

int cmd_gridsearch(const GridFlags& f) {
    GridSpec grid = default_grid();
    if (!f.lrs.empty()) grid.learning_rates = f.lrs;
    if (!f.gammas.empty()) grid.gammas = f.gammas;
    if (!f.dropouts.empty()) grid.dropout_rates = f.dropouts;
    if (!f.kinds.empty()) {
        grid.kinds.clear();
        for (const auto& k : f.kinds) grid.kinds.push_back(parse_fusion_kind(k));
    }
    TrainConfig base;
    base.loss_kind = parse_loss_kind(f.loss);
    base.batch_size = f.batch;
    base.max_epochs = f.epochs;
    base.patience = f.patience;
    base.seed = f.seed;
    base.selection_metric = resolve_metric(f.metric, f.style);

    const Dataset train_set = load_embeddings(f.train);
    const Dataset val_set = load_embeddings(f.val);
    ModelDims dims;
    dims.text_dim = train_set.text_dim;
    dims.image_dim = train_set.image_dim;
    if (!f.quiet)
        std::fprintf(stderr, "grid search over %zu cells\n", grid.cell_count());
    auto result = grid_search(train_set, val_set, grid, base, dims);

    std::ostringstream csv;
    write_grid_csv(result, csv);
    write_text(f.out, csv.str());
    std::size_t failed = 0;
    for (const auto& c : result.cells) failed += c.ok ? 0 : 1;
    if (!result.best) {
        std::cerr << "error: every grid cell failed; see " << f.out << "\n";
        return kExitRuntime;
    }
    const std::string best_path = f.best.empty() ? with_suffix(f.out, ".best.json") : f.best;
    write_text(best_path, best_to_json(result).dump(2) + "\n");
    if (!f.quiet)
        std::fprintf(stderr, "%zu cells (%zu failed); best: %s metric %.4f; wrote %s, %s\n",
                     result.cells.size(), failed, std::string(to_string(result.best_cell().kind)).c_str(),
                     result.best_cell().metric, f.out.c_str(), best_path.c_str());
    return kExitOk;
}

int cmd_gradcheck(const GradFlags& f) {
    if (!(f.eps > 0.0)) throw UsageError("--eps must be positive");
    std::vector<FusionKind> kinds;
    if (f.kinds.empty()) kinds.assign(std::begin(kAllFusionKinds), std::end(kAllFusionKinds));
    for (const auto& k : f.kinds) kinds.push_back(parse_fusion_kind(k));

    json blocks = json::array();
    std::vector<std::string> failures;
    for (FusionKind kind : kinds) {
        FusionGradCheckOptions opts;
        opts.eps = f.eps;
        opts.seed = f.seed;
        opts.coords_per_block = f.coords;
        opts.batch_size = f.batch;
        opts.gamma = f.gamma;
        opts.fault_block = f.fault_block;
        for (const auto& b : check_fusion_gradients(kind, opts)) {
            const bool pass = b.result.max_relative_error < kGradTolerance && b.result.checked > 0;
            blocks.push_back({{"kind", std::string(to_string(kind))},
                              {"block", b.name},
                              {"size", b.size},
                              {"checked", b.result.checked},
                              {"skipped_at_kinks", b.result.skipped},
                              {"max_relative_error", b.result.max_relative_error},
                              {"pass", pass}});
            if (!pass) failures.push_back(std::string(to_string(kind)) + "/" + b.name);
        }
    }
    json j{{"eps", f.eps},
           {"seed", f.seed},
           {"tolerance", kGradTolerance},
           {"coords_per_block", f.coords},
           {"blocks", blocks},
           {"passed", failures.empty()}};
    std::cout << j.dump(2) << "\n";
    for (const auto& name : failures)
        std::cerr << "gradient check failed for " << name << "\n";
    return failures.empty() ? kExitOk : kExitRuntime;
}

int cmd_split(const SplitFlags& f) {
    if (f.fractions.size() != 3) throw UsageError("--fractions needs exactly three values");
    SplitSpec spec{f.fractions[0], f.fractions[1], f.fractions[2], f.seed};
    spec.validate();
    const Dataset ds = load_embeddings(f.input);
    auto parts = stratified_split(ds, spec);
    const std::string names[3] = {".train.mmeb", ".val.mmeb", ".test.mmeb"};
    const Dataset* sets[3] = {&parts.train, &parts.val, &parts.test};
    json j{{"seed", f.seed}};
    for (int i = 0; i < 3; ++i) {
        save_embeddings(*sets[i], f.out + names[i]);
        j[names[i].substr(1, names[i].find('.', 1) - 1)] = {{"path", f.out + names[i]},
                                                            {"records", sets[i]->size()}};
    }
    if (!f.quiet) std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_report(const ReportFlags& f) {
    const auto rows = breakdown_series(read_history_csv(f.history));
    std::ostringstream wide, longform;
    write_breakdown_csv(rows, wide);
    write_breakdown_long_csv(rows, longform);
    write_text(f.out, wide.str());
    std::filesystem::path long_path(f.out);
    long_path.replace_extension(".long.csv");
    write_text(long_path.string(), longform.str());
    if (!f.quiet) std::cout << wide.str();
    return kExitOk;
}

void add_quiet(CLI::App* cmd, bool& quiet) {
    cmd->add_flag("--quiet", quiet, "Suppress progress and human-readable output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal fusion sentiment trainer over precomputed embeddings"};
    app.require_subcommand(1, 1);

    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "Train one fusion head with early stopping");
    train_cmd->add_option("--model", tf.kind, "Fusion kind")->required()->check(CLI::IsMember(kKindNames));
    train_cmd->add_option("--train", tf.train, "Training embeddings")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--val", tf.val, "Validation embeddings")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--test", tf.test, "Optional test embeddings")->check(CLI::ExistingFile);
    train_cmd->add_option("--lr", tf.lr, "Learning rate")->capture_default_str();
    train_cmd->add_option("--gamma", tf.gamma, "Focal loss gamma")->capture_default_str();
    train_cmd->add_option("--dropout", tf.dropout, "Dropout rate")->capture_default_str();
    train_cmd->add_option("--loss", tf.loss, "Loss")->check(CLI::IsMember({"focal", "ce"}))->capture_default_str();
    train_cmd->add_option("--batch", tf.batch, "Batch size")->capture_default_str();
    train_cmd->add_option("--epochs", tf.epochs, "Maximum epochs")->capture_default_str();
    train_cmd->add_option("--patience", tf.patience, "Early-stopping patience")->capture_default_str();
    train_cmd->add_option("--seed", tf.seed, "Random seed")->capture_default_str();
    train_cmd->add_option("--metric", tf.metric, "Selection metric")
        ->check(CLI::IsMember({"macro-f1", "weighted-f1", "accuracy"}));
    train_cmd->add_option("--dataset-style", tf.style, "memotion (macro-F1) or mvsa (weighted-F1)")
        ->check(CLI::IsMember({"memotion", "mvsa"}));
    train_cmd->add_option("--out", tf.out, "Output model file")->required();
    train_cmd->add_option("--history", tf.history, "History CSV (default <out>.history.csv)");
    train_cmd->add_option("--metrics", tf.metrics, "Metrics JSON (default <out>.metrics.json)");
    add_quiet(train_cmd, tf.quiet);

    EvalFlags ef;
    auto* eval_cmd = app.add_subcommand("eval", "Print a metrics report for a model on a dataset");
    EvalFlags pf;
    auto* predict_cmd = app.add_subcommand("predict", "Per-record probabilities as JSON lines");
    for (auto [cmd, flags] : {std::pair{eval_cmd, &ef}, std::pair{predict_cmd, &pf}}) {
        cmd->add_option("--model-file", flags->model_file, "Model file")->required()->check(CLI::ExistingFile);
        auto* data = cmd->add_option("--embeddings,--test", flags->data, "Embeddings to score")
                         ->check(CLI::ExistingFile);
        data->required();
        cmd->add_option("--model", flags->kind, "Expected fusion kind")->check(CLI::IsMember(kKindNames));
        add_quiet(cmd, flags->quiet);
    }

    GridFlags gf;
    auto* grid_cmd = app.add_subcommand("gridsearch", "Exhaustive search over lr x dropout x gamma x kind");
    grid_cmd->add_option("--train", gf.train, "Training embeddings")->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--val", gf.val, "Validation embeddings")->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--lr", gf.lrs, "Learning rates (default 1e-2,1e-3,1e-4,1e-5)")->delimiter(',');
    grid_cmd->add_option("--gamma", gf.gammas, "Focal gammas (default 2,3,4)")->delimiter(',');
    grid_cmd->add_option("--dropout", gf.dropouts, "Dropout rates (default 0,0.2,0.5)")->delimiter(',');
    grid_cmd->add_option("--model", gf.kinds, "Fusion kinds (default all)")->delimiter(',')->check(CLI::IsMember(kKindNames));
    grid_cmd->add_option("--loss", gf.loss, "Loss")->check(CLI::IsMember({"focal", "ce"}));
    grid_cmd->add_option("--batch", gf.batch, "Batch size")->capture_default_str();
    grid_cmd->add_option("--epochs", gf.epochs, "Maximum epochs per cell")->capture_default_str();
    grid_cmd->add_option("--patience", gf.patience, "Early-stopping patience")->capture_default_str();
    grid_cmd->add_option("--seed", gf.seed, "Random seed")->capture_default_str();
    grid_cmd->add_option("--metric", gf.metric, "Selection metric")
        ->check(CLI::IsMember({"macro-f1", "weighted-f1", "accuracy"}));
    grid_cmd->add_option("--dataset-style", gf.style, "memotion or mvsa")->check(CLI::IsMember({"memotion", "mvsa"}));
    grid_cmd->add_option("--out", gf.out, "Results CSV")->required();
    grid_cmd->add_option("--best", gf.best, "Best-cell JSON (default <out>.best.json)");
    add_quiet(grid_cmd, gf.quiet);

    GradFlags cf;
    auto* grad_cmd = app.add_subcommand("gradcheck", "64-bit finite-difference check of every parameter block");
    grad_cmd->add_option("--eps", cf.eps, "Central-difference step")->capture_default_str();
    grad_cmd->add_option("--seed", cf.seed, "Random seed")->capture_default_str();
    grad_cmd->add_option("--model", cf.kinds, "Fusion kinds (default all)")->delimiter(',')->check(CLI::IsMember(kKindNames));
    grad_cmd->add_option("--coords", cf.coords, "Coordinates sampled per block, 0 = all")->capture_default_str();
    grad_cmd->add_option("--batch", cf.batch, "Samples in the objective")->capture_default_str();
    grad_cmd->add_option("--gamma", cf.gamma, "Focal gamma")->capture_default_str();
    grad_cmd->add_option("--fault-block", cf.fault_block, "Distort one block's analytic gradient (harness self-test)")
        ->group("");
    add_quiet(grad_cmd, cf.quiet);

    SplitFlags sf;
    auto* split_cmd = app.add_subcommand("split", "Stratified train/val/test split of one embedding file");
    split_cmd->add_option("--embeddings", sf.input, "Input embeddings")->required()->check(CLI::ExistingFile);
    split_cmd->add_option("--fractions", sf.fractions, "train,val,test fractions")->delimiter(',')->capture_default_str();
    split_cmd->add_option("--seed", sf.seed, "Random seed")->capture_default_str();
    split_cmd->add_option("--out", sf.out, "Output prefix")->required();
    add_quiet(split_cmd, sf.quiet);

    ReportFlags rf;
    auto* report_cmd = app.add_subcommand("report", "Per-class F1 breakdown from a history CSV");
    report_cmd->add_option("--history", rf.history, "History CSV")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--out", rf.out, "Breakdown CSV (long form goes to <stem>.long.csv)")->required();
    add_quiet(report_cmd, rf.quiet);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << "\n";
        auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(tf);
        if (*eval_cmd) return cmd_eval(ef);
        if (*predict_cmd) return cmd_predict(pf);
        if (*grid_cmd) return cmd_gridsearch(gf);
        if (*grad_cmd) return cmd_gradcheck(cf);
        if (*split_cmd) return cmd_split(sf);
        if (*report_cmd) return cmd_report(rf);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DomainError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
