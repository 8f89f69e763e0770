#include "fuselab/grid_search.hpp"

#include <algorithm>
#include <ostream>

#include "fuselab/errors.hpp"
#include "fuselab/history.hpp"
#include "fuselab/parallel.hpp"
#include "fuselab/trainer.hpp"

namespace fuselab {

GridSpec default_grid() {
    return {{1e-2, 1e-3, 1e-4, 1e-5},
            {0.0, 0.2, 0.5},
            {2.0, 3.0, 4.0},
            {FusionKind::Basic, FusionKind::SelfAttention, FusionKind::DualAttention}};
}

const GridCell& GridSearchResult::best_cell() const {
    if (!best) throw InputError("grid search produced no successful cell");
    return cells.at(*best);
}

GridSearchResult grid_search(const Dataset& train_set, const Dataset& val_set,
                             const GridSpec& grid, const TrainConfig& base,
                             const ModelDims& dims) {
    if (grid.cell_count() == 0) throw InputError("grid search needs a nonempty grid");
    GridSearchResult result;
    for (FusionKind kind : grid.kinds)
        for (double lr : grid.learning_rates)
            for (double dropout : grid.dropout_rates)
                for (double gamma : grid.gammas) {
                    GridCell cell;
                    cell.kind = kind;
                    cell.config = base;
                    cell.config.learning_rate = lr;
                    cell.config.dropout_rate = dropout;
                    cell.config.focal_gamma = gamma;
                    result.cells.push_back(cell);
                }

    const auto n = static_cast<std::ptrdiff_t>(result.cells.size());
    const int nt = std::min<int>(parallel::max_threads(), static_cast<int>(n));
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        GridCell& cell = result.cells[static_cast<std::size_t>(i)];
        try {
            auto model = init_params<float>(cell.kind, cell.config.seed, dims);
            auto trained = train(std::move(model), train_set, val_set, cell.config);
            const auto& best = trained.history.epochs.at(
                static_cast<std::size_t>(trained.history.best_epoch - 1));
            cell.metric = metric_value(*best.val_report, cell.config.selection_metric);
            cell.best_epoch = trained.history.best_epoch;
            cell.epochs_run = static_cast<int>(trained.history.epochs.size());
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
    }

    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const auto& c = result.cells[i];
        if (c.ok && (!result.best || c.metric > result.cells[*result.best].metric)) result.best = i;
    }
    return result;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch == '\n' ? ' ' : ch;
    }
    return out + "\"";
}

}  // namespace

void write_grid_csv(const GridSearchResult& r, std::ostream& out) {
    out << "kind,learning_rate,dropout_rate,focal_gamma,status,metric,best_epoch,epochs_run,error\n";
    for (const auto& c : r.cells) {
        out << to_string(c.kind) << ',' << format_real(c.config.learning_rate) << ','
            << format_real(c.config.dropout_rate) << ',' << format_real(c.config.focal_gamma) << ','
            << (c.ok ? "ok" : "error") << ',' << (c.ok ? format_real(c.metric) : "") << ','
            << c.best_epoch << ',' << c.epochs_run << ',' << csv_escape(c.error) << '\n';
    }
}

nlohmann::json best_to_json(const GridSearchResult& r) {
    const GridCell& b = r.best_cell();
    return {{"kind", std::string(to_string(b.kind))},
            {"config", to_json(b.config)},
            {"metric_name", std::string(to_string(b.config.selection_metric))},
            {"metric", b.metric},
            {"best_epoch", b.best_epoch},
            {"cells", r.cells.size()}};
}

}  // namespace fuselab
