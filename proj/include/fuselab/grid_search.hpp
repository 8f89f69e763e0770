#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuselab/dataset.hpp"
#include "fuselab/fusion_model.hpp"
#include "fuselab/train_config.hpp"

namespace fuselab {

struct GridSpec {
    std::vector<double> learning_rates;
    std::vector<double> dropout_rates;
    std::vector<double> gammas;
    std::vector<FusionKind> kinds;

    std::size_t cell_count() const {
        return learning_rates.size() * dropout_rates.size() * gammas.size() * kinds.size();
    }
};

/// Learning rates {1e-2, 1e-3, 1e-4, 1e-5} × dropout {0, 0.2, 0.5} ×
/// γ {2, 3, 4} × all three kinds.
GridSpec default_grid();

struct GridCell {
    FusionKind kind = FusionKind::Basic;
    TrainConfig config;
    bool ok = false;
    std::string error;
    double metric = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
};

struct GridSearchResult {
    std::vector<GridCell> cells;  // kind-major, then lr, dropout, gamma
    std::optional<std::size_t> best;

    const GridCell& best_cell() const;
};

/// Trains every cell from `base` with the grid's lr/dropout/γ substituted.
/// Cells run in parallel; a failing cell is recorded and the search goes on.
GridSearchResult grid_search(const Dataset& train_set, const Dataset& val_set,
                             const GridSpec& grid, const TrainConfig& base,
                             const ModelDims& dims = {});

/// kind,learning_rate,dropout_rate,focal_gamma,status,metric,best_epoch,epochs_run,error
void write_grid_csv(const GridSearchResult& r, std::ostream& out);

nlohmann::json best_to_json(const GridSearchResult& r);

}  // namespace fuselab
