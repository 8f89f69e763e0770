#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fuselab/metrics.hpp"

namespace fuselab {

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double val_macro_f1 = 0.0;
    double val_weighted_f1 = 0.0;
    std::array<double, 3> class_f1{};  // negative, neutral, positive
    /// Full report when produced by training; absent when read from CSV.
    std::optional<MetricsReport> val_report;
    /// Filled when training tracks accuracy on its own split.
    std::optional<double> train_accuracy;

    static EpochRecord from_report(int epoch, double train_loss, const MetricsReport& r);
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    bool stopped_early = false;
};

/// Columns: epoch,train_loss,val_accuracy,val_macro_f1,val_weighted_f1,
/// f1_negative,f1_neutral,f1_positive. Reals use shortest round-trip form.
void write_history_csv(const TrainHistory& h, std::ostream& out);
void write_history_csv(const TrainHistory& h, const std::filesystem::path& path);
TrainHistory read_history_csv(const std::filesystem::path& path);
TrainHistory parse_history_csv(std::istream& in);

struct BreakdownRow {
    int epoch = 0;
    std::array<double, 3> f1{};
};

/// Per-epoch per-class F1 table.
std::vector<BreakdownRow> breakdown_series(const TrainHistory& h);

/// Wide form: epoch,f1_negative,f1_neutral,f1_positive
void write_breakdown_csv(const std::vector<BreakdownRow>& rows, std::ostream& out);
/// Long (plot-ready) form: epoch,class,f1
void write_breakdown_long_csv(const std::vector<BreakdownRow>& rows, std::ostream& out);

std::string format_real(double x);

}  // namespace fuselab
