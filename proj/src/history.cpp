#include "fuselab/history.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fuselab/dataset.hpp"
#include "fuselab/errors.hpp"

namespace fuselab {

namespace {

constexpr const char* kHistoryHeader =
    "epoch,train_loss,val_accuracy,val_macro_f1,val_weighted_f1,f1_negative,f1_neutral,f1_positive";

double parse_real(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError("history line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

}  // namespace

std::string format_real(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

EpochRecord EpochRecord::from_report(int epoch, double train_loss, const MetricsReport& r) {
    EpochRecord e;
    e.epoch = epoch;
    e.train_loss = train_loss;
    e.val_accuracy = r.accuracy;
    e.val_macro_f1 = r.macro_f1;
    e.val_weighted_f1 = r.weighted_f1;
    e.class_f1 = r.class_f1();
    e.val_report = r;
    return e;
}

void write_history_csv(const TrainHistory& h, std::ostream& out) {
    out << kHistoryHeader << '\n';
    for (const auto& e : h.epochs) {
        out << e.epoch << ',' << format_real(e.train_loss) << ',' << format_real(e.val_accuracy)
            << ',' << format_real(e.val_macro_f1) << ',' << format_real(e.val_weighted_f1);
        for (double f : e.class_f1) out << ',' << format_real(f);
        out << '\n';
    }
}

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    write_history_csv(h, out);
}

TrainHistory parse_history_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("history CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHistoryHeader) throw FormatError("history CSV has an unexpected header");
    TrainHistory h;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8)
            throw FormatError("history line " + std::to_string(lineno) + " has " +
                              std::to_string(cells.size()) + " columns, expected 8");
        EpochRecord e;
        const double epoch = parse_real(cells[0], lineno);
        e.epoch = static_cast<int>(epoch);
        if (static_cast<double>(e.epoch) != epoch || e.epoch < 1)
            throw FormatError("history line " + std::to_string(lineno) + ": bad epoch index");
        if (!h.epochs.empty() && e.epoch <= h.epochs.back().epoch)
            throw FormatError("history epochs are not increasing at line " + std::to_string(lineno));
        e.train_loss = parse_real(cells[1], lineno);
        e.val_accuracy = parse_real(cells[2], lineno);
        e.val_macro_f1 = parse_real(cells[3], lineno);
        e.val_weighted_f1 = parse_real(cells[4], lineno);
        for (std::size_t c = 0; c < 3; ++c) e.class_f1[c] = parse_real(cells[5 + c], lineno);
        h.epochs.push_back(std::move(e));
    }
    return h;
}

TrainHistory read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
    return parse_history_csv(in);
}

std::vector<BreakdownRow> breakdown_series(const TrainHistory& h) {
    if (h.epochs.empty()) throw InputError("breakdown_series: history is empty");
    std::vector<BreakdownRow> rows;
    rows.reserve(h.epochs.size());
    for (const auto& e : h.epochs) rows.push_back({e.epoch, e.class_f1});
    return rows;
}

void write_breakdown_csv(const std::vector<BreakdownRow>& rows, std::ostream& out) {
    out << "epoch,f1_negative,f1_neutral,f1_positive\n";
    for (const auto& r : rows)
        out << r.epoch << ',' << format_real(r.f1[0]) << ',' << format_real(r.f1[1]) << ','
            << format_real(r.f1[2]) << '\n';
}

void write_breakdown_long_csv(const std::vector<BreakdownRow>& rows, std::ostream& out) {
    out << "epoch,class,f1\n";
    for (const auto& r : rows)
        for (std::size_t c = 0; c < 3; ++c)
            out << r.epoch << ',' << to_string(static_cast<Sentiment>(c)) << ','
                << format_real(r.f1[c]) << '\n';
}

}  // namespace fuselab
