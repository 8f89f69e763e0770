#include "fuselab/metrics.hpp"

#include <string>

#include "fuselab/dataset.hpp"
#include "fuselab/errors.hpp"

namespace fuselab {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t n = 0;
    for (const auto& row : counts)
        for (auto c : row) n += c;
    return n;
}

std::uint64_t ConfusionMatrix::trace() const { return counts[0][0] + counts[1][1] + counts[2][2]; }

std::uint64_t ConfusionMatrix::row_sum(std::size_t i) const {
    return counts[i][0] + counts[i][1] + counts[i][2];
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t j) const {
    return counts[0][j] + counts[1][j] + counts[2][j];
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels) {
    if (preds.size() != labels.size())
        throw InputError("confusion: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
    if (preds.empty()) throw InputError("confusion: no samples");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] > 2 || labels[i] < 0 || labels[i] > 2)
            throw InputError("confusion: class index out of range at sample " + std::to_string(i));
        ++cm.counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
    }
    return cm;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport report(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw InputError("report: confusion matrix is empty");
    MetricsReport r;
    r.confusion = cm;
    r.accuracy = ratio(cm.trace(), total);
    for (std::size_t c = 0; c < 3; ++c) {
        auto& s = r.per_class[c];
        s.support = cm.row_sum(c);
        s.precision = ratio(cm.counts[c][c], cm.col_sum(c));
        s.recall = ratio(cm.counts[c][c], s.support);
        const double denom = s.precision + s.recall;
        s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
        r.macro_f1 += s.f1;
        r.weighted_f1 += s.f1 * static_cast<double>(s.support);
    }
    r.macro_f1 /= 3.0;
    r.weighted_f1 /= static_cast<double>(total);
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& s = r.per_class[c];
        per_class[std::string(to_string(static_cast<Sentiment>(c)))] = {
            {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    }
    nlohmann::json cm = nlohmann::json::array();
    for (const auto& row : r.confusion.counts) cm.push_back(row);
    return {{"accuracy", r.accuracy},
            {"macro_f1", r.macro_f1},
            {"weighted_f1", r.weighted_f1},
            {"per_class", per_class},
            {"confusion", cm}};
}

}  // namespace fuselab
