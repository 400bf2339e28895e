#pragma once

// Per-label confusion counts, precision/recall/accuracy, and the evaluation
// reports (per_sample.csv, report.txt, report.json).

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ompadvisor/model.hpp"

namespace ompadvisor {

inline constexpr std::array<const char*, 3> kLabelNames = {"pragma", "private", "reduction"};

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    void add(int truth, int predicted);
    bool operator==(const Confusion&) const = default;
};

struct LabelMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
};

// Zero denominators give 0. Throws std::invalid_argument when total is 0.
LabelMetrics compute_metrics(const Confusion& confusion);

struct Metrics {
    std::array<Confusion, 3> confusion;
    std::array<LabelMetrics, 3> labels;
    LabelMetrics macro;
};

struct EvalRow {
    std::string id;
    std::string path;
    std::array<double, 3> probs{};
    std::array<int, 3> truth{};
    std::array<int, 3> raw{};
    std::array<int, 3> gated{};
};

// Aggregates rows; `gated` selects which prediction columns are scored.
Metrics metrics_from_rows(const std::vector<EvalRow>& rows, bool gated);

struct Evaluation {
    std::vector<EvalRow> rows;
    Metrics raw;
    Metrics gated;
    bool gate = false;  // which of the two is the headline
    // First path component -> (raw, gated), filled by evaluate_benchmarks.
    std::map<std::string, std::pair<Metrics, Metrics>> benchmarks;
    std::map<std::string, std::size_t> benchmark_sizes;
};

EvalRow score_sample(const TrainedModel& model, const Sample& sample);

// Throws DataError on an empty sample list.
Evaluation evaluate(const TrainedModel& model, const std::vector<Sample>& samples, bool gate);

// Adds per-benchmark tables, grouping rows by the first path component.
void add_benchmark_groups(Evaluation& evaluation);

std::string per_sample_csv(const std::vector<EvalRow>& rows);
std::vector<EvalRow> parse_per_sample_csv(const std::string& text);

nlohmann::ordered_json metrics_json(const Metrics& metrics);
nlohmann::ordered_json report_json(const Evaluation& evaluation);
std::string report_text(const Evaluation& evaluation);

}  // namespace ompadvisor
