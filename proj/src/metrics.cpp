#include "ompadvisor/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/kernels.hpp"

namespace ompadvisor {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

std::string fmt(const char* format, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

void table(std::ostringstream& out, const std::string& title, const Metrics& m) {
    out << title << "\n";
    out << "  label       P      R      Acc      TP     FP     FN     TN\n";
    for (std::size_t o = 0; o < 3; ++o) {
        const auto& c = m.confusion[o];
        const auto& l = m.labels[o];
        char line[128];
        std::snprintf(line, sizeof line, "  %-10s %.3f  %.3f  %.3f  %6zu %6zu %6zu %6zu\n", kLabelNames[o], l.precision,
                      l.recall, l.accuracy, c.tp, c.fp, c.fn, c.tn);
        out << line;
    }
    char line[96];
    std::snprintf(line, sizeof line, "  %-10s %.3f  %.3f  %.3f\n", "macro", m.macro.precision, m.macro.recall,
                  m.macro.accuracy);
    out << line;
}

}  // namespace

void Confusion::add(int truth, int predicted) {
    if (truth && predicted) {
        ++tp;
    } else if (!truth && predicted) {
        ++fp;
    } else if (truth && !predicted) {
        ++fn;
    } else {
        ++tn;
    }
}

LabelMetrics compute_metrics(const Confusion& c) {
    if (c.total() == 0) {
        throw std::invalid_argument("cannot compute metrics over zero samples");
    }
    return LabelMetrics{ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn), ratio(c.tp + c.tn, c.total())};
}

Metrics metrics_from_rows(const std::vector<EvalRow>& rows, bool gated) {
    Metrics m;
    for (const auto& r : rows) {
        const auto& pred = gated ? r.gated : r.raw;
        for (std::size_t o = 0; o < 3; ++o) {
            m.confusion[o].add(r.truth[o], pred[o]);
        }
    }
    for (std::size_t o = 0; o < 3; ++o) {
        m.labels[o] = compute_metrics(m.confusion[o]);
        m.macro.precision += m.labels[o].precision / 3.0;
        m.macro.recall += m.labels[o].recall / 3.0;
        m.macro.accuracy += m.labels[o].accuracy / 3.0;
    }
    return m;
}

EvalRow score_sample(const TrainedModel& model, const Sample& sample) {
    EvalRow row;
    row.id = sample.id;
    row.path = sample.path;
    row.probs = predict_probs(model, sample);
    row.truth = sample.labels();
    row.raw = make_prediction(row.probs, false).labels;
    row.gated = make_prediction(row.probs, true).labels;
    return row;
}

Evaluation evaluate(const TrainedModel& model, const std::vector<Sample>& samples, bool gate) {
    if (samples.empty()) {
        throw DataError("nothing to evaluate: the sample list is empty");
    }
    Evaluation ev;
    ev.gate = gate;
    ev.rows.resize(samples.size());
#pragma omp parallel for schedule(dynamic, 8) num_threads(kernel_threads())
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ev.rows[i] = score_sample(model, samples[i]);
    }
    ev.raw = metrics_from_rows(ev.rows, false);
    ev.gated = metrics_from_rows(ev.rows, true);
    return ev;
}

void add_benchmark_groups(Evaluation& ev) {
    std::map<std::string, std::vector<EvalRow>> groups;
    for (const auto& r : ev.rows) {
        const auto slash = r.path.find('/');
        groups[slash == std::string::npos ? std::string(".") : r.path.substr(0, slash)].push_back(r);
    }
    for (const auto& [name, rows] : groups) {
        ev.benchmarks[name] = {metrics_from_rows(rows, false), metrics_from_rows(rows, true)};
        ev.benchmark_sizes[name] = rows.size();
    }
}

std::string per_sample_csv(const std::vector<EvalRow>& rows) {
    std::string out =
        "id,path,p_pragma,p_private,p_reduction,y_pragma,y_private,y_reduction,"
        "raw_pragma,raw_private,raw_reduction,gated_pragma,gated_private,gated_reduction\n";
    for (const auto& r : rows) {
        out += csv_field(r.id) + "," + csv_field(r.path);
        for (const double p : r.probs) {
            out += "," + fmt("%.6f", p);
        }
        for (const auto* cols : {&r.truth, &r.raw, &r.gated}) {
            for (const int v : *cols) {
                out += "," + std::to_string(v);
            }
        }
        out += "\n";
    }
    return out;
}

std::vector<EvalRow> parse_per_sample_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<EvalRow> rows;
    std::getline(in, line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 14) {
            throw DataError("per_sample.csv line " + std::to_string(lineno) + ": expected 14 fields, got " +
                            std::to_string(f.size()));
        }
        EvalRow r;
        r.id = f[0];
        r.path = f[1];
        try {
            for (std::size_t o = 0; o < 3; ++o) {
                r.probs[o] = std::stod(f[2 + o]);
                r.truth[o] = std::stoi(f[5 + o]);
                r.raw[o] = std::stoi(f[8 + o]);
                r.gated[o] = std::stoi(f[11 + o]);
            }
        } catch (const std::exception&) {
            throw DataError("per_sample.csv line " + std::to_string(lineno) + ": malformed number");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
    nlohmann::ordered_json j;
    for (std::size_t o = 0; o < 3; ++o) {
        const auto& c = m.confusion[o];
        const auto& l = m.labels[o];
        j[kLabelNames[o]] = nlohmann::ordered_json{{"tp", c.tp},
                                                   {"fp", c.fp},
                                                   {"fn", c.fn},
                                                   {"tn", c.tn},
                                                   {"precision", l.precision},
                                                   {"recall", l.recall},
                                                   {"accuracy", l.accuracy}};
    }
    j["macro"] = nlohmann::ordered_json{
        {"precision", m.macro.precision}, {"recall", m.macro.recall}, {"accuracy", m.macro.accuracy}};
    return j;
}

nlohmann::ordered_json report_json(const Evaluation& ev) {
    nlohmann::ordered_json j;
    j["samples"] = ev.rows.size();
    j["threshold"] = 0.5;
    j["headline"] = ev.gate ? "gated" : "raw";
    j["raw"] = metrics_json(ev.raw);
    j["gated"] = metrics_json(ev.gated);
    if (!ev.benchmarks.empty()) {
        nlohmann::ordered_json b;
        for (const auto& [name, pair] : ev.benchmarks) {
            b[name] = nlohmann::ordered_json{{"samples", ev.benchmark_sizes.at(name)},
                                             {"raw", metrics_json(pair.first)},
                                             {"gated", metrics_json(pair.second)}};
        }
        j["benchmarks"] = std::move(b);
    }
    return j;
}

std::string report_text(const Evaluation& ev) {
    std::ostringstream out;
    out << "Evaluated " << ev.rows.size() << " loops, threshold 0.5\n\n";
    const std::string head = ev.gate ? "gated" : "raw";
    table(out, "Predictions (" + head + ")", ev.gate ? ev.gated : ev.raw);
    out << "\n";
    table(out, ev.gate ? "Predictions (raw)" : "Predictions (gated)", ev.gate ? ev.raw : ev.gated);
    for (const auto& [name, pair] : ev.benchmarks) {
        out << "\n";
        table(out, "Benchmark " + name + " (" + std::to_string(ev.benchmark_sizes.at(name)) + " loops, " + head + ")",
              ev.gate ? pair.second : pair.first);
    }
    out << "\nreference (published, 54k-loop corpus, pretrained backbone): pragma P=0.849 R=0.848 Acc=0.872\n";
    return out.str();
}

}  // namespace ompadvisor
