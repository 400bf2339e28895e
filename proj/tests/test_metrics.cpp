#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/metrics.hpp"
#include "support.hpp"

using namespace ompadvisor;

namespace {

std::vector<EvalRow> random_rows(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<EvalRow> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        EvalRow& r = rows[i];
        r.id = "id" + std::to_string(i);
        r.path = (i % 3 == 0 ? "NAS/" : (i % 3 == 1 ? "SPEC/" : "")) + std::string("f,") + std::to_string(i) + ".c";
        for (std::size_t o = 0; o < 3; ++o) {
            r.probs[o] = std::round(rng.uniform() * 1e6) / 1e6;
        }
        r.truth = {static_cast<int>(rng.below(2)), 0, 0};
        if (r.truth[0]) {
            r.truth[1] = static_cast<int>(rng.below(2));
            r.truth[2] = static_cast<int>(rng.below(2));
        }
        r.raw = make_prediction(r.probs, false).labels;
        r.gated = make_prediction(r.probs, true).labels;
    }
    return rows;
}

}  // namespace

TEST_CASE("compute_metrics on hand-computed fixtures") {
    for (const auto& c : testsupport::confusion_cases()) {
        const LabelMetrics m = compute_metrics(c.confusion);
        CAPTURE(c.confusion.tp);
        CAPTURE(c.confusion.fp);
        CAPTURE(c.confusion.fn);
        CAPTURE(c.confusion.tn);
        CHECK(m.precision == doctest::Approx(c.precision).epsilon(1e-15));
        CHECK(m.recall == doctest::Approx(c.recall).epsilon(1e-15));
        CHECK(m.accuracy == doctest::Approx(c.accuracy).epsilon(1e-15));
    }
    CHECK_THROWS_AS(compute_metrics(Confusion{}), std::invalid_argument);
}

TEST_CASE("compute_metrics is scale-free") {
    for (const auto& c : testsupport::confusion_cases()) {
        const Confusion big{c.confusion.tp * 7, c.confusion.fp * 7, c.confusion.fn * 7, c.confusion.tn * 7};
        const LabelMetrics a = compute_metrics(c.confusion);
        const LabelMetrics b = compute_metrics(big);
        CHECK(a.precision == doctest::Approx(b.precision));
        CHECK(a.recall == doctest::Approx(b.recall));
        CHECK(a.accuracy == doctest::Approx(b.accuracy));
    }
}

TEST_CASE("confusion counting") {
    Confusion c;
    c.add(1, 1);
    c.add(0, 1);
    c.add(1, 0);
    c.add(0, 0);
    c.add(0, 0);
    CHECK(c == Confusion{1, 1, 1, 2});
    CHECK(c.total() == 5);
}

TEST_CASE("gating never adds clause false positives") {
    const auto rows = random_rows(6, 300);
    const Metrics raw = metrics_from_rows(rows, false);
    const Metrics gated = metrics_from_rows(rows, true);
    CHECK(gated.confusion[0] == raw.confusion[0]);
    for (std::size_t o = 1; o < 3; ++o) {
        CHECK(gated.confusion[o].fp <= raw.confusion[o].fp);
        CHECK(gated.confusion[o].total() == rows.size());
    }
}

TEST_CASE("per_sample.csv round trip reproduces the report") {
    Evaluation ev;
    ev.rows = random_rows(8, 120);
    ev.raw = metrics_from_rows(ev.rows, false);
    ev.gated = metrics_from_rows(ev.rows, true);
    add_benchmark_groups(ev);
    const std::string csv = per_sample_csv(ev.rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 121);
    const auto parsed = parse_per_sample_csv(csv);
    REQUIRE(parsed.size() == ev.rows.size());
    CHECK(parsed[0].path == ev.rows[0].path);
    CHECK(metrics_json(metrics_from_rows(parsed, false)).dump() == metrics_json(ev.raw).dump());
    CHECK(metrics_json(metrics_from_rows(parsed, true)).dump() == metrics_json(ev.gated).dump());

    const auto report = report_json(ev);
    CHECK(report.at("samples") == 120);
    CHECK(report.at("benchmarks").contains("NAS"));
    CHECK(report.at("benchmarks").contains("SPEC"));
    CHECK(report.at("benchmarks").contains("."));
    const std::string text = report_text(ev);
    CHECK(text.find("Benchmark NAS") != std::string::npos);
    CHECK(text.find("P=0.849 R=0.848 Acc=0.872") != std::string::npos);

    CHECK_THROWS_AS(parse_per_sample_csv("header\na,b,c\n"), DataError);
}
