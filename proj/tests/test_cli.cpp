#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "ompadvisor/cli.hpp"
#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/metrics.hpp"
#include "support.hpp"

using namespace ompadvisor;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "ompadvisor");
    std::ostringstream out;
    std::ostringstream err;
    const int code = execute_command(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ompadvisor_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

const std::string kFixtureSrc = (testsupport::fixture_dir() / "corpus_src").string();
const std::string kBenchSrc = (testsupport::fixture_dir() / "benchmarks").string();

std::vector<std::string> tiny_train_flags() {
    return {"--epochs", "1", "--seed", "3", "--d-model", "16", "--heads", "2", "--layers", "1",
            "--d-ff", "32", "--min-freq", "1", "--aug", "none"};
}

}  // namespace

TEST_CASE("cli: usage errors exit 1, help exits 0") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"frobnicate"}).code == kExitUsage);
    CHECK(run({"stats"}).code == kExitUsage);
    CHECK(run({"build-corpus", kFixtureSrc, "--bogus", "-o", "x"}).code == kExitUsage);
    CHECK(run({"augment", "c.jsonl", "--mode", "sometimes", "--epoch", "1", "--seed", "1", "-o", "x"}).code ==
          kExitUsage);
    CHECK(run({"--help"}).code == kExitOk);
    CHECK(run({"train", "--help"}).code == kExitOk);
}

TEST_CASE("cli: data errors exit 2 and name the path") {
    const Run missing = run({"stats", "/nonexistent/corpus.jsonl"});
    CHECK(missing.code == kExitData);
    CHECK(missing.err.find("/nonexistent/corpus.jsonl") != std::string::npos);
    const Run no_model = run({"predict", "/nonexistent/model", kFixtureSrc + "/k01.c"});
    CHECK(no_model.code == kExitData);
    CHECK(no_model.err.find("/nonexistent/model") != std::string::npos);
}

TEST_CASE("cli: build-corpus is reproducible and stats match the golden table") {
    const fs::path a = scratch("corpus_a");
    const fs::path b = scratch("corpus_b");
    REQUIRE(run({"build-corpus", kFixtureSrc, "--seed", "5", "-o", a.string()}).code == kExitOk);
    REQUIRE(run({"build-corpus", kFixtureSrc, "--seed", "5", "-o", b.string()}).code == kExitOk);
    CHECK(read_text_file(a / "corpus.jsonl") == read_text_file(b / "corpus.jsonl"));
    CHECK(read_text_file(a / "rejects.jsonl") == read_text_file(b / "rejects.jsonl"));
    const auto config = nlohmann::json::parse(read_text_file(a / "run_config.json"));
    CHECK(config.at("subcommand") == "build-corpus");
    CHECK(config.at("seed") == 5);

    const Run stats = run({"stats", (a / "corpus.jsonl").string()});
    CHECK(stats.code == kExitOk);
    CHECK(stats.out == read_text_file(testsupport::fixture_dir() / "corpus_stats.golden.txt"));
}

TEST_CASE("cli: augment writes the renamed corpus and its config") {
    const fs::path c = scratch("aug_corpus");
    REQUIRE(run({"build-corpus", kFixtureSrc, "--seed", "1", "-o", c.string()}).code == kExitOk);
    const fs::path out = scratch("aug_out");
    fs::create_directories(out);
    const std::string file = (out / "epoch3.jsonl").string();
    const Run r = run({"augment", c.string(), "--mode", "curriculum", "--epoch", "3", "--seed", "1", "-o", file});
    REQUIRE(r.code == kExitOk);
    const auto before = read_jsonl(c / "corpus.jsonl");
    const auto after = read_jsonl(file);
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < after.size(); ++i) {
        CHECK(after[i].labels() == before[i].labels());
        if (before[i].split != Split::train) {
            CHECK(after[i].loop_code == before[i].loop_code);
        }
    }
    CHECK(fs::exists(file + ".run_config.json"));
    const Run again = run({"augment", c.string(), "--mode", "curriculum", "--epoch", "3", "--seed", "1", "-o",
                           (out / "again.jsonl").string()});
    REQUIRE(again.code == kExitOk);
    CHECK(read_text_file(file) == read_text_file(out / "again.jsonl"));
}

TEST_CASE("cli: train, predict and evaluate") {
    const fs::path c = scratch("pipeline_corpus");
    REQUIRE(run({"build-corpus", kFixtureSrc, "--seed", "2", "--benchmarks", kBenchSrc, "-o", c.string()}).code ==
            kExitOk);
    const fs::path m = scratch("pipeline_model");
    std::vector<std::string> train_args = {"train", c.string(), "-o", m.string()};
    const auto flags = tiny_train_flags();
    train_args.insert(train_args.end(), flags.begin(), flags.end());
    const Run t = run(train_args);
    REQUIRE(t.code == kExitOk);
    for (const char* f : {"model.bin", "vocab.json", "encoder.json", "history.json", "run_config.json"}) {
        CHECK(fs::exists(m / f));
    }
    const fs::path m2 = scratch("pipeline_model2");
    train_args[3] = m2.string();
    REQUIRE(run(train_args).code == kExitOk);
    CHECK(read_text_file(m / "model.bin") == read_text_file(m2 / "model.bin"));
    CHECK(read_text_file(m / "history.json") == read_text_file(m2 / "history.json"));

    const Run p = run({"predict", m.string(), kFixtureSrc + "/k07.c", "--gate", "--json"});
    REQUIRE(p.code == kExitOk);
    const auto arr = nlohmann::json::parse(p.out);
    REQUIRE(arr.is_array());
    CHECK(arr.size() == 2);
    for (const auto& o : arr) {
        CHECK(o.at("probs").at("pragma").get<double>() >= 0.0);
        if (o.at("labels").at("pragma") == 0) {
            CHECK(o.at("labels").at("private") == 0);
            CHECK(o.at("labels").at("reduction") == 0);
        }
    }
    const Run broken = run({"predict", m.string(), kFixtureSrc + "/k16.c"});
    CHECK(broken.code == kExitData);
    CHECK(broken.err.find("k16.c:6:") != std::string::npos);

    const fs::path e = scratch("pipeline_eval");
    REQUIRE(run({"evaluate", m.string(), c.string(), "-o", e.string()}).code == kExitOk);
    const auto report = nlohmann::json::parse(read_text_file(e / "report.json"));
    const auto rows = parse_per_sample_csv(read_text_file(e / "per_sample.csv"));
    CHECK(report.at("samples").get<std::size_t>() == rows.size());
    CHECK(nlohmann::json::parse(metrics_json(metrics_from_rows(rows, false)).dump()) == report.at("raw"));
    CHECK(nlohmann::json::parse(metrics_json(metrics_from_rows(rows, true)).dump()) == report.at("gated"));

    const fs::path be = scratch("pipeline_bench_eval");
    REQUIRE(run({"evaluate", m.string(), (c / "benchmark.jsonl").string(), "--gate", "-o", be.string()}).code ==
            kExitOk);
    const auto bench = nlohmann::json::parse(read_text_file(be / "report.json"));
    CHECK(bench.at("headline") == "gated");
    for (const char* name : {"NAS", "PolyBench", "SPEC"}) {
        CHECK(bench.at("benchmarks").contains(name));
    }
    CHECK(read_text_file(be / "report.txt").find("Benchmark PolyBench") != std::string::npos);
}

TEST_CASE("cli: check-gradients passes on the small config") {
    const Run r = run({"check-gradients", "--config", "small"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("PASS") != std::string::npos);
}
