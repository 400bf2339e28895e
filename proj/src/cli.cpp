#include "ompadvisor/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "CLI11.hpp"
#include "ompadvisor/augment.hpp"
#include "ompadvisor/corpus.hpp"
#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/kernels.hpp"
#include "ompadvisor/metrics.hpp"
#include "ompadvisor/model.hpp"
#include "ompadvisor/rng.hpp"
#include "ompadvisor/synthetic.hpp"

namespace ompadvisor {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A corpus argument may name corpus.jsonl itself or the directory holding it.
fs::path corpus_file(const fs::path& arg) {
    if (fs::is_directory(arg)) {
        return arg / "corpus.jsonl";
    }
    return arg;
}

void write_run_config(const fs::path& file, nlohmann::ordered_json config) {
    config["threads"] = kernel_threads();
    write_text_file(file, config.dump(2) + "\n");
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

struct Options {
    // build-corpus
    std::string src_dir;
    bool with_scope = false;
    std::string benchmarks;
    // augment
    std::string corpus;
    std::string mode = "curriculum";
    int epoch = 1;
    bool all_splits = false;
    // train
    std::string aug = "curriculum";
    int epochs = 10;
    bool scale_d = false;
    bool scale_sqrt_d = false;
    int batch = 32;
    double lr = 1e-3;
    int max_code = 256;
    int max_dfg = 32;
    int min_freq = 2;
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int d_ff = 256;
    float dropout = 0.1f;
    // predict / evaluate
    std::string model_dir;
    std::string input;
    bool gate = false;
    bool json = false;
    std::string split = "auto";
    // check-gradients
    std::string gc_config = "small";
    std::size_t per_group = 20;
    // gen-synthetic
    std::size_t loops = 2000;
    std::size_t per_file = 10;
    // shared
    std::uint64_t seed = 1;
    std::string output;
};

int run_build_corpus(const Options& o, std::ostream& out) {
    CorpusOptions co;
    co.with_scope = o.with_scope;
    co.seed = o.seed;
    if (!o.benchmarks.empty()) {
        co.benchmarks_dir = o.benchmarks;
    }
    if (!fs::is_directory(o.src_dir)) {
        throw DataError(o.src_dir + ": not a directory");
    }
    const CorpusBuild build = build_corpus(o.src_dir, co);
    write_corpus(build, o.output);
    write_run_config(fs::path(o.output) / "run_config.json",
                     {{"subcommand", "build-corpus"},
                      {"src_dir", o.src_dir},
                      {"benchmarks", o.benchmarks.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(o.benchmarks)},
                      {"output", o.output},
                      {"seed", o.seed},
                      {"with_scope", o.with_scope}});
    out << "samples: " << build.samples.size() << ", rejects: " << build.rejects.size()
        << ", duplicates removed: " << build.duplicates_removed;
    if (co.benchmarks_dir) {
        out << ", benchmark loops: " << build.benchmark.size();
    }
    out << "\n";
    return kExitOk;
}

int run_augment(const Options& o, std::ostream& out) {
    const AugMode mode = aug_mode_from_string(o.mode);
    if (o.epoch < 1) {
        throw UsageError("--epoch must be >= 1");
    }
    std::vector<Sample> samples = read_jsonl(corpus_file(o.corpus));
    const double fraction = augmentation_fraction(mode, o.epoch);
    const std::uint64_t epoch_seed = mix_seed(o.seed, static_cast<std::uint64_t>(o.epoch));
    std::size_t index = 0;
    std::size_t changed = 0;
    for (auto& s : samples) {
        if (!o.all_splits && s.split != Split::train) {
            continue;
        }
        if (fraction > 0.0) {
            s = rename_variables(s, fraction, mix_seed(epoch_seed, index));
            ++changed;
        }
        ++index;
    }
    write_jsonl(o.output, samples);
    fs::path cfg = o.output;
    cfg += ".run_config.json";
    write_run_config(cfg, {{"subcommand", "augment"},
                           {"corpus", o.corpus},
                           {"output", o.output},
                           {"mode", o.mode},
                           {"epoch", o.epoch},
                           {"fraction", fraction},
                           {"seed", o.seed},
                           {"all_splits", o.all_splits}});
    out << "augmented " << changed << " of " << samples.size() << " samples (fraction " << fraction << ")\n";
    return kExitOk;
}

int run_train(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.scale_d && o.scale_sqrt_d) {
        throw UsageError("--scale-d and --scale-sqrt-d are mutually exclusive");
    }
    const std::vector<Sample> corpus = read_jsonl(corpus_file(o.corpus));
    const bool with_scope =
        std::any_of(corpus.begin(), corpus.end(), [](const Sample& s) { return !s.context_code.empty(); });
    ModelConfig config;
    config.d_model = o.d_model;
    config.n_heads = o.n_heads;
    config.n_layers = o.n_layers;
    config.d_ff = o.d_ff;
    config.dropout_rate = o.dropout;
    config.scale_by_d = o.scale_d;
    TrainOptions to;
    to.epochs = o.epochs;
    to.aug = aug_mode_from_string(o.aug);
    to.seed = o.seed;
    to.batch_size = o.batch;
    to.adam.lr = o.lr;
    to.encode.max_code = o.max_code;
    to.encode.max_dfg = o.max_dfg;
    to.min_freq = o.min_freq;
    if (o.max_code < 8 || o.max_dfg < 0) {
        throw UsageError("--max-code must be >= 8 and --max-dfg >= 0");
    }
    to.on_epoch = [&err](const EpochRecord& r) {
        err << "epoch " << r.epoch << ": aug " << fmt3(r.aug_fraction) << ", train loss " << fmt3(r.train_loss)
            << ", valid loss " << fmt3(r.valid_loss) << ", valid acc " << fmt3(r.valid_label_accuracy[0]) << "/"
            << fmt3(r.valid_label_accuracy[1]) << "/" << fmt3(r.valid_label_accuracy[2]) << " (" << fmt3(r.seconds)
            << "s)\n";
    };
    const TrainResult result = train(corpus, config, to);
    const fs::path dir = o.output;
    save_model(dir, result.model, with_scope);
    nlohmann::ordered_json history = nlohmann::ordered_json::array();
    for (const auto& r : result.history) {
        history.push_back(to_json(r));
    }
    write_text_file(dir / "history.json", history.dump(2) + "\n");
    write_text_file(dir / "encode_stats.json", to_json(result.encode_stats).dump(2) + "\n");
    write_run_config(dir / "run_config.json", {{"subcommand", "train"},
                                               {"corpus", o.corpus},
                                               {"output", o.output},
                                               {"aug", o.aug},
                                               {"epochs", o.epochs},
                                               {"seed", o.seed},
                                               {"batch", o.batch},
                                               {"lr", o.lr},
                                               {"min_freq", o.min_freq},
                                               {"max_code", o.max_code},
                                               {"max_dfg", o.max_dfg},
                                               {"with_scope", with_scope},
                                               {"model", to_json(result.model.config)}});
    const auto& last = result.history.back();
    out << "trained " << result.history.size() << " epochs; final valid accuracy " << fmt3(last.valid_label_accuracy[0])
        << "/" << fmt3(last.valid_label_accuracy[1]) << "/" << fmt3(last.valid_label_accuracy[2])
        << " (pragma/private/reduction)\n";
    return kExitOk;
}

nlohmann::ordered_json label_object(const std::array<double, 3>& v) {
    return {{"pragma", v[0]}, {"private", v[1]}, {"reduction", v[2]}};
}

nlohmann::ordered_json label_object(const std::array<int, 3>& v) {
    return {{"pragma", v[0]}, {"private", v[1]}, {"reduction", v[2]}};
}

int run_predict(const Options& o, std::ostream& out) {
    bool with_scope = false;
    const TrainedModel model = load_model(o.model_dir, &with_scope);
    const std::string source = read_text_file(o.input);
    const auto preds = predict_source(model, source, o.input, o.gate, with_scope);
    if (o.json) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& p : preds) {
            arr.push_back({{"file", o.input},
                           {"line", p.line},
                           {"loop", p.loop_code},
                           {"probs", label_object(p.prediction.probs)},
                           {"labels", label_object(p.prediction.labels)},
                           {"gated", p.prediction.gated}});
        }
        out << arr.dump(2) << "\n";
        return kExitOk;
    }
    if (preds.empty()) {
        out << o.input << ": no loops found\n";
    }
    for (const auto& p : preds) {
        const auto& pr = p.prediction;
        out << o.input << ":" << p.line << ": ";
        if (pr.labels[0]) {
            out << "#pragma omp parallel for";
            if (pr.labels[1]) {
                out << " private(...)";
            }
            if (pr.labels[2]) {
                out << " reduction(...)";
            }
        } else {
            out << "no pragma";
        }
        out << "  [p=" << fmt3(pr.probs[0]) << "/" << fmt3(pr.probs[1]) << "/" << fmt3(pr.probs[2])
            << (pr.gated ? ", gated" : "") << "]\n";
    }
    return kExitOk;
}

int run_evaluate(const Options& o, std::ostream& out) {
    const TrainedModel model = load_model(o.model_dir);
    const std::vector<Sample> all = read_jsonl(corpus_file(o.input));
    std::string split = o.split;
    if (split == "auto") {
        const bool any_split =
            std::any_of(all.begin(), all.end(), [](const Sample& s) { return s.split != Split::none; });
        split = any_split ? "test" : "all";
    }
    std::vector<Sample> chosen;
    if (split == "all") {
        chosen = all;
    } else {
        const Split want = split_from_string(split);
        std::copy_if(all.begin(), all.end(), std::back_inserter(chosen),
                     [want](const Sample& s) { return s.split == want; });
    }
    Evaluation ev = evaluate(model, chosen, o.gate);
    const bool benchmark_mode = split == "all";
    if (benchmark_mode) {
        add_benchmark_groups(ev);
    }
    const fs::path dir = o.output;
    write_text_file(dir / "per_sample.csv", per_sample_csv(ev.rows));
    write_text_file(dir / "report.json", report_json(ev).dump(2) + "\n");
    const std::string text = report_text(ev);
    write_text_file(dir / "report.txt", text);
    write_run_config(dir / "run_config.json", {{"subcommand", "evaluate"},
                                               {"model_dir", o.model_dir},
                                               {"input", o.input},
                                               {"output", o.output},
                                               {"split", split},
                                               {"gate", o.gate},
                                               {"benchmark_mode", benchmark_mode}});
    out << text;
    return kExitOk;
}

int run_stats(const Options& o, std::ostream& out) {
    const std::vector<Sample> samples = read_jsonl(corpus_file(o.corpus));
    out << format_stats(compute_stats(samples));
    return kExitOk;
}

int run_check_gradients(const Options& o, std::ostream& out) {
    ModelConfig config;
    if (o.gc_config == "small") {
        config.d_model = 8;
        config.n_heads = 2;
        config.n_layers = 1;
        config.d_ff = 16;
        config.max_len = 24;
        config.vocab_size = 20;
    } else if (o.gc_config == "default") {
        config.max_len = 24;
        config.vocab_size = 40;
    } else {
        throw UsageError("--config must be small or default");
    }
    config.dropout_rate = 0.0f;
    config.seed = o.seed;
    const ModelParams<double> params = init_params<double>(config, grad_check_weight_std(config));
    double worst = 0.0;
    for (const bool all_open : {true, false}) {
        for (const bool by_d : {false, true}) {
            config.scale_by_d = by_d;
            const EncodedInput in = random_input(config, mix_seed(o.seed, all_open ? 1 : 2), all_open);
            const GradCheckReport r = check_gradients(params, config, in, mix_seed(o.seed, 3), o.per_group);
            out << (all_open ? "all-open mask" : "random mask") << ", scale " << (by_d ? "1/d" : "1/sqrt(d)")
                << ": max relative error " << r.max_relative_error << "\n";
            for (const auto& g : r.groups) {
                out << "  " << g.name << " " << g.max_relative_error << " (" << g.coordinates << " coords)\n";
            }
            worst = std::max(worst, r.max_relative_error);
        }
    }
    const bool pass = worst < 1e-3;
    out << (pass ? "PASS" : "FAIL") << " max relative error " << worst << " (limit 1e-3)\n";
    return pass ? kExitOk : kExitData;
}

int run_gen_synthetic(const Options& o, std::ostream& out) {
    SyntheticOptions so;
    so.loops = o.loops;
    so.loops_per_file = o.per_file;
    so.seed = o.seed;
    const auto files = generate_synthetic(so);
    write_synthetic(o.output, files);
    write_run_config(fs::path(o.output) / "run_config.json", {{"subcommand", "gen-synthetic"},
                                                              {"output", o.output},
                                                              {"loops", o.loops},
                                                              {"per_file", o.per_file},
                                                              {"seed", o.seed}});
    out << "wrote " << o.loops << " loops in " << files.size() << " files\n";
    return kExitOk;
}

}  // namespace

int execute_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Predicts OpenMP parallel-for pragmas and private/reduction clauses for C loops", "ompadvisor"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::string> aug_modes = {"none", "curriculum", "replaced"};

    auto* build = app.add_subcommand("build-corpus", "Extract, label, dedup and split loops from a source tree");
    build->add_option("src_dir", o.src_dir, "Source directory")->required();
    build->add_flag("--with-scope", o.with_scope, "Include the loop's surrounding declarations and assignments");
    build->add_option("--benchmarks", o.benchmarks, "Benchmark source directory, held out of training");
    build->add_option("--seed", o.seed, "Split seed");
    build->add_option("-o,--output", o.output, "Output directory")->required();

    auto* augment = app.add_subcommand("augment", "Rename variables in a corpus for a given epoch");
    augment->add_option("corpus", o.corpus, "corpus.jsonl or its directory")->required();
    augment->add_option("--mode", o.mode, "Augmentation mode")->check(CLI::IsMember(aug_modes));
    augment->add_option("--epoch", o.epoch, "1-based epoch");
    augment->add_option("--seed", o.seed, "Seed");
    augment->add_flag("--all-splits", o.all_splits, "Augment every split, not only train");
    augment->add_option("-o,--output", o.output, "Output JSONL file")->required();

    auto* trn = app.add_subcommand("train", "Train the encoder on a corpus");
    trn->add_option("corpus", o.corpus, "Corpus directory or corpus.jsonl")->required();
    trn->add_option("--aug", o.aug, "Augmentation mode")->check(CLI::IsMember(aug_modes));
    trn->add_option("--epochs", o.epochs, "Epochs")->check(CLI::PositiveNumber);
    trn->add_option("--seed", o.seed, "Seed");
    trn->add_flag("--scale-d", o.scale_d, "Scale attention scores by 1/d_head");
    trn->add_flag("--scale-sqrt-d", o.scale_sqrt_d, "Scale attention scores by 1/sqrt(d_head) (default)");
    trn->add_option("--batch", o.batch, "Minibatch size")->check(CLI::PositiveNumber);
    trn->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    trn->add_option("--max-code", o.max_code, "Code tokens kept per sample");
    trn->add_option("--max-dfg", o.max_dfg, "DFG nodes kept per sample");
    trn->add_option("--min-freq", o.min_freq, "Vocabulary frequency threshold")->check(CLI::PositiveNumber);
    trn->add_option("--d-model", o.d_model, "Hidden size")->check(CLI::PositiveNumber);
    trn->add_option("--heads", o.n_heads, "Attention heads")->check(CLI::PositiveNumber);
    trn->add_option("--layers", o.n_layers, "Encoder layers")->check(CLI::PositiveNumber);
    trn->add_option("--d-ff", o.d_ff, "Feed-forward size")->check(CLI::PositiveNumber);
    trn->add_option("--dropout", o.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.99));
    trn->add_option("-o,--output", o.output, "Model directory")->required();

    auto* predict = app.add_subcommand("predict", "Predict pragma and clauses for every loop of a C file");
    predict->add_option("model_dir", o.model_dir, "Model directory")->required();
    predict->add_option("file", o.input, "C source file")->required();
    predict->add_flag("--gate", o.gate, "Zero clause labels when no pragma is predicted");
    predict->add_flag("--json", o.json, "Emit a JSON array");

    auto* eval = app.add_subcommand("evaluate", "Score a model on a corpus split or a benchmark set");
    eval->add_option("model_dir", o.model_dir, "Model directory")->required();
    eval->add_option("input", o.input, "Corpus directory, corpus.jsonl or benchmark.jsonl")->required();
    eval->add_flag("--gate", o.gate, "Report gated predictions as the headline");
    eval->add_option("--split", o.split, "auto (test split, or everything when unsplit), train, valid, test, all")
        ->check(CLI::IsMember({"auto", "train", "valid", "test", "all"}));
    eval->add_option("-o,--output", o.output, "Report directory")->required();

    auto* stats = app.add_subcommand("stats", "Print corpus statistics tables");
    stats->add_option("corpus", o.corpus, "Corpus directory or corpus.jsonl")->required();

    auto* gc = app.add_subcommand("check-gradients", "Compare analytic and finite-difference gradients");
    gc->add_option("--config", o.gc_config, "small or default")->check(CLI::IsMember({"small", "default"}));
    gc->add_option("--seed", o.seed, "Seed");
    gc->add_option("--per-group", o.per_group, "Coordinates sampled per tensor")->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("gen-synthetic", "Write the labeled synthetic C corpus");
    gen->add_option("--loops", o.loops, "Distinct loops")->check(CLI::PositiveNumber);
    gen->add_option("--per-file", o.per_file, "Loops per file")->check(CLI::PositiveNumber);
    gen->add_option("--seed", o.seed, "Seed");
    gen->add_option("-o,--output", o.output, "Output directory")->required();

    std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(reversed.begin(), reversed.end());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto selected = app.get_subcommands();
        err << (selected.empty() ? app.help() : selected.front()->help());
        return kExitUsage;
    }

    try {
        if (build->parsed()) return run_build_corpus(o, out);
        if (augment->parsed()) return run_augment(o, out);
        if (trn->parsed()) return run_train(o, out, err);
        if (predict->parsed()) return run_predict(o, out);
        if (eval->parsed()) return run_evaluate(o, out);
        if (stats->parsed()) return run_stats(o, out);
        if (gc->parsed()) return run_check_gradients(o, out);
        if (gen->parsed()) return run_gen_synthetic(o, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace ompadvisor
