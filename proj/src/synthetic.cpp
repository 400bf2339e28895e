#include "ompadvisor/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_set>

#include "ompadvisor/corpus.hpp"
#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/rng.hpp"

namespace ompadvisor {

namespace {

const std::vector<std::string> kArrays = {"a", "b", "c", "x", "y", "z", "u", "v", "w", "src", "dst", "buf",
                                          "in", "out", "data", "arr", "vec", "p", "q", "r"};
const std::vector<std::string> kScalars = {"s", "t", "acc", "sum", "tmp", "val", "d", "e", "f", "g", "h", "m"};
// Role-typical names, drawn most of the time as in hand-written code.
const std::vector<std::string> kTempNames = {"t", "tmp", "temp", "val", "x0"};
const std::vector<std::string> kAccNames = {"s", "sum", "acc", "total", "res"};
const std::vector<std::string> kParams = {"alpha", "beta", "scale", "k0", "k1", "coef"};
const std::vector<std::string> kConsts = {"2", "3", "0.5", "1.5", "2.0", "0.25", "4", "0.1", "7", "10"};
const std::vector<std::string> kOps = {"+", "-", "*"};

struct LoopSpec {
    bool dependence = false;
    bool temp = false;
    bool accum = false;
};

class Builder {
public:
    explicit Builder(Rng& rng) : rng_(rng) {}

    std::string function(const std::string& name, const LoopSpec& spec) {
        arrays_ = kArrays;
        rng_.shuffle(arrays_);
        arrays_.resize(5);
        scalars_ = kScalars;
        rng_.shuffle(scalars_);
        param_ = rng_.pick(kParams);
        const std::string& out = arrays_[0];
        const std::string tmp = rng_.chance(0.7) ? rng_.pick(kTempNames) : scalars_[0];
        std::string acc = rng_.chance(0.7) ? rng_.pick(kAccNames) : scalars_[1];
        if (acc == tmp) {
            acc = tmp == scalars_[1] ? scalars_[2] : scalars_[1];
        }

        std::vector<std::string> body;
        std::string value = expr(1 + rng_.below(2));
        if (spec.temp) {
            body.push_back(tmp + " = " + value + ";");
            value = tmp + " " + rng_.pick(kOps) + " " + term();
        }
        const int lo = 1 + static_cast<int>(rng_.below(3));
        int start = 0;
        if (spec.dependence) {
            switch (rng_.below(3)) {
                case 0:
                    start = lo;
                    body.push_back(out + "[i] = " + out + "[i - " + std::to_string(lo) + "] " + rng_.pick(kOps) + " " +
                                   value + ";");
                    break;
                case 1:
                    body.push_back(out + "[i + " + std::to_string(lo) + "] = " + out + "[i] " + rng_.pick(kOps) + " " +
                                   value + ";");
                    break;
                default:
                    body.push_back(out + "[i] = " + value + " " + rng_.pick(kOps) + " " + out + "[i + " +
                                   std::to_string(lo) + "];");
                    break;
            }
        } else if (rng_.chance(0.5)) {
            body.push_back(out + "[i] = " + arrays_[3] + "[i] " + rng_.pick(kOps) + " " + value + ";");
        } else {
            body.push_back(out + "[i] = " + value + ";");
        }
        if (spec.accum) {
            const std::string addend = rng_.chance(0.5) ? out + "[i]" : term();
            switch (rng_.below(3)) {
                case 0: body.push_back(acc + " += " + addend + ";"); break;
                case 1: body.push_back(acc + " = " + acc + " + " + addend + ";"); break;
                default: body.push_back(acc + " += " + addend + " * " + term() + ";"); break;
            }
        }
        if (rng_.chance(0.3)) {
            // A second independent store keeps lengths varied.
            body.insert(body.begin() + static_cast<std::ptrdiff_t>(rng_.below(body.size() + 1)),
                        arrays_[4] + "[i] = " + expr(1) + ";");
        }

        std::string pragma;
        if (!spec.dependence) {
            pragma = "#pragma omp parallel for";
            if (spec.temp) {
                pragma += " private(" + tmp + ")";
            }
            if (spec.accum) {
                pragma += " reduction(+:" + acc + ")";
            }
        }

        std::string text = "void " + name + "(int n, double *" + arrays_[0] + ", double *" + arrays_[1] + ", double *" +
                           arrays_[2] + ", double *" + arrays_[3] + ", double *" + arrays_[4] + ", double " + param_ +
                           ") {\n";
        text += "  int i;\n";
        text += "  double " + tmp + ", " + acc + ";\n";
        text += "  " + acc + " = 0;\n";
        if (!pragma.empty()) {
            text += pragma + "\n";
        }
        const std::string bound = rng_.chance(0.5) ? "n" : "n - " + std::to_string(lo);
        text += "  for (i = " + std::to_string(start) + "; i < " + bound + "; " + (rng_.chance(0.5) ? "i++" : "++i") +
                ") {\n";
        for (const auto& line : body) {
            text += "    " + line + "\n";
        }
        text += "  }\n";
        text += "  " + arrays_[1] + "[0] = " + acc + ";\n";
        text += "}\n";
        return text;
    }

private:
    std::string term() {
        switch (rng_.below(4)) {
            case 0: return arrays_[1] + "[i]";
            case 1: return arrays_[2] + "[i]";
            case 2: return param_;
            default: return rng_.pick(kConsts);
        }
    }

    std::string expr(std::size_t terms) {
        std::string e = term();
        for (std::size_t k = 1; k < terms; ++k) {
            e += " " + rng_.pick(kOps) + " " + term();
        }
        return e;
    }

    Rng& rng_;
    std::vector<std::string> arrays_;
    std::vector<std::string> scalars_;
    std::string param_;
};

}  // namespace

std::vector<SyntheticFile> generate_synthetic(const SyntheticOptions& options) {
    Rng rng(options.seed);
    Builder builder(rng);
    std::unordered_set<std::string> seen;
    std::vector<std::string> functions;
    std::size_t attempts = 0;
    while (functions.size() < options.loops) {
        if (++attempts > options.loops * 50 + 1000) {
            throw DataError("synthetic generator could not find " + std::to_string(options.loops) + " distinct loops");
        }
        LoopSpec spec;
        spec.dependence = rng.chance(0.5);
        spec.temp = rng.chance(0.5);
        spec.accum = rng.chance(0.5);
        char name[32];
        std::snprintf(name, sizeof name, "kernel_%05zu", functions.size());
        std::string text = builder.function(name, spec);
        const Extraction ex = extract_samples(std::string_view(text), "gen.c", false);
        if (ex.samples.size() != 1 || !ex.rejects.empty()) {
            throw std::logic_error("synthetic generator produced an unusable function:\n" + text);
        }
        if (seen.insert(ex.samples[0].id).second) {
            functions.push_back(std::move(text));
        }
    }

    std::vector<SyntheticFile> files;
    const std::size_t per_file = std::max<std::size_t>(1, options.loops_per_file);
    for (std::size_t i = 0; i < functions.size(); i += per_file) {
        char path[32];
        std::snprintf(path, sizeof path, "synth_%04zu.c", i / per_file);
        SyntheticFile f{path, ""};
        for (std::size_t j = i; j < std::min(functions.size(), i + per_file); ++j) {
            f.text += (j > i ? "\n" : "") + functions[j];
        }
        files.push_back(std::move(f));
    }
    return files;
}

void write_synthetic(const std::filesystem::path& dir, const std::vector<SyntheticFile>& files) {
    for (const auto& f : files) {
        write_text_file(dir / f.path, f.text);
    }
}

}  // namespace ompadvisor
