#pragma once

// Generators and independent oracles shared by the unit tests and the
// acceptance binary.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ompadvisor/corpus.hpp"
#include "ompadvisor/encode.hpp"
#include "ompadvisor/metrics.hpp"
#include "ompadvisor/rng.hpp"
#include "ompadvisor/syntax.hpp"

namespace testsupport {

std::filesystem::path fixture_dir();
nlohmann::json load_json(const std::filesystem::path& file);

// Random translation unit over the supported C subset: functions, nested
// loops with pragmas, if/else, while, declarations and mixed expressions.
std::string random_program(ompadvisor::Rng& rng);

// Straight-line statement list over at most 6 scalar/array variables, with
// the def-use edges a forward scan predicts. Node ids number variable
// occurrences in text order.
struct StraightLine {
    std::string text;
    std::vector<std::string> node_names;
    std::vector<std::pair<int, int>> edges;  // (to, from), sorted
};

StraightLine random_straight_line(ompadvisor::Rng& rng, int max_statements = 10, int max_vars = 6);

// Compares one entry of fixtures/pragmas.json with a parse; empty when equal.
std::string pragma_mismatch(const nlohmann::json& expected, const ompadvisor::OmpPragma& got);

struct ConfusionCase {
    ompadvisor::Confusion confusion;
    double precision;
    double recall;
    double accuracy;
};

// Hand-computed fixtures, zero-denominator cases included.
const std::vector<ConfusionCase>& confusion_cases();

// Every mask property over one encoded sample; empty when all hold.
std::string mask_violation(const ompadvisor::EncodedInput& input);

// Renamed distinct variables, counted by comparing DFG node names before and
// after renaming.
std::size_t renamed_variable_count(const ompadvisor::Sample& before, const ompadvisor::Sample& after,
                                   std::size_t* variable_count);

// floor(tenths / 10 * n) in integer arithmetic.
inline std::size_t floor_tenths(int tenths, std::size_t n) {
    return static_cast<std::size_t>(tenths) * n / 10;
}

}  // namespace testsupport
