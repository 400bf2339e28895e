#pragma once

// Variable-renaming augmentation and the per-epoch curriculum.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ompadvisor/corpus.hpp"

namespace ompadvisor {

enum class AugMode { none, curriculum, replaced };

const char* to_string(AugMode mode);
AugMode aug_mode_from_string(std::string_view text);

// 0 in the first epoch, then +0.1 per epoch, capped at 0.4 from epoch 5 on.
double curriculum_ratio(int epoch);

// Fraction of variables to rename in a given 1-based epoch.
double augmentation_fraction(AugMode mode, int epoch);

// floor(fraction * n), tolerant of the representation error in 0.1 steps.
std::size_t rename_count(double fraction, std::size_t n);

// Distinct variable names over loop_code and context_code, sorted.
std::vector<std::string> sample_variables(const Sample& sample);

// Renames identifiers inside the parenthesized clause arguments of a pragma.
std::string rename_in_pragma(std::string_view pragma, const std::map<std::string, std::string>& renames);

struct RenameOutcome {
    Sample sample;
    std::map<std::string, std::string> renames;  // old -> new
    std::size_t variable_count = 0;              // |V|
};

// Renames floor(fraction * |V|) variables, picked by a seeded shuffle of the
// sorted names, to distinct var<k> with k in [0, 9999]. Labels are kept and
// the DFG is rebuilt.
RenameOutcome rename_variables_detailed(const Sample& sample, double fraction, std::uint64_t seed);

Sample rename_variables(const Sample& sample, double fraction, std::uint64_t seed);

}  // namespace ompadvisor
