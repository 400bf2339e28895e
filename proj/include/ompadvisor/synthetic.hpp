#pragma once

// Generator for a labeled synthetic C corpus with learnable rules:
//   pragma    iff the loop carries no array dependence across iterations
//   private   iff pragma and the body uses a scalar temporary
//   reduction iff pragma and the body accumulates into a scalar
// Loops that carry a dependence get no pragma, so their clause labels are 0
// even when they contain a temporary or an accumulation.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ompadvisor {

struct SyntheticOptions {
    std::size_t loops = 2000;          // distinct loops (by normalized id)
    std::size_t loops_per_file = 10;
    std::uint64_t seed = 1;
};

struct SyntheticFile {
    std::string path;  // relative, e.g. "synth_0003.c"
    std::string text;
};

std::vector<SyntheticFile> generate_synthetic(const SyntheticOptions& options);

void write_synthetic(const std::filesystem::path& dir, const std::vector<SyntheticFile>& files);

}  // namespace ompadvisor
