#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ompadvisor {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Runs one subcommand. args[0] is the program name.
int execute_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ompadvisor
