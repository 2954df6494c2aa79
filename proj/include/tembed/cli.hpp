#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tembed::cli {

/// Exit status for malformed command lines and invalid configuration.
inline constexpr int kUsageError = 2;
/// Exit status for failures while running a well-formed command.
inline constexpr int kRuntimeError = 1;

/// Runs one subcommand (split, synth, train, embed, evaluate,
/// evaluate-unseen, export-projector). args excludes the program name.
/// Diagnostics and progress go to err; help and stdout reports go to out.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

} // namespace tembed::cli
