#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace textshift {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

/// Runs one subcommand (ingest, synth, train, evaluate, classify, compare,
/// project). `args` excludes the program name. `in` feeds classify when no
/// --input is given.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace textshift
