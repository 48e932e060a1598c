// cli.hpp — entry point for the fca command-line tool. Subcommands:
//   gen-scenes      synthesize scenes + manifest
//   train-detector  train the toy detector to the P@0.5 gate
//   attack          optimize the camouflage texture
//   eval            metrics and protocol reports
//   render-debug    render one pose and dump the intermediate artifacts
// Every flag can come from a config file (--config) or an FCA_* environment
// variable; command-line values win. Each command echoes its fully resolved
// configuration into its output directory.
#pragma once

#include <string>
#include <vector>

namespace fca {

// Returns a process exit code (0 = success); never throws.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace fca
