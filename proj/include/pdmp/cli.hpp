#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdmp {

enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,
    kExitUsage = 2,
    kExitNoConvergence = 3,
    kExitStrictAudit = 4,
    kExitSimulationAbort = 5,
};

/// Runs the command line tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pdmp
