#pragma once

#include <string>

#include "soap/maxsat.hpp"

namespace soap {

/// Runs `command <file.wcnf>` and reads a MaxSAT-evaluation style answer:
/// an "s" status line and a "v" model line, given either as literals or as
/// one 0/1 string. The returned cost is recomputed from the instance, and a
/// model violating a hard clause raises ValidationError.
SolveResult solve_external(const WcnfInstance& instance, const std::string& command,
                           const SolveOptions& options = {});

/// Parses solver output; exposed for testing.
SolveResult parse_solver_output(const std::string& output, const WcnfInstance& instance);

}  // namespace soap
