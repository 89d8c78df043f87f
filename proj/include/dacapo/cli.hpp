#pragma once

namespace dacapo::cli {

// Full command-line entry point (subcommands: encode, allocate, run,
// validate, print-defaults).  Returns the process exit code: 0 ok,
// 1 config/usage error, 2 I/O or parse error, 3 infeasible allocation.
int cli_main(int argc, char** argv);

}  // namespace dacapo::cli
