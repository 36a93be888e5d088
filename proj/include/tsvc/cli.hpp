#ifndef TSVC_CLI_HPP
#define TSVC_CLI_HPP

#include <string>
#include <vector>

namespace tsvc {

/// Command-line entry point (subcommands: fit, ci, simulate).
/// Returns 0 on success, 1 on usage errors, 2 on runtime failures.
int run_cli(const std::vector<std::string>& args);

}  // namespace tsvc

#endif
