#ifndef HUANET_CLI_HPP
#define HUANET_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace huanet
{

/// Exit codes of the command-line tool.
enum ExitCode : int
{
    exit_ok = 0,
    exit_internal = 1,
    exit_usage = 2,
    exit_data = 3,
    exit_numerical = 4,
};

/// Entry point of the `huanet` tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace huanet

#endif // HUANET_CLI_HPP
