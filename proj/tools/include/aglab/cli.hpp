#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aglab::cli {

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "AGLAB_OUTPUT_ROOT";

enum ExitCode : int { ok = 0, usage = 1, numeric = 2, io = 3 };

/// Runs one `aglab` invocation; `args` excludes the program name. Errors are
/// reported on `err` as one JSON line: {"error": kind, "exit_code": n, "message": ...}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version_string();

} // namespace aglab::cli
