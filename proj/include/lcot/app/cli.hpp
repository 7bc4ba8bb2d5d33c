#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lcot/common/error.hpp"

namespace lcot::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitEmpty = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

int exit_code_for(ErrorCode code);

// args excludes the program name. Verbs: pipeline, search, article, eval,
// cluster, serve, mcp. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

} // namespace lcot::app
