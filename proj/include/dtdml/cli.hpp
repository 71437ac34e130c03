#pragma once

namespace dtdml {

// Entry point of the command-line tool, separated from main() so tests can
// drive it in-process. Returns 0 on success, 1 on solver divergence or other
// runtime failure, 2 on configuration errors.
int cli_main(int argc, const char* const* argv);

}  // namespace dtdml
