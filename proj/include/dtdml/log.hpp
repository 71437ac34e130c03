#pragma once

#include <string>

namespace dtdml {

// Verbosity is read once from the DTDML_VERBOSITY environment variable:
// 0 (default) prints warnings only, 1 adds progress notes, 2 adds debug
// detail. All output goes to stderr so result files stay clean.
int verbosity();

void log_warn(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace dtdml
