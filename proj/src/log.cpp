#include "dtdml/log.hpp"

#include <cstdio>
#include <cstdlib>

namespace dtdml {

int verbosity() {
  static const int level = [] {
    const char* raw = std::getenv("DTDML_VERBOSITY");
    if (!raw) return 0;
    return std::atoi(raw);
  }();
  return level;
}

void log_warn(const std::string& message) {
  std::fprintf(stderr, "[warn] %s\n", message.c_str());
}

void log_info(const std::string& message) {
  if (verbosity() >= 1) std::fprintf(stderr, "[info] %s\n", message.c_str());
}

void log_debug(const std::string& message) {
  if (verbosity() >= 2) std::fprintf(stderr, "[debug] %s\n", message.c_str());
}

}  // namespace dtdml
