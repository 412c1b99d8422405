#include "resamplex/error.hpp"

#include <cstdlib>

#include "resamplex/parallel.hpp"

namespace resamplex {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::parse: return "ParseError";
    case ErrorKind::arity_mismatch: return "ArityMismatch";
    case ErrorKind::duplicate_leaf: return "DuplicateLeaf";
    case ErrorKind::missing_leaf: return "MissingLeaf";
    case ErrorKind::cap_exceeded: return "CapExceeded";
    case ErrorKind::infeasible: return "Infeasible";
    case ErrorKind::tied_values: return "TiedValues";
    case ErrorKind::unknown_scenario: return "UnknownScenario";
    case ErrorKind::unsupported: return "Unsupported";
  }
  return "Error";
}

int thread_cap() {
  const char* env = std::getenv("RESAMPLEX_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  const long v = std::strtol(env, nullptr, 10);
  return v > 0 ? static_cast<int>(v) : 0;
}

}  // namespace resamplex
