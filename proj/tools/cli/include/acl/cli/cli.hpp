#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace acl::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,    // bad flags, config keys or values
  kExitData = 3,     // unreadable, malformed or inconsistent data and model files
  kExitNumeric = 4,  // non-finite values during training or inference
};

// Runs one `acl` invocation. `args` excludes the program name. Normal output
// goes to `out`; failures print a single "acl: error: <kind>: <message>" line
// to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Exit code and short kind name ("config", "format", ...) for a caught error.
struct ErrorClass {
  int exit_code;
  const char* kind;
};
ErrorClass classify_error(const std::exception& e);

}  // namespace acl::cli
