#pragma once

#include <stdexcept>
#include <string>

namespace mlcam {

// Error taxonomy used across the library. Every failure path throws Error with
// a kind tag so callers (and the CLI) can map failures to exit codes uniformly.
enum class ErrorKind {
  Config,     // invalid configuration or arguments
  Contract,   // precondition/shape violation by the caller
  Io,         // filesystem / OS level failure
  Format,     // malformed file content
  Lookup,     // unknown id / out-of-range index
  State,      // operation invalid in current state (e.g. untrained model)
  Training,   // divergence (NaN loss) during optimization
  Eval,       // empty or impossible evaluation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:   return "config";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Io:       return "io";
    case ErrorKind::Format:   return "format";
    case ErrorKind::Lookup:   return "lookup";
    case ErrorKind::State:    return "state";
    case ErrorKind::Training: return "training";
    case ErrorKind::Eval:     return "eval";
  }
  return "unknown";
}

}  // namespace mlcam

#define MLCAM_CHECK(cond, kind, msg)                        \
  do {                                                      \
    if (!(cond)) ::mlcam::fail(::mlcam::ErrorKind::kind,    \
                               std::string(msg));           \
  } while (0)
