#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ncdre {

/// Process exit codes. Failures also print one line
/// "error[<category>]: <message>" on the error stream.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitData = 4,
  kExitVocabulary = 5,
  kExitIo = 6,
  kExitNumeric = 7,
};

const char* exit_category(int code);

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string config_path;
  long long seed = 0;
  std::string started;
  std::string finished;
  std::string out_dir;
  std::string version;
  int exit_code = 0;

  std::string to_json() const;
};

/// Version string baked in at configure time (git describe when available).
std::string version_string();

/// Entry point of the ncdre binary: synth, train, eval, explain.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ncdre
