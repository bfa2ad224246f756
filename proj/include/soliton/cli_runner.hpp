#ifndef SOLITON_CLI_RUNNER_HPP
#define SOLITON_CLI_RUNNER_HPP

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

namespace soliton::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kToleranceVersion = 1;

// Exit contract: 0 success, 1 schema/missing files, 2 hypothesis failure,
// 3 numeric non-convergence.
struct RunResult {
  int exit_code = 0;
  std::string message;
};

// Validates the config; throws DomainError with a pointer-addressed message.
void validate_config(const json& config);

// Executes one pipeline run: writes metadata.json, data CSVs, certificates
// and a plot script into config["output_dir"].
RunResult run(const json& config);

// Re-checks the certificates of a bundle from its stored data.
RunResult verify_bundle(const std::filesystem::path& dir);

// argv -> config -> run; the entry point used by the binary.
int main_entry(int argc, char** argv);

}  // namespace soliton::cli

#endif
