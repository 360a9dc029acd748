#pragma once

// Command implementations behind the capassign executable.
//
// Exit codes: 0 success, 1 numerical failure, 2 input or schema error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace capassign::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitInput = 2;

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::optional<std::size_t> workers;
};

int cmd_fit(const CommandOptions& options, std::ostream& log);
int cmd_assign(const CommandOptions& options, std::ostream& log);
int cmd_simulate(const CommandOptions& options, std::ostream& log);
int cmd_ot(const CommandOptions& options, std::ostream& log);

/// Dispatches by name and maps exceptions to exit codes, printing the
/// diagnostic to `err`.
int run(const std::string& command, const CommandOptions& options, std::ostream& log,
        std::ostream& err);

}  // namespace capassign::cli
