#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dperc/potential.hpp"

namespace dperc {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int capacity = 3;
inline constexpr int numerical = 4;
}  // namespace exit_code

/// One configurable key of a command. Keys use underscores; command-line
/// flags spell them with hyphens (pop_size ↔ --pop-size).
struct ParamSpec {
  std::string key;
  std::string default_value;
  std::string help;
};

const std::vector<std::string>& command_names();

/// Every key the command accepts, including seed, workers and out_dir.
/// Throws ConfigError for an unknown command.
const std::vector<ParamSpec>& command_schema(std::string_view command);

/// "pop-size" → "pop_size"
std::string canonical_key(std::string_view key);

struct ExperimentConfig {
  std::string command;
  std::map<std::string, std::string> params;  // fully resolved, one per schema key
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::filesystem::path out_dir;

  [[nodiscard]] const std::string& text(const std::string& key) const;
  [[nodiscard]] double real(const std::string& key) const;
  [[nodiscard]] long long integer(const std::string& key) const;
  [[nodiscard]] std::vector<int> int_list(const std::string& key) const;
  [[nodiscard]] BoundedPotential potential() const;
};

/// Flat "key = value" lines; blank lines and '#' comments are ignored.
std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source);

/// Defaults, then file values, then overrides. Unknown keys are rejected
/// with the offending key named.
ExperimentConfig resolve_config(const std::string& command,
                                const std::map<std::string, std::string>& file_values,
                                const std::map<std::string, std::string>& overrides);

/// Reads the key-value file at `path` (an empty path means no file) and
/// resolves it against the command-line overrides. The file may name the
/// command with a `command` key; a non-empty `command` argument wins.
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& command,
                             const std::map<std::string, std::string>& overrides = {});

struct Artifact {
  std::string name;
  std::string content;
};

/// Runs the command entirely in memory and returns the files it produces,
/// manifest.json last.
std::vector<Artifact> execute(const ExperimentConfig& config, std::ostream& log);

/// execute() + write artifacts into out_dir. Maps failures onto exit codes
/// and leaves no partial outputs behind.
int run(const ExperimentConfig& config, std::ostream& log);

}  // namespace dperc
