#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qem/agent.hpp"
#include "qem/mdp.hpp"

namespace qem {

/// Thrown on schema violations in a run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Fully resolved experiment description. `resolved` holds the complete
/// config with every default filled in; it is what lands in manifest.json
/// and can be fed back verbatim to reproduce the run.
struct ExperimentConfig {
  std::string experiment;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  nlohmann::json resolved;
};

/// Parses and validates a config object against the documented schema,
/// filling experiment-specific defaults.
ExperimentConfig resolve_config(const nlohmann::json& raw);

/// Builds the experiment MDP named by the resolved config.
TabularMdp mdp_from_config(const nlohmann::json& resolved);

/// Builds the TrainConfig (minus seed) from the resolved config.
TrainConfig train_config_from_json(const nlohmann::json& resolved, std::uint64_t seed);

struct ExperimentOutcome {
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
};

/// Runs the experiment, writing `<experiment>_<seed>.csv` series files,
/// summary.json and manifest.json under output_dir.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Convenience: load config from a file path, honoring the
/// QEM_OUTPUT_DIR environment variable and an optional seed override.
ExperimentConfig load_config_file(const std::filesystem::path& path,
                                  const std::optional<std::uint64_t>& seed_override);

std::string format_csv_number(double value);

}  // namespace qem
