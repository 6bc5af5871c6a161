#pragma once

// Experiment configuration: a flat, sectioned key=value file. Every key has a
// default, so a minimal file only names a preset:
//
//   [experiment]
//   name = easy_eher
//   preset = easy
//
// Sections and keys are listed in README.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcrl/digitflip.hpp"
#include "gcrl/qfunction.hpp"
#include "gcrl/relabel.hpp"
#include "gcrl/trainer.hpp"

namespace gcrl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IgoalVariant { none, igoal, parallel };
std::string to_string(IgoalVariant v);

// Evaluation opponent; `automatic` follows the arm's training condition.
enum class EvalAdversary { automatic, none, random, competent, pool };
std::string to_string(EvalAdversary e);

struct GridConfig {
  std::vector<int> n_values = {3, 4, 5, 6, 7, 8, 9};
  std::vector<int> r_values = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  int models = 5;
  long train_steps = 30000;
  int test_episodes = 1000;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string preset;  // easy | medium | hard, applied before explicit keys
  std::filesystem::path output_dir = "results";

  DigitFlipConfig env{4, 2, 0, AdversaryMode::none};  // max_steps 0: default budget
  TrainConfig agent;
  RelabelConfig replay;
  long mixin_horizon = 0;  // 0: total_steps

  long snapshot_interval = 4000;
  IgoalVariant variant = IgoalVariant::none;

  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5};
  long total_steps = 30000;
  long eval_every = 4000;
  int eval_episodes = 200;
  EvalAdversary eval_adversary = EvalAdversary::automatic;
  std::filesystem::path pool_file;
  std::size_t td_window = 20;
  bool track_td_error = true;
  bool save_agents = false;

  GridConfig grid;

  // Throws ConfigError.
  void validate() const;

  // Canonical text form; parse_config(to_text()) reproduces the config.
  std::string to_text() const;

  // Applies "section.key" = value. Throws ConfigError on unknown keys or
  // malformed values.
  void set(const std::string& dotted_key, const std::string& value);

  IgoalConfig igoal_config(std::uint64_t seed) const;
  RelabelConfig relabel_config() const;
};

// Environment tuple behind a preset name: easy (4,2), medium (9,3), hard (9,4).
std::pair<int, int> preset_dimensions(const std::string& preset);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies a preset first, then every explicit key, so explicit keys win.
ExperimentConfig config_from_entries(const std::map<std::string, std::string>& entries);

}  // namespace gcrl
