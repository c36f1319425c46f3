#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adec/pilot/pilot.hpp"

namespace adec::cli {

enum class BackendKind { oracle, remote };

struct RunConfig {
  std::filesystem::path world;  // empty: take the suite's world
  std::filesystem::path tasks;
  std::string task;             // run: a single task id, empty for all
  BackendKind backend = BackendKind::oracle;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int jobs = 1;
  std::filesystem::path out = ".";
  std::string net;              // empty: every profile
  pilot::PilotConfig pilot;
  // each entry is one comma-joined ablation set
  std::vector<std::string> ablate;
  std::vector<std::string> sweep;  // "tau=0.4,0.6"
  // netscan
  std::filesystem::path report;
  std::filesystem::path methods;
  std::optional<double> mc;
  std::optional<double> uplink_bytes;
  std::optional<double> per_call;
  std::string modality = "text";
  // report
  std::filesystem::path traces;
};

// One overridable setting: its flag, its key in the config file and how a
// string value lands in RunConfig. Setters throw ConfigError.
struct Setting {
  std::string flag;     // without leading dashes
  std::string ini_key;  // "section.key"
  bool is_path = false;
  bool multi = false;   // repeatable flag
  std::function<void(RunConfig&, const std::string&)> set;
  std::string help;
};

const std::vector<Setting>& settings();

// Sectioned key = value file; relative paths resolve against the file's
// directory. ConfigError on unknown keys or bad values.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& file);

// ablation names from a comma list; ConfigError on unknown names
std::set<pilot::Ablation> parse_ablation_set(const std::string& list);

}  // namespace adec::cli
