#include "adec/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>

#include "adec/error.hpp"

namespace adec::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& name, const std::string& v) {
  const std::string t = trim(v);
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(d)) throw ConfigError(name + ": not a number: \"" + v + "\"");
  return d;
}

long long to_int(const std::string& name, const std::string& v) {
  const std::string t = trim(v);
  long long n = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw ConfigError(name + ": not an integer: \"" + v + "\"");
  }
  return n;
}

std::uint64_t to_seed(const std::string& name, const std::string& v) {
  const long long n = to_int(name, v);
  if (n < 0) throw ConfigError(name + ": seeds are non-negative");
  return static_cast<std::uint64_t>(n);
}

bool to_bool(const std::string& name, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  throw ConfigError(name + ": not a boolean: \"" + v + "\"");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<Setting> build_settings() {
  std::vector<Setting> s;
  auto add = [&](std::string flag, std::string key, auto fn, std::string help, bool path = false,
                 bool multi = false) {
    s.push_back({std::move(flag), std::move(key), path, multi, fn, std::move(help)});
  };
  add("world", "run.world", [](RunConfig& c, const std::string& v) { c.world = v; },
      "world JSON (default: the suite's own world)", true);
  add("tasks", "run.tasks", [](RunConfig& c, const std::string& v) { c.tasks = v; }, "task suite JSON", true);
  add("task", "run.task", [](RunConfig& c, const std::string& v) { c.task = trim(v); },
      "run a single task id");
  add("backend", "run.backend",
      [](RunConfig& c, const std::string& v) {
        const auto t = trim(v);
        if (t == "oracle") c.backend = BackendKind::oracle;
        else if (t == "remote") c.backend = BackendKind::remote;
        else throw ConfigError("backend must be oracle or remote, got \"" + v + "\"");
      },
      "oracle | remote");
  add("seed", "run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_seed("seed", v); }, "world seed");
  add("out", "run.out", [](RunConfig& c, const std::string& v) { c.out = v; }, "output directory", true);
  add("seeds", "bench.seeds",
      [](RunConfig& c, const std::string& v) {
        c.seeds.clear();
        for (const auto& p : split(v, ',')) c.seeds.push_back(to_seed("seeds", p));
      },
      "comma-separated bench seeds (default 0,1,2)");
  add("jobs", "bench.jobs",
      [](RunConfig& c, const std::string& v) {
        const auto n = to_int("jobs", v);
        if (n < 1) throw ConfigError("jobs must be at least 1");
        c.jobs = static_cast<int>(n);
      },
      "parallel tasks");
  add("net", "network.profile", [](RunConfig& c, const std::string& v) { c.net = trim(v); },
      "network profile: WiFi | 4G | 3G | 2G");
  add("tau", "pilot.tau", [](RunConfig& c, const std::string& v) { c.pilot.tau = to_double("tau", v); },
      "alignment threshold");
  add("tau-qa", "pilot.tau_qa", [](RunConfig& c, const std::string& v) { c.pilot.tau_qa = to_double("tau-qa", v); },
      "alignment threshold for answer milestones");
  add("t-replan", "pilot.t_replan",
      [](RunConfig& c, const std::string& v) { c.pilot.t_replan = static_cast<int>(to_int("t-replan", v)); },
      "steps per milestone before replanning");
  add("t-max", "pilot.t_max",
      [](RunConfig& c, const std::string& v) { c.pilot.t_max = static_cast<int>(to_int("t-max", v)); },
      "global step limit");
  add("replan-rounds", "pilot.replan_rounds",
      [](RunConfig& c, const std::string& v) {
        c.pilot.replan_rounds = static_cast<int>(to_int("replan-rounds", v));
      },
      "cloud replans allowed (R)");
  add("inner-retries", "pilot.inner_retries",
      [](RunConfig& c, const std::string& v) {
        c.pilot.inner_retries = static_cast<int>(to_int("inner-retries", v));
      },
      "re-suggestions after a tactical failure");
  add("history-window", "pilot.history_window",
      [](RunConfig& c, const std::string& v) {
        c.pilot.history_window = static_cast<int>(to_int("history-window", v));
      },
      "recent actions shown to the orchestrator");
  add("hit", "pilot.hit", [](RunConfig& c, const std::string& v) { c.pilot.hit_enabled = to_bool("hit", v); },
      "termination gate on/off");
  add("success-token", "pilot.success_token",
      [](RunConfig& c, const std::string& v) { c.pilot.success_token = trim(v); }, "explicit completion token");
  add("ablate", "pilot.ablate", [](RunConfig& c, const std::string& v) { c.ablate.push_back(trim(v)); },
      "comma-joined ablation set; repeat for more ablate rows", false, true);
  add("alpha", "grounding.alpha",
      [](RunConfig& c, const std::string& v) { c.pilot.grounding.alpha = to_double("alpha", v); },
      "structural regularization weight");
  add("score-floor", "grounding.score_floor",
      [](RunConfig& c, const std::string& v) { c.pilot.grounding.score_floor = to_double("score-floor", v); },
      "minimum grounding objective");
  add("sweep", "ablate.sweep", [](RunConfig& c, const std::string& v) { c.sweep.push_back(trim(v)); },
      "tau=v1,v2,... or alpha=v1,v2,...", false, true);
  add("report", "netscan.report", [](RunConfig& c, const std::string& v) { c.report = v; },
      "bench report.json supplying mc and uplink", true);
  add("methods", "netscan.methods", [](RunConfig& c, const std::string& v) { c.methods = v; },
      "methods JSON, one latency row per method and profile", true);
  add("mc", "netscan.mc", [](RunConfig& c, const std::string& v) { c.mc = to_double("mc", v); },
      "cloud calls per task");
  add("uplink-bytes", "netscan.uplink_bytes",
      [](RunConfig& c, const std::string& v) { c.uplink_bytes = to_double("uplink-bytes", v); },
      "uplink bytes per task");
  add("per-call", "netscan.per_call",
      [](RunConfig& c, const std::string& v) { c.per_call = to_double("per-call", v); },
      "seconds per cloud call");
  add("modality", "netscan.modality",
      [](RunConfig& c, const std::string& v) {
        const auto t = trim(v);
        if (t != "text" && t != "visual") throw ConfigError("modality must be text or visual");
        c.modality = t;
      },
      "text | visual");
  add("traces", "report.traces", [](RunConfig& c, const std::string& v) { c.traces = v; },
      "directory of trace files", true);
  return s;
}

}  // namespace

const std::vector<Setting>& settings() {
  static const std::vector<Setting> s = build_settings();
  return s;
}

std::set<pilot::Ablation> parse_ablation_set(const std::string& list) {
  std::set<pilot::Ablation> out;
  for (const auto& name : split(list, ',')) {
    if (name.empty()) continue;
    out.insert(pilot::parse_ablation(name));
  }
  if (out.empty()) throw ConfigError("empty ablation set");
  return out;
}

void apply_config_file(RunConfig& cfg, const fs::path& file) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(file.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const fs::path base = file.parent_path();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key outside a section: " + section);
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const Setting* hit = nullptr;
      for (const auto& s : settings()) {
        if (s.ini_key == full) hit = &s;
      }
      if (!hit) throw ConfigError("config: unknown key " + full);
      std::string v = value.data();
      if (hit->is_path && !v.empty() && fs::path(v).is_relative()) v = (base / v).lexically_normal().string();
      hit->set(cfg, v);
    }
  }
}

}  // namespace adec::cli
