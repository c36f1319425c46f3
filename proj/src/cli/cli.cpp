#include "adec/cli/cli.hpp"

#include <cstdio>
#include <deque>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "adec/cli/bench.hpp"
#include "adec/error.hpp"
#include "adec/metrics/network.hpp"

namespace adec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string g(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

pilot::PilotConfig base_pilot(const RunConfig& cfg) {
  auto p = cfg.pilot;
  for (const auto& set : cfg.ablate) {
    for (auto a : parse_ablation_set(set)) p.ablation.insert(a);
  }
  p.validate();
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

// --- run -------------------------------------------------------------------

int cmd_run(const RunConfig& cfg, std::ostream& out) {
  const auto ls = load_suite(cfg);
  const auto pcfg = base_pilot(cfg);
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < ls.suite.tasks.size(); ++i) {
    if (cfg.task.empty() || ls.suite.tasks[i].task_id == cfg.task) jobs.push_back({i, cfg.seed});
  }
  const auto results = run_jobs(cfg, pcfg, ls, jobs);
  bool all_ok = true;
  for (const auto& r : results) {
    write_lines(cfg.out / (r.task_id + ".trace.jsonl"), r.lines);
    const auto t = metrics::parse_trace(r.lines);
    const bool ok = metrics::success(t);
    all_ok = all_ok && ok;
    out << r.task_id << ": " << (ok ? "success" : "failure") << " steps=" << metrics::steps(t)
        << " cloud_calls=" << metrics::cloud_calls(t) << " replans=" << metrics::replans(t)
        << " termination=" << t.summary["termination"].value("reason", "") << '\n';
  }
  return all_ok ? kExitOk : kExitFailure;
}

// --- bench -----------------------------------------------------------------

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
  const auto ls = load_suite(cfg);
  const auto b = bench(cfg, base_pilot(cfg), ls, cfg.out);
  out << metrics::csv_header() << '\n' << metrics::csv_row(b.report) << '\n';
  return b.backend_error ? kExitFailure : kExitOk;
}

// --- ablate ----------------------------------------------------------------

struct Row {
  std::string label;
  pilot::PilotConfig pcfg;
};

std::vector<Row> ablate_rows(const RunConfig& cfg) {
  std::vector<Row> rows{{"full", cfg.pilot}};
  for (const auto& set : cfg.ablate) {
    Row r{"", cfg.pilot};
    r.pcfg.ablation = parse_ablation_set(set);
    for (auto a : r.pcfg.ablation) r.label += (r.label.empty() ? "" : "+") + std::string(pilot::to_string(a));
    rows.push_back(r);
  }
  for (const auto& spec : cfg.sweep) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep must look like tau=v1,v2 or alpha=v1,v2");
    const std::string key = spec.substr(0, eq);
    if (key != "tau" && key != "alpha") throw ConfigError("sweep key must be tau or alpha, got \"" + key + "\"");
    std::string vals = spec.substr(eq + 1);
    if (!vals.empty() && vals.front() == '[' && vals.back() == ']') vals = vals.substr(1, vals.size() - 2);
    RunConfig scratch;
    std::stringstream ss(vals);
    std::string v;
    while (std::getline(ss, v, ',')) {
      Row r{"", cfg.pilot};
      scratch.pilot = cfg.pilot;
      for (const auto& s : settings()) {
        if (s.flag == key) s.set(scratch, v);
      }
      r.pcfg = scratch.pilot;
      r.label = key + "=" + g(key == "tau" ? r.pcfg.tau : r.pcfg.grounding.alpha);
      rows.push_back(r);
    }
  }
  if (rows.size() == 1) throw ConfigError("ablate needs --ablate or --sweep");
  for (const auto& r : rows) {
    try {
      r.pcfg.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(r.label + ": " + e.what());
    }
  }
  return rows;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  const auto rows = ablate_rows(cfg);  // all rows validated before any run
  const auto ls = load_suite(cfg);
  std::ostringstream csv;
  csv << "label,SR,steps,MT,MC,replan_rate,PCH,SHR,RCE\n";
  bool backend_error = false;
  double full_mt = 0.0;
  for (const auto& r : rows) {
    const auto b = bench(cfg, r.pcfg, ls, cfg.out / r.label);
    backend_error = backend_error || b.backend_error;
    const auto& rep = b.report;
    if (r.label == "full") full_mt = rep.mt;
    std::string rce = "n/a";
    if (full_mt > 0.0) rce = g(metrics::rce(rep.mt, false, full_mt, false));
    csv << r.label << ',' << g(rep.sr) << ',' << g(rep.avg_steps) << ',' << g(rep.mt) << ',' << g(rep.mc) << ','
        << g(rep.replan_rate) << ',' << g(rep.pch_rate) << ',' << (rep.shr ? g(*rep.shr) : "n/a") << ',' << rce
        << '\n';
  }
  write_text(cfg.out / "ablate.csv", csv.str());
  out << csv.str();
  return backend_error ? kExitFailure : kExitOk;
}

// --- netscan ---------------------------------------------------------------

int cmd_netscan(const RunConfig& cfg, std::ostream& out) {
  std::vector<metrics::NetworkProfile> profiles;
  if (cfg.net.empty()) profiles = metrics::default_profiles();
  else profiles.push_back(metrics::find_profile(cfg.net));

  std::vector<metrics::MethodRow> methods;
  if (!cfg.methods.empty()) {
    if (!fs::is_regular_file(cfg.methods)) throw ConfigError("methods file not found: " + cfg.methods.string());
    methods = metrics::load_methods_file(cfg.methods.string());
  }
  const bool overrides = cfg.mc || cfg.uplink_bytes || cfg.per_call;
  if (!cfg.report.empty() || overrides) {
    metrics::MethodRow m{cfg.report.empty() ? "override" : "report", 0.0, 0.0, 0.0, 0.0, false};
    bool have_mc = false, have_up = false;
    if (!cfg.report.empty()) {
      if (!fs::is_regular_file(cfg.report)) throw ConfigError("report not found: " + cfg.report.string());
      std::ifstream is(cfg.report, std::ios::binary);
      json doc;
      try {
        doc = json::parse(is);
      } catch (const json::parse_error& e) {
        throw ParseError(cfg.report.string(), e.what());
      }
      const auto& rep = doc.contains("report") ? doc["report"] : doc;
      if (!rep.contains("mc") || !rep.contains("uplink_bytes_per_task")) {
        throw ParseError(cfg.report.string(), "report lacks mc / uplink_bytes_per_task");
      }
      m.mc = rep["mc"].get<double>();
      m.uplink_bytes = rep["uplink_bytes_per_task"].get<double>();
      have_mc = have_up = true;
    }
    if (cfg.mc) m.mc = *cfg.mc, have_mc = true;
    if (cfg.uplink_bytes) m.uplink_bytes = *cfg.uplink_bytes, have_up = true;
    if (!have_mc || !have_up) throw ConfigError("netscan overrides need both --mc and --uplink-bytes");
    if (m.mc < 0.0 || m.uplink_bytes < 0.0) throw ConfigError("mc and uplink bytes must be non-negative");
    m.per_call_s = cfg.per_call.value_or(-1.0);  // < 0: take the profile's per-call latency
    methods.push_back(m);
  }
  if (methods.empty()) throw ConfigError("netscan needs --report, --methods or --mc/--uplink-bytes");

  std::ostringstream csv;
  csv << "method,profile,bandwidth_bytes_per_s,latency_s\n";
  for (const auto& m : methods) {
    for (const auto& p : profiles) {
      const double per_call = m.per_call_s >= 0.0 ? m.per_call_s : p.per_call(cfg.modality);
      csv << m.name << ',' << p.name << ',' << g(p.bandwidth_bytes_per_s) << ','
          << num(metrics::latency(p.bandwidth_bytes_per_s, m.mc, per_call, m.uplink_bytes)) << '\n';
    }
  }
  write_text(cfg.out / "netscan.csv", csv.str());
  out << csv.str();
  return kExitOk;
}

// --- report ----------------------------------------------------------------

int cmd_report(const RunConfig& cfg, std::ostream& out) {
  if (cfg.traces.empty()) throw ConfigError("--traces is required");
  if (!fs::is_directory(cfg.traces)) throw ConfigError("not a directory: " + cfg.traces.string());
  const auto traces = metrics::load_trace_dir(cfg.traces);
  const auto rep = metrics::aggregate(traces);
  std::string suite, backend;
  std::set<std::uint64_t> seeds;
  json config = json::object();
  if (!traces.empty()) {
    suite = traces.front().header.value("suite", "");
    backend = traces.front().header.value("backend", "");
    config = traces.front().header.value("config", json::object());
  }
  for (const auto& t : traces) seeds.insert(t.header.value("seed", std::uint64_t{0}));
  write_report(cfg.out, report_document(suite, backend, {seeds.begin(), seeds.end()}, config, rep, traces), rep);
  out << metrics::csv_header() << '\n' << metrics::csv_row(rep) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"adec: hierarchical edge/cloud mobile agent runner"};
  app.name("adec");
  app.require_subcommand(1);
  std::string config_file;
  app.add_option("--config", config_file, "sectioned key = value config file")->check(CLI::ExistingFile);

  std::deque<std::string> single;
  std::deque<std::vector<std::string>> multi;
  std::vector<std::pair<const Setting*, CLI::Option*>> opts;
  for (const auto& s : settings()) {
    CLI::Option* o = nullptr;
    if (s.multi) {
      o = app.add_option("--" + s.flag, multi.emplace_back(), s.help)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
      o->allow_extra_args(false);
    } else {
      o = app.add_option("--" + s.flag, single.emplace_back(), s.help);
    }
    opts.emplace_back(&s, o);
  }
  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"run", "run one task (--task) or every task of a suite once"},
      {"bench", "run a suite over several seeds and write a cost report"},
      {"ablate", "bench the full pilot against ablations or a tau/alpha sweep"},
      {"netscan", "latency per network profile from a report, a methods file or overrides"},
      {"report", "aggregate a directory of traces into a cost report"}};
  for (const auto& [name, help] : cmds) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    std::size_t si = 0, mi = 0;
    for (auto& [s, o] : opts) {
      if (s->multi) {
        const auto& vals = multi[mi++];
        if (o->count() > 0) {
          // flags replace whatever the file listed
          if (s->flag == "ablate") cfg.ablate.clear();
          if (s->flag == "sweep") cfg.sweep.clear();
          for (const auto& v : vals) s->set(cfg, v);
        }
      } else {
        const auto& v = single[si++];
        if (o->count() > 0) s->set(cfg, v);
      }
    }
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "run") return cmd_run(cfg, out);
    if (name == "bench") return cmd_bench(cfg, out);
    if (name == "ablate") return cmd_ablate(cfg, out);
    if (name == "netscan") return cmd_netscan(cfg, out);
    return cmd_report(cfg, out);
  } catch (const ConfigError& e) {
    err << "adec: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "adec: parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "adec: invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const AccountingError& e) {
    err << "adec: accounting error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "adec: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace adec::cli
