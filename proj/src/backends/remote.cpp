#include "adec/backends/remote.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>

#include "adec/backends/oracle.hpp"
#include "adec/backends/response.hpp"
#include "adec/error.hpp"
#include "httplib.h"

namespace adec::backends {

using nlohmann::json;

namespace {

constexpr const char* kJsonReminder = "Your previous reply was not valid JSON. Output strictly in JSON format.";

long long bytes_of(const std::vector<ChatMessage>& msgs) {
  long long n = 0;
  for (const auto& m : msgs) n += static_cast<long long>(m.content.size());
  return n;
}

BackendCallRecord record_for(const RemoteConfig& cfg, Role role, Location loc, const std::vector<ChatMessage>& sent,
                             const std::string& reply) {
  BackendCallRecord r;
  r.role = role;
  r.location = loc;
  for (const auto& m : sent) r.prompt_tokens += cfg.tokens.count(m.content);
  r.completion_tokens = cfg.tokens.count(reply);
  r.payload_bytes = bytes_of(sent);
  r.latency_s = loc == Location::cloud ? cfg.designer_latency_s : 0.0;
  return r;
}

void fold(BackendCallRecord& into, const BackendCallRecord& r) {
  into.prompt_tokens += r.prompt_tokens;
  into.completion_tokens += r.completion_tokens;
  into.payload_bytes += r.payload_bytes;
}

// The orchestrator sees a textual rendering of the screen in place of pixels.
std::string screen_block(const sim::VisualState& v) { return "\n\ncurrent screen:\n" + sim::to_json(v).dump(); }

// Sends `msgs`, parses with `parse`; on a parse failure re-prompts once.
// Returns the parsed value or nullopt, and appends one record per request.
template <typename T, typename Parse>
std::optional<T> ask(const ChatClient& client, Role role, Location loc, std::vector<ChatMessage> msgs, Parse parse,
                     std::vector<BackendCallRecord>& records, std::string* last_error) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto reply = client.complete(msgs);
    records.push_back(record_for(client.config(), role, loc, msgs, reply));
    try {
      return parse(reply);
    } catch (const ResponseParseError& e) {
      if (last_error) *last_error = e.what();
      msgs.push_back({"assistant", reply});
      msgs.push_back({"user", kJsonReminder});
    }
  }
  return std::nullopt;
}

MetaInstruction meta_from(const OrchestratorReply& r, const sim::VisualState& v, std::vector<std::string>* warnings) {
  MetaInstruction m;
  m.text = r.suggestion;
  m.raw_observation = r.observation;
  std::string warn;
  m.p_ref = parse_spatial_reference(r.spatial_reference.empty() ? r.suggestion : r.spatial_reference, v.pixel_size, &warn);
  if (!warn.empty() && warnings) warnings->push_back(warn);
  if (r.status == "FINISHED") m.status = MetaStatus::finished;
  if (r.status == "ANSWER_READY") m.status = MetaStatus::answer_ready;
  m.answer = r.answer;
  return m;
}

}  // namespace

RemoteConfig resolve_remote_config(RemoteConfig cfg) {
  if (const char* base = std::getenv("ADEC_API_BASE"); base && *base) cfg.base_url = base;
  if (const char* key = std::getenv("ADEC_API_KEY"); key && *key) cfg.api_key = key;
  if (cfg.api_key.empty()) throw ConfigError("remote backend needs ADEC_API_KEY");
  if (cfg.base_url.empty()) throw ConfigError("remote backend needs ADEC_API_BASE");
  return cfg;
}

ChatClient::ChatClient(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(cfg_.base_url, m, url_re)) throw ConfigError("bad API base url \"" + cfg_.base_url + "\"");
  scheme_host_port_ = m[1].str();
  path_prefix_ = m[2].str();
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme_host_port_.rfind("https", 0) == 0) throw ConfigError("https endpoints need a build with OpenSSL");
#endif
  if (cfg_.timeout_s <= 0) throw ConfigError("timeout must be positive");
}

std::string ChatClient::complete(const std::vector<ChatMessage>& messages) const {
  httplib::Client cli(scheme_host_port_);
  const auto secs = static_cast<time_t>(cfg_.timeout_s);
  const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  cli.set_bearer_token_auth(cfg_.api_key);

  json body = {{"model", cfg_.model}, {"temperature", cfg_.temperature}, {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  const auto res = cli.Post(path_prefix_ + "/chat/completions", body.dump(), "application/json");
  if (!res) throw BackendError("chat request failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("chat endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed chat completion body: ") + e.what());
  }
}

DesignResult RemoteDesigner::plan(const DesignRequest& req) {
  if (req.instruction.empty()) throw DesignerError("empty task instruction");
  const auto p = designer_prompt(req, client_.config().question_markers);
  std::vector<BackendCallRecord> records;
  std::string err;
  auto milestones = ask<std::vector<Milestone>>(
      client_, Role::designer, Location::cloud, {{"system", p.system}, {"user", p.user}},
      [](const std::string& r) { return parse_plan(r); }, records, &err);

  // the retry is part of the same logical designer call
  DesignResult out;
  out.record = records.front();
  for (std::size_t i = 1; i < records.size(); ++i) fold(out.record, records[i]);
  if (!milestones) throw DesignerError("unparseable designer reply: " + err);
  validate_plan(*milestones);
  out.plan.milestones = std::move(*milestones);
  out.plan.revision = req.failure ? (req.previous ? req.previous->revision + 1 : 1) : 0;
  return out;
}

Alignment RemoteOrchestrator::align(const AlignRequest& req) {
  Alignment out;
  const auto prompt = orchestrator_prompt(req.milestone, req.history) + screen_block(req.visual);
  std::string err;
  const auto reply = ask<OrchestratorReply>(
      client_, Role::orchestrator, Location::edge, {{"user", prompt}},
      [](const std::string& r) { return parse_orchestrator(r); }, out.records, &err);
  if (!reply) {
    out.warnings.push_back("alignment reply unparseable, scored 0: " + err);
    return out;
  }
  if (reply->finished_probability) {
    out.score = std::clamp(*reply->finished_probability, 0.0, 1.0);
  } else {
    out.score = reply->status == "ONGOING" ? 0.0 : 1.0;
  }
  auto meta = meta_from(*reply, req.visual, &out.warnings);
  out.status = meta.status;
  out.answer = reply->answer;
  meta.status = MetaStatus::ongoing;
  if (!meta.text.empty()) out.proposal = std::move(meta);
  return out;
}

SuggestResult RemoteOrchestrator::suggest(const SuggestRequest& req) {
  SuggestResult out;
  if (!req.feedback && req.cached && !req.cached->text.empty()) {
    out.meta = req.cached;
    return out;
  }
  auto history = req.history;
  if (req.feedback) history.push_back("feedback: " + *req.feedback);
  std::vector<ChatMessage> msgs = {{"user", orchestrator_prompt(req.milestone, history) + screen_block(req.visual)}};

  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto reply = ask<OrchestratorReply>(
        client_, Role::orchestrator, Location::edge, msgs,
        [](const std::string& r) { return parse_orchestrator(r); }, out.records, nullptr);
    if (!reply) break;
    auto meta = meta_from(*reply, req.visual, &out.warnings);
    meta.status = MetaStatus::ongoing;
    const bool repeat = req.feedback && req.previous && meta.text == req.previous->text;
    if (!meta.text.empty() && !repeat) {
      out.meta = std::move(meta);
      return out;
    }
    // one re-prompt asking for something else
    msgs.push_back({"assistant", json{{"suggestion", meta.text}}.dump()});
    msgs.push_back({"user", repeat ? "That suggestion already failed. Propose a different action."
                                   : "The suggestion was empty. Propose the next action."});
  }
  out.warnings.push_back("orchestrator produced no usable suggestion");
  return out;
}

FinalizeResult RemoteOrchestrator::finalize(const FinalizeRequest& req) {
  FinalizeResult out;
  const auto prompt = orchestrator_prompt(req.milestone, req.history) + screen_block(req.visual);
  const auto reply = ask<OrchestratorReply>(
      client_, Role::orchestrator, Location::edge, {{"user", prompt}},
      [](const std::string& r) { return parse_orchestrator(r); }, out.records, nullptr);
  if (reply) out.meta = meta_from(*reply, req.visual, nullptr);
  return out;
}

ScoreSet RemoteExecutor::score(const ScoreRequest& req) {
  ScoreSet out;
  const auto n = req.candidates.size();
  if (n == 0 || !req.tree) {
    out.abstain = true;
    out.message = "no interactable candidates";
    return out;
  }
  std::string err;
  const auto action = ask<sim::Action>(
      client_, Role::executor, Location::edge, {{"user", executor_prompt(req)}},
      [](const std::string& r) { return parse_executor(r); }, out.records, &err);
  for (auto& r : out.records) r.uploaded_elements = static_cast<long long>(n);

  const double log_eps = std::log(client_.config().epsilon);
  out.log_probs.assign(n, log_eps);
  if (!action) {
    out.abstain = true;
    out.message = "executor reply unparseable: " + err;
    return out;
  }
  const auto it = std::find(req.candidates.begin(), req.candidates.end(), action->index);
  if (!action->targets_node() || it == req.candidates.end()) {
    out.abstain = true;
    out.message = "executor selected no candidate (" + sim::describe(*action) + ")";
    return out;
  }
  out.log_probs[static_cast<std::size_t>(it - req.candidates.begin())] = 0.0;
  return out;
}

BackendSet make_remote_backends(const RemoteConfig& cfg) {
  const auto resolved = resolve_remote_config(cfg);
  return {std::make_shared<RemoteDesigner>(ChatClient(resolved)), std::make_shared<RemoteOrchestrator>(ChatClient(resolved)),
          std::make_shared<RemoteExecutor>(ChatClient(resolved))};
}

}  // namespace adec::backends
