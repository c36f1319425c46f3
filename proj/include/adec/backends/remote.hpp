#pragma once

#include <string>
#include <vector>

#include "adec/backends/interfaces.hpp"
#include "adec/backends/tokens.hpp"

namespace adec::backends {

struct RemoteConfig {
  std::string base_url;   // e.g. http://127.0.0.1:8080/v1
  std::string api_key;
  std::string model = "gpt-4o";
  double temperature = 0.0;
  double timeout_s = 30.0;
  double epsilon = 1e-6;  // executor probability for nodes the model did not pick
  double designer_latency_s = 2.0;
  TokenCounter tokens;
  std::vector<std::string> question_markers = {"who", "what", "when", "where", "how", "which", "?"};
};

// Fills base_url / api_key from ADEC_API_BASE / ADEC_API_KEY when set.
// ConfigError when no key or no base url ends up configured.
RemoteConfig resolve_remote_config(RemoteConfig cfg);

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

// Minimal chat-completions client. One POST per call; timeouts and non-2xx
// replies raise BackendError.
class ChatClient {
 public:
  explicit ChatClient(RemoteConfig cfg);
  std::string complete(const std::vector<ChatMessage>& messages) const;
  const RemoteConfig& config() const { return cfg_; }

 private:
  RemoteConfig cfg_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

class RemoteDesigner : public Designer {
 public:
  explicit RemoteDesigner(ChatClient client) : client_(std::move(client)) {}
  DesignResult plan(const DesignRequest& request) override;

 private:
  ChatClient client_;
};

// align() and suggest() share one round trip: the reply's suggestion is kept
// as Alignment::proposal.
class RemoteOrchestrator : public Orchestrator {
 public:
  explicit RemoteOrchestrator(ChatClient client) : client_(std::move(client)) {}
  Alignment align(const AlignRequest& request) override;
  SuggestResult suggest(const SuggestRequest& request) override;
  FinalizeResult finalize(const FinalizeRequest& request) override;

 private:
  ChatClient client_;
};

class RemoteExecutor : public ExecutorScorer {
 public:
  explicit RemoteExecutor(ChatClient client) : client_(std::move(client)) {}
  ScoreSet score(const ScoreRequest& request) override;

 private:
  ChatClient client_;
};

BackendSet make_remote_backends(const RemoteConfig& cfg);

}  // namespace adec::backends
