#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adec/sim/action.hpp"
#include "adec/sim/predicate.hpp"
#include "adec/sim/ui_tree.hpp"
#include "json.hpp"

namespace adec::sim {

inline constexpr const char* kWorldSchema = "adec-world/1";

enum class EventKind { toast, notification, dialog_dismissed };
std::string_view to_string(EventKind k);

struct SystemEvent {
  EventKind kind = EventKind::toast;
  std::string payload;
  int step_emitted = 0;
  bool operator==(const SystemEvent&) const = default;
};
nlohmann::json to_json(const SystemEvent& e);
SystemEvent event_from_json(const nlohmann::json& j);

// What the orchestrator "sees": a structured stand-in for a screenshot.
struct VisualElement {
  std::string text;
  std::string label;    // content description
  Rect bounds;
  bool clickable = false;   // visual affordance; a dialog may still block it
  bool in_dialog = false;
  std::string widget;       // widget key when the element renders widget state
  std::string context;      // texts of non-interactive siblings (row labels)
  bool operator==(const VisualElement&) const = default;
};

struct VisualState {
  std::string screen_id;
  std::string app_name;
  bool on_home = false;
  std::set<std::string> visible_texts;
  std::map<std::string, std::string> widget_states;
  Size pixel_size;
  std::vector<VisualElement> elements;
  bool dialog_open = false;
  bool can_scroll_down = false;
  bool operator==(const VisualState&) const = default;
};
nlohmann::json to_json(const VisualState& v);

struct Observation {
  VisualState visual;
  UiTree tree;
};

enum class PerturbationKind { relocate_node, inject_popup, rename_label, delay_render };
std::string_view to_string(PerturbationKind k);

// target: node selector ("node_id" or "screen_id/node_id"); for inject_popup
// a screen id or "*" for whichever screen is current.
struct Perturbation {
  PerturbationKind kind = PerturbationKind::relocate_node;
  std::string target;
  int trigger_step = 0;
  nlohmann::json params = nlohmann::json::object();
};
Perturbation perturbation_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const Perturbation& p);

struct StepOutcome {
  bool ok = false;
  std::string message;
  std::vector<SystemEvent> events;
};

struct WorldDefinition;   // immutable parsed world JSON, shared between copies

// Deterministic simulated device. Copyable: a copy is an independent snapshot.
class World {
 public:
  const std::string& name() const;
  const std::string& current_screen() const { return current_screen_; }
  const std::string& home_screen() const;
  Size pixel_size() const;
  std::uint64_t seed() const { return seed_; }
  int clock() const { return clock_; }
  bool terminated() const { return terminated_; }
  const std::optional<std::string>& terminate_payload() const { return terminate_payload_; }
  bool has_screen(const std::string& id) const;
  std::vector<std::string> screen_ids() const;
  const std::map<std::string, std::string>& app_registry() const;

  // Current value of a state variable ("" when unset) and list contents.
  std::string var(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;
  const std::deque<SystemEvent>& event_queue() const { return events_; }
  std::vector<SystemEvent> drain_events();

  // Moves the step clock forward to `step`; perturbations whose trigger step
  // has been reached are applied here, each exactly once.
  void begin_step(int step);

  Observation observe();

  // Throws WorldError when called after terminate.
  StepOutcome apply_action(const Action& action);

  // Validates the selector now; the mutation lands at its trigger step.
  void inject_perturbation(const Perturbation& p);

  void set_current_screen(const std::string& screen_id);

  // Everything except the clock, the event queue and render caches. Used by
  // tests to assert no-op safety.
  nlohmann::json state_snapshot() const;

  struct Render;

 private:
  friend World load_world(const nlohmann::json&, std::uint64_t);

  World() = default;

  Render render() const;
  void invalidate();
  void apply_due_perturbations();
  void apply_perturbation(const Perturbation& p);
  void goto_screen(const std::string& id, bool push_history);
  void dismiss_popup(std::vector<SystemEvent>& events, const std::string& reason);
  std::string resolve(const std::string& templ, const std::map<std::string, std::string>& locals) const;
  void emit(EventKind kind, std::string payload, std::vector<SystemEvent>& out);

  struct Popup {
    std::string title;
    std::string message;
    std::string button;
    Rect bounds;
  };
  struct Scheduled {
    Perturbation perturbation;
    bool applied = false;
  };

  std::shared_ptr<const WorldDefinition> def_;
  struct NodeOverride {
    std::optional<Rect> bounds;
    std::optional<std::string> text;
  };

  // Perturbation edits, keyed "screen_id/node_id".
  std::map<std::string, NodeOverride> overrides_;
  std::string current_screen_;
  std::vector<std::string> back_stack_;
  std::map<std::string, std::string> vars_;
  std::map<std::string, std::vector<std::string>> lists_;
  int scroll_offset_ = 0;
  std::optional<Popup> popup_;
  std::vector<Scheduled> scheduled_;
  std::map<std::string, int> render_delay_;
  std::deque<SystemEvent> events_;
  int clock_ = 0;
  bool terminated_ = false;
  std::optional<std::string> terminate_payload_;
  std::uint64_t seed_ = 0;
  std::shared_ptr<const Render> last_render_;
};

// Parses and validates an "adec-world/1" document. The seed drives layout
// shuffles of nodes that declare a shuffle group.
World load_world(const nlohmann::json& spec, std::uint64_t seed = 0);
World load_world_file(const std::filesystem::path& path, std::uint64_t seed = 0);

// Free-function spellings of the World members, for callers that prefer them.
inline Observation observe(World& w) { return w.observe(); }
inline StepOutcome apply_action(World& w, const Action& a) { return w.apply_action(a); }
World& inject_perturbation(World& w, const Perturbation& p);

// "screen_id | first three visible texts": the textual state summary Q_t.
std::string summarize(const VisualState& v, std::size_t max_texts = 3);

}  // namespace adec::sim
