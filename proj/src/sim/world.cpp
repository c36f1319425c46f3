#include "adec/sim/world.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>

#include "adec/error.hpp"
#include "adec/sim/json_util.hpp"

namespace adec::sim {

using nlohmann::json;
namespace ju = json_util;

// ---------------------------------------------------------------------------
// Parsed world definition

namespace {

struct NodeSpec {
  std::string id;
  std::string class_name = "View";
  std::string text;
  std::string desc;
  Rect bounds;
  bool interactable = false;
  bool editable = false;
  std::string widget;   // "field:<var>" or "toggle:<var>"
  bool fixed = false;   // ignores scrolling (toolbars)
  std::string shuffle;  // seed-driven layout group
  std::vector<NodeSpec> children;
  // List-backed container: one instance of *row per list item.
  std::string repeat;
  std::shared_ptr<NodeSpec> row;
  int row_height = 0;
};

struct ScreenSpec {
  std::string id;
  std::string app;
  bool scrollable = false;
  NodeSpec root;
};

struct ActionPattern {
  ActionType type = ActionType::click;
  std::string target;  // glob over node id
  std::string text;    // glob over rendered node text
  std::optional<Direction> direction;
};

struct Effect {
  enum class Op { go, set, append, remove, toggle, clear, emit, back };
  Op op = Op::go;
  std::string key;
  std::string value;
  EventKind event = EventKind::toast;
};

struct Transition {
  std::string screen;
  ActionPattern on;
  std::optional<Predicate> when;
  std::vector<Effect> effects;
};

}  // namespace

struct WorldDefinition {
  std::string name;
  Size pixel_size{1080, 2400};
  std::string initial_screen;
  std::string home_screen;
  std::string app_drawer_screen;
  std::string quick_settings_screen;
  std::map<std::string, std::string> apps;
  std::map<std::string, std::string> vars;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, ScreenSpec> screens;
  std::vector<Transition> transitions;
};

// One rendered frame plus what the world needs to interpret actions on it.
struct World::Render {
  struct Meta {
    std::string node_id;
    std::string widget;
    std::map<std::string, std::string> locals;
    bool popup_button = false;
    bool in_dialog = false;
    bool clickable = false;  // affordance before any dialog blocking
  };
  UiTree tree;
  VisualState visual;
  std::vector<Meta> meta;  // parallel to tree.nodes()
  int content_bottom = 0;
};

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool glob_match(const std::string& pattern, const std::string& s) {
  if (pattern.empty()) return true;
  return fnmatch(pattern.c_str(), s.c_str(), 0) == 0;
}

std::string base_id(const std::string& id) {
  const auto hash = id.find('#');
  return hash == std::string::npos ? id : id.substr(0, hash);
}

Rect parse_rect(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) throw ParseError(path, "bounds must be [left, top, right, bottom]");
  int v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number_integer()) throw ParseError(ju::child(path, i), "expected an integer");
    v[i] = j[i].get<int>();
  }
  Rect r{v[0], v[1], v[2], v[3]};
  if (!r.valid()) throw ParseError(path, "bounds must satisfy 0 <= left < right and 0 <= top < bottom");
  return r;
}

NodeSpec parse_node(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "node must be an object");
  NodeSpec n;
  n.id = ju::require_string(j, "id", path);
  if (n.id.empty() || n.id.find('#') != std::string::npos || n.id.find('/') != std::string::npos) {
    throw ParseError(ju::child(path, "id"), "node id must be non-empty and free of '#' and '/'");
  }
  n.class_name = ju::optional_string(j, "class", path, "View");
  n.text = ju::optional_string(j, "text", path);
  n.desc = ju::optional_string(j, "desc", path);
  n.bounds = parse_rect(ju::require(j, "bounds", path), ju::child(path, "bounds"));
  n.interactable = ju::optional_bool(j, "interactable", path, false);
  n.editable = ju::optional_bool(j, "editable", path, false);
  n.widget = ju::optional_string(j, "widget", path);
  if (!n.widget.empty() && n.widget.rfind("field:", 0) != 0 && n.widget.rfind("toggle:", 0) != 0) {
    throw ParseError(ju::child(path, "widget"), "widget must be \"field:<var>\" or \"toggle:<var>\"");
  }
  n.fixed = ju::optional_bool(j, "fixed", path, false);
  n.shuffle = ju::optional_string(j, "shuffle", path);
  if (j.contains("children")) {
    const auto& arr = ju::require_array(j, "children", path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      n.children.push_back(parse_node(arr[i], ju::child(ju::child(path, "children"), i)));
    }
  }
  if (j.contains("repeat")) {
    n.repeat = ju::require_string(j, "repeat", path);
    n.row = std::make_shared<NodeSpec>(parse_node(ju::require(j, "row", path), ju::child(path, "row")));
    n.row_height = static_cast<int>(
        ju::optional_int(j, "row_height", path, n.row->bounds.bottom - n.row->bounds.top));
    if (n.row_height <= 0) throw ParseError(ju::child(path, "row_height"), "must be positive");
  }
  return n;
}

EventKind parse_event_kind(const std::string& s, const std::string& path) {
  if (s == "toast") return EventKind::toast;
  if (s == "notification") return EventKind::notification;
  if (s == "dialog_dismissed") return EventKind::dialog_dismissed;
  throw ParseError(path, "unknown event kind \"" + s + "\"");
}

Effect parse_effect(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "effect must be an object");
  Effect e;
  if (j.contains("goto")) {
    e.op = Effect::Op::go;
    e.key = ju::require_string(j, "goto", path);
  } else if (j.contains("set")) {
    e.op = Effect::Op::set;
    e.key = ju::require_string(j, "set", path);
    e.value = ju::require_string(j, "value", path);
  } else if (j.contains("append")) {
    e.op = Effect::Op::append;
    e.key = ju::require_string(j, "append", path);
    e.value = ju::require_string(j, "value", path);
  } else if (j.contains("remove")) {
    e.op = Effect::Op::remove;
    e.key = ju::require_string(j, "remove", path);
    e.value = ju::require_string(j, "value", path);
  } else if (j.contains("toggle")) {
    e.op = Effect::Op::toggle;
    e.key = ju::require_string(j, "toggle", path);
  } else if (j.contains("clear")) {
    e.op = Effect::Op::clear;
    e.key = ju::require_string(j, "clear", path);
  } else if (j.contains("emit")) {
    e.op = Effect::Op::emit;
    e.event = parse_event_kind(ju::require_string(j, "emit", path), ju::child(path, "emit"));
    e.value = ju::require_string(j, "payload", path);
    if (e.event == EventKind::toast && e.value.empty()) {
      throw ParseError(ju::child(path, "payload"), "a toast needs a non-empty payload");
    }
  } else if (j.contains("back")) {
    e.op = Effect::Op::back;
  } else {
    throw ParseError(path, "unknown effect");
  }
  return e;
}

ActionPattern parse_pattern(const json& j, const std::string& path) {
  ActionPattern p;
  const auto type = parse_action_type(ju::require_string(j, "type", path));
  if (!type) throw ParseError(ju::child(path, "type"), "unknown action type");
  p.type = *type;
  p.target = ju::optional_string(j, "target", path);
  p.text = ju::optional_string(j, "text", path);
  if (j.contains("direction")) {
    p.direction = parse_direction(ju::require_string(j, "direction", path));
    if (!p.direction) throw ParseError(ju::child(path, "direction"), "unknown direction");
  }
  return p;
}

bool spec_has_node(const NodeSpec& n, const std::string& id) {
  if (n.id == id) return true;
  for (const auto& c : n.children) {
    if (spec_has_node(c, id)) return true;
  }
  return n.row && spec_has_node(*n.row, id);
}

void collect_shuffle(const NodeSpec& n, std::map<std::string, std::vector<const NodeSpec*>>& groups) {
  if (!n.shuffle.empty()) groups[n.shuffle].push_back(&n);
  for (const auto& c : n.children) collect_shuffle(c, groups);
}

std::string resolve_template(const std::string& templ, const std::map<std::string, std::string>& locals,
                             const std::map<std::string, std::string>& vars) {
  std::string s = templ;
  // innermost first: the first '}' closes the last "${" before it
  for (int guard = 0; guard < 64; ++guard) {
    const auto close = s.find('}');
    if (close == std::string::npos) break;
    const auto open = s.rfind("${", close);
    if (open == std::string::npos) break;
    const std::string key = s.substr(open + 2, close - open - 2);
    std::string value;
    if (auto it = locals.find(key); it != locals.end()) {
      value = it->second;
    } else if (auto v = vars.find(key); v != vars.end()) {
      value = v->second;
    }
    s.replace(open, close - open + 1, value);
  }
  return s;
}

}  // namespace

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::toast:
      return "toast";
    case EventKind::notification:
      return "notification";
    case EventKind::dialog_dismissed:
      return "dialog_dismissed";
  }
  return "unknown";
}

json to_json(const SystemEvent& e) {
  return {{"kind", std::string(to_string(e.kind))}, {"payload", e.payload}, {"step", e.step_emitted}};
}

SystemEvent event_from_json(const json& j) {
  SystemEvent e;
  e.kind = parse_event_kind(ju::require_string(j, "kind", ""), "/kind");
  e.payload = ju::optional_string(j, "payload", "");
  e.step_emitted = static_cast<int>(ju::optional_int(j, "step", "", 0));
  return e;
}

json to_json(const VisualState& v) {
  auto elements = json::array();
  for (const auto& e : v.elements) {
    json el = {{"text", e.text}, {"label", e.label}, {"bounds", to_json(e.bounds)}, {"clickable", e.clickable}};
    if (e.in_dialog) el["in_dialog"] = true;
    if (!e.widget.empty()) el["widget"] = e.widget;
    if (!e.context.empty()) el["context"] = e.context;
    elements.push_back(std::move(el));
  }
  return {{"screen_id", v.screen_id},
          {"app_name", v.app_name},
          {"on_home", v.on_home},
          {"visible_texts", v.visible_texts},
          {"widget_states", v.widget_states},
          {"pixel_size", {v.pixel_size.width, v.pixel_size.height}},
          {"dialog_open", v.dialog_open},
          {"can_scroll_down", v.can_scroll_down},
          {"elements", elements}};
}

std::string_view to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::relocate_node:
      return "relocate_node";
    case PerturbationKind::inject_popup:
      return "inject_popup";
    case PerturbationKind::rename_label:
      return "rename_label";
    case PerturbationKind::delay_render:
      return "delay_render";
  }
  return "unknown";
}

Perturbation perturbation_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "perturbation must be an object");
  Perturbation p;
  const auto kind = ju::require_string(j, "kind", path);
  if (kind == "relocate_node") {
    p.kind = PerturbationKind::relocate_node;
  } else if (kind == "inject_popup") {
    p.kind = PerturbationKind::inject_popup;
  } else if (kind == "rename_label") {
    p.kind = PerturbationKind::rename_label;
  } else if (kind == "delay_render") {
    p.kind = PerturbationKind::delay_render;
  } else {
    throw ParseError(ju::child(path, "kind"), "unknown perturbation kind \"" + kind + "\"");
  }
  p.target = ju::require_string(j, "target", path);
  p.trigger_step = static_cast<int>(ju::optional_int(j, "trigger_step", path, 0));
  if (p.trigger_step < 0) throw ParseError(ju::child(path, "trigger_step"), "must be >= 0");
  if (j.contains("params")) {
    p.params = j["params"];
    if (!p.params.is_object()) throw ParseError(ju::child(path, "params"), "expected an object");
  }
  return p;
}

json to_json(const Perturbation& p) {
  return {{"kind", std::string(to_string(p.kind))},
          {"target", p.target},
          {"trigger_step", p.trigger_step},
          {"params", p.params}};
}

// ---------------------------------------------------------------------------
// Loading

World load_world(const json& spec, std::uint64_t seed) {
  ju::require_schema(spec, kWorldSchema);
  auto def = std::make_shared<WorldDefinition>();
  def->name = ju::optional_string(spec, "name", "", "world");
  if (spec.contains("pixel_size")) {
    const auto& ps = spec["pixel_size"];
    if (!ps.is_array() || ps.size() != 2 || !ps[0].is_number_integer() || !ps[1].is_number_integer() ||
        ps[0].get<int>() <= 0 || ps[1].get<int>() <= 0) {
      throw ParseError("/pixel_size", "expected [width, height] positive integers");
    }
    def->pixel_size = {ps[0].get<int>(), ps[1].get<int>()};
  }

  const auto& screens = ju::require(spec, "screens", "");
  if (!screens.is_object() || screens.empty()) throw ParseError("/screens", "expected a non-empty object");
  for (const auto& [id, sj] : screens.items()) {
    const std::string path = "/screens/" + id;
    if (!sj.is_object()) throw ParseError(path, "screen must be an object");
    ScreenSpec s;
    s.id = id;
    s.app = ju::optional_string(sj, "app", path);
    s.scrollable = ju::optional_bool(sj, "scrollable", path, false);
    s.root = parse_node(ju::require(sj, "root", path), path + "/root");
    def->screens.emplace(id, std::move(s));
  }

  auto known = [&](const std::string& id) { return def->screens.count(id) > 0; };

  def->initial_screen = ju::require_string(spec, "initial_screen", "");
  def->home_screen = ju::optional_string(spec, "home_screen", "", def->initial_screen);
  def->app_drawer_screen = ju::optional_string(spec, "app_drawer_screen", "");
  def->quick_settings_screen = ju::optional_string(spec, "quick_settings_screen", "");
  for (const auto& [field, value] : {std::pair{"initial_screen", def->initial_screen},
                                     std::pair{"home_screen", def->home_screen},
                                     std::pair{"app_drawer_screen", def->app_drawer_screen},
                                     std::pair{"quick_settings_screen", def->quick_settings_screen}}) {
    if (!value.empty() && !known(value)) {
      throw ValidationError(std::string("/") + field + ": unknown screen \"" + value + "\"");
    }
  }

  if (spec.contains("apps")) {
    const auto& apps = spec["apps"];
    if (!apps.is_object()) throw ParseError("/apps", "expected an object of app name -> entry screen");
    for (const auto& [app, entry] : apps.items()) {
      if (!entry.is_string()) throw ParseError("/apps/" + app, "expected a screen id");
      if (!known(entry.get<std::string>())) {
        throw ValidationError("/apps/" + app + ": unknown screen \"" + entry.get<std::string>() + "\"");
      }
      def->apps[app] = entry.get<std::string>();
    }
  }
  if (spec.contains("state")) {
    const auto& st = spec["state"];
    if (!st.is_object()) throw ParseError("/state", "expected an object");
    for (const auto& [k, v] : st.items()) {
      if (!v.is_string()) throw ParseError("/state/" + k, "expected a string");
      def->vars[k] = v.get<std::string>();
    }
  }
  if (spec.contains("lists")) {
    const auto& ls = spec["lists"];
    if (!ls.is_object()) throw ParseError("/lists", "expected an object");
    for (const auto& [k, v] : ls.items()) {
      if (!v.is_array()) throw ParseError("/lists/" + k, "expected an array of strings");
      auto& out = def->lists[k];
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) throw ParseError("/lists/" + k + "/" + std::to_string(i), "expected a string");
        out.push_back(v[i].get<std::string>());
      }
    }
  }

  if (spec.contains("transitions")) {
    const auto& arr = ju::require_array(spec, "transitions", "");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "/transitions/" + std::to_string(i);
      const auto& tj = arr[i];
      Transition t;
      t.screen = ju::require_string(tj, "screen", path);
      if (!known(t.screen)) throw ValidationError(path + "/screen: unknown screen \"" + t.screen + "\"");
      t.on = parse_pattern(ju::require(tj, "on", path), path + "/on");
      if (tj.contains("when")) t.when = predicate_from_json(tj["when"], path + "/when");
      const auto& effects = ju::require_array(tj, "effects", path);
      for (std::size_t e = 0; e < effects.size(); ++e) {
        const std::string epath = path + "/effects/" + std::to_string(e);
        auto eff = parse_effect(effects[e], epath);
        if (eff.op == Effect::Op::go && !known(eff.key)) {
          throw ValidationError(epath + ": transition to unknown screen \"" + eff.key + "\"");
        }
        t.effects.push_back(std::move(eff));
      }
      def->transitions.push_back(std::move(t));
    }
  }

  World w;
  w.def_ = def;
  w.seed_ = seed;
  w.current_screen_ = def->initial_screen;
  w.vars_ = def->vars;
  w.lists_ = def->lists;

  // Layout shuffles: permute bounds inside each group. Fisher-Yates written
  // out so the permutation does not depend on the standard library vendor.
  std::mt19937_64 rng(seed);
  for (const auto& [sid, screen] : def->screens) {
    std::map<std::string, std::vector<const NodeSpec*>> groups;
    collect_shuffle(screen.root, groups);
    for (const auto& [group, members] : groups) {
      std::vector<Rect> rects;
      for (const auto* m : members) rects.push_back(m->bounds);
      for (std::size_t i = rects.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(rects[i - 1], rects[j]);
      }
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (rects[i] != members[i]->bounds) w.overrides_[sid + "/" + members[i]->id].bounds = rects[i];
      }
    }
  }
  return w;
}

World load_world_file(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open world file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
  return load_world(doc, seed);
}

// ---------------------------------------------------------------------------
// Accessors

const std::string& World::name() const { return def_->name; }
const std::string& World::home_screen() const { return def_->home_screen; }
Size World::pixel_size() const { return def_->pixel_size; }
bool World::has_screen(const std::string& id) const { return def_->screens.count(id) > 0; }
const std::map<std::string, std::string>& World::app_registry() const { return def_->apps; }

std::vector<std::string> World::screen_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : def_->screens) out.push_back(id);
  return out;
}

std::string World::var(const std::string& key) const {
  auto it = vars_.find(key);
  return it == vars_.end() ? std::string{} : it->second;
}

std::vector<std::string> World::list(const std::string& key) const {
  auto it = lists_.find(key);
  return it == lists_.end() ? std::vector<std::string>{} : it->second;
}

std::vector<SystemEvent> World::drain_events() {
  std::vector<SystemEvent> out(events_.begin(), events_.end());
  events_.clear();
  return out;
}

void World::invalidate() { last_render_.reset(); }

void World::set_current_screen(const std::string& screen_id) {
  if (!has_screen(screen_id)) throw ValidationError("unknown screen \"" + screen_id + "\"");
  current_screen_ = screen_id;
  scroll_offset_ = 0;
  invalidate();
}

json World::state_snapshot() const {
  json overrides = json::object();
  for (const auto& [k, o] : overrides_) {
    json e = json::object();
    if (o.bounds) e["bounds"] = to_json(*o.bounds);
    if (o.text) e["text"] = *o.text;
    overrides[k] = e;
  }
  json popup = nullptr;
  if (popup_) popup = {{"title", popup_->title}, {"message", popup_->message}, {"button", popup_->button}};
  auto scheduled = json::array();
  for (const auto& s : scheduled_) scheduled.push_back({{"p", to_json(s.perturbation)}, {"applied", s.applied}});
  return {{"screen", current_screen_},
          {"back_stack", back_stack_},
          {"vars", vars_},
          {"lists", lists_},
          {"scroll", scroll_offset_},
          {"popup", popup},
          {"overrides", overrides},
          {"scheduled", scheduled},
          {"render_delay", render_delay_},
          {"terminated", terminated_},
          {"payload", terminate_payload_ ? json(*terminate_payload_) : json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Rendering

World::Render World::render() const {
  Render r;
  const auto& screen = def_->screens.at(current_screen_);
  const Size px = def_->pixel_size;

  std::vector<NodeDraft> windows;
  std::vector<Render::Meta> meta;  // pre-order, matches UiTree flattening
  int content_bottom = 0;

  if (popup_) {
    NodeDraft frame;
    frame.resource_id = "popup";
    frame.class_name = "FrameLayout";
    frame.bounds = popup_->bounds;
    meta.push_back({"popup", "", {}, false, true, false});
    const int h = popup_->bounds.bottom - popup_->bounds.top;
    NodeDraft title{"popup_title", "TextView", popup_->title, "", {}, false, false, {}};
    title.bounds = {popup_->bounds.left + 40, popup_->bounds.top + 30, popup_->bounds.right - 40,
                    popup_->bounds.top + h / 4};
    NodeDraft message{"popup_message", "TextView", popup_->message, "", {}, false, false, {}};
    message.bounds = {popup_->bounds.left + 40, popup_->bounds.top + h / 4, popup_->bounds.right - 40,
                      popup_->bounds.top + h * 3 / 5};
    NodeDraft button{"popup_button", "Button", popup_->button, "", {}, true, false, {}};
    button.bounds = {popup_->bounds.right - 340, popup_->bounds.bottom - h / 4, popup_->bounds.right - 40,
                     popup_->bounds.bottom - 30};
    frame.children = {title, message, button};
    meta.push_back({"popup_title", "", {}, false, true, false});
    meta.push_back({"popup_message", "", {}, false, true, false});
    meta.push_back({"popup_button", "", {}, true, true, true});
    windows.push_back(std::move(frame));
  }

  // Returns false when the node (and subtree) is dropped from the frame.
  std::function<bool(const NodeSpec&, const std::string&, const std::map<std::string, std::string>&, int,
                     NodeDraft&)>
      build = [&](const NodeSpec& spec, const std::string& suffix,
                  const std::map<std::string, std::string>& locals, int dy, NodeDraft& out) -> bool {
    const std::string id = spec.id + suffix;
    const std::string key = current_screen_ + "/" + id;
    if (auto d = render_delay_.find(key); d != render_delay_.end() && d->second > 0) return false;

    Rect bounds = spec.bounds.shifted(0, dy);
    std::string text = spec.text;
    if (auto o = overrides_.find(key); o != overrides_.end()) {
      if (o->second.bounds) bounds = *o->second.bounds;
      if (o->second.text) text = *o->second.text;
    }
    if (screen.scrollable && !spec.fixed) {
      content_bottom = std::max(content_bottom, bounds.bottom);
      bounds = bounds.shifted(0, -scroll_offset_);
    }
    if (bounds.bottom <= 0) return false;  // scrolled off the top
    if (bounds.top < 0) bounds.top = 0;

    text = resolve_template(text, locals, vars_);
    std::string desc = resolve_template(spec.desc, locals, vars_);
    if (spec.widget.rfind("field:", 0) == 0) {
      const auto value = var(spec.widget.substr(6));
      if (desc.empty()) desc = text;
      if (!value.empty()) text = value;
    }

    const bool on_screen = bounds.top < px.height;
    out.resource_id = id;
    out.class_name = spec.class_name;
    out.text = text;
    out.content_desc = desc;
    out.bounds = bounds;
    out.interactable = spec.interactable && on_screen && !popup_;
    out.editable = spec.editable;
    meta.push_back({id, spec.widget, locals, false, false, spec.interactable && on_screen});

    for (const auto& c : spec.children) {
      NodeDraft child;
      if (build(c, suffix, locals, dy, child)) out.children.push_back(std::move(child));
    }
    if (spec.row) {
      const auto items = list(spec.repeat);
      for (std::size_t i = 0; i < items.size(); ++i) {
        auto row_locals = locals;
        row_locals["item"] = items[i];
        row_locals["row"] = std::to_string(i);
        NodeDraft row;
        if (build(*spec.row, "#" + std::to_string(i), row_locals, dy + static_cast<int>(i) * spec.row_height,
                  row)) {
          out.children.push_back(std::move(row));
        }
      }
    }
    return true;
  };

  NodeDraft root;
  if (build(screen.root, "", {}, 0, root)) windows.push_back(std::move(root));
  r.tree = UiTree(windows, px);
  r.meta = std::move(meta);
  r.content_bottom = content_bottom;

  // Visual view of the same frame.
  VisualState& v = r.visual;
  v.screen_id = current_screen_;
  v.app_name = screen.app;
  v.on_home = current_screen_ == def_->home_screen;
  v.pixel_size = px;
  v.dialog_open = popup_.has_value();
  v.can_scroll_down = screen.scrollable && content_bottom - scroll_offset_ > px.height;
  const auto& nodes = r.tree.nodes();
  for (const auto& n : nodes) {
    const auto& m = r.meta[static_cast<std::size_t>(n.index)];
    if (n.bounds.top >= px.height) continue;
    if (!m.widget.empty()) {
      const auto colon = m.widget.find(':');
      const auto key = m.widget.substr(colon + 1);
      auto value = var(key);
      if (m.widget.rfind("toggle:", 0) == 0 && value.empty()) value = "off";
      v.widget_states[key] = value;
    }
    if (n.text.empty() && n.content_desc.empty()) continue;
    if (!n.text.empty()) v.visible_texts.insert(n.text);
    if (!n.content_desc.empty()) v.visible_texts.insert(n.content_desc);
    VisualElement e;
    e.text = n.text;
    e.label = n.content_desc;
    e.bounds = n.bounds;
    e.in_dialog = m.in_dialog;
    e.clickable = m.clickable;
    e.widget = m.widget;
    if (n.parent >= 0) {
      std::string ctx;
      for (int sib : r.tree.at(n.parent).children) {
        const auto& s = r.tree.at(sib);
        if (sib == n.index || s.text.empty()) continue;
        if (!s.children.empty()) continue;
        const auto& sm = r.meta[static_cast<std::size_t>(sib)];
        if (sm.clickable || !sm.widget.empty()) continue;
        if (!ctx.empty()) ctx += " ";
        ctx += s.text;
      }
      e.context = ctx;
    }
    v.elements.push_back(std::move(e));
  }
  return r;
}

Observation World::observe() {
  auto r = std::make_shared<const Render>(render());
  last_render_ = r;
  for (auto& [key, steps] : render_delay_) {
    if (steps > 0) --steps;
  }
  return {r->visual, r->tree};
}

std::string summarize(const VisualState& v, std::size_t max_texts) {
  std::string out = v.screen_id + " |";
  std::vector<std::string> seen;
  for (const auto& e : v.elements) {
    const std::string& t = e.text.empty() ? e.label : e.text;
    if (t.empty() || std::find(seen.begin(), seen.end(), t) != seen.end()) continue;
    seen.push_back(t);
    if (seen.size() == max_texts) break;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) out += (i == 0 ? " " : ", ") + seen[i];
  return out;
}

// ---------------------------------------------------------------------------
// Perturbations

void World::inject_perturbation(const Perturbation& p) {
  if (p.trigger_step < 0) throw ValidationError("perturbation trigger_step must be >= 0");
  Perturbation resolved = p;
  if (p.kind == PerturbationKind::inject_popup) {
    if (p.target != "*" && !has_screen(p.target)) {
      throw ValidationError("inject_popup: unknown screen \"" + p.target + "\"");
    }
  } else {
    std::string screen, node;
    if (const auto slash = p.target.find('/'); slash != std::string::npos) {
      screen = p.target.substr(0, slash);
      node = p.target.substr(slash + 1);
      if (!has_screen(screen)) throw ValidationError("perturbation: unknown screen \"" + screen + "\"");
      if (!spec_has_node(def_->screens.at(screen).root, base_id(node))) {
        throw ValidationError("perturbation: no node \"" + node + "\" on screen \"" + screen + "\"");
      }
    } else {
      node = p.target;
      for (const auto& [sid, s] : def_->screens) {
        if (spec_has_node(s.root, base_id(node))) {
          screen = sid;
          break;
        }
      }
      if (screen.empty()) throw ValidationError("perturbation: selector \"" + p.target + "\" matches no node");
    }
    resolved.target = screen + "/" + node;
  }
  switch (p.kind) {
    case PerturbationKind::relocate_node:
      parse_rect(p.params.value("bounds", json()), "/params/bounds");
      break;
    case PerturbationKind::rename_label:
      if (!p.params.contains("text") || !p.params["text"].is_string()) {
        throw ValidationError("rename_label needs params.text");
      }
      break;
    case PerturbationKind::delay_render:
      if (!p.params.contains("steps") || !p.params["steps"].is_number_integer() || p.params["steps"].get<int>() < 1) {
        throw ValidationError("delay_render needs params.steps >= 1");
      }
      break;
    case PerturbationKind::inject_popup:
      break;
  }
  scheduled_.push_back({resolved, false});
  apply_due_perturbations();
}

World& inject_perturbation(World& w, const Perturbation& p) {
  w.inject_perturbation(p);
  return w;
}

void World::begin_step(int step) {
  clock_ = step;
  apply_due_perturbations();
}

void World::apply_due_perturbations() {
  for (auto& s : scheduled_) {
    if (s.applied || s.perturbation.trigger_step > clock_) continue;
    const auto& p = s.perturbation;
    if (p.kind == PerturbationKind::inject_popup && p.target != "*" && p.target != current_screen_) continue;
    apply_perturbation(p);
    s.applied = true;
    invalidate();
  }
}

void World::apply_perturbation(const Perturbation& p) {
  switch (p.kind) {
    case PerturbationKind::relocate_node:
      overrides_[p.target].bounds = parse_rect(p.params.at("bounds"), "/params/bounds");
      break;
    case PerturbationKind::rename_label:
      overrides_[p.target].text = p.params.at("text").get<std::string>();
      break;
    case PerturbationKind::delay_render:
      render_delay_[p.target] = p.params.at("steps").get<int>();
      break;
    case PerturbationKind::inject_popup: {
      const Size px = def_->pixel_size;
      Popup pop;
      pop.title = p.params.value("title", "Notice");
      pop.message = p.params.value("message", "");
      pop.button = p.params.value("button", "OK");
      pop.bounds = {px.width / 10, px.height * 7 / 20, px.width * 9 / 10, px.height * 13 / 20};
      popup_ = pop;
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Actions

void World::emit(EventKind kind, std::string payload, std::vector<SystemEvent>& out) {
  SystemEvent e{kind, std::move(payload), clock_};
  events_.push_back(e);
  out.push_back(std::move(e));
}

void World::dismiss_popup(std::vector<SystemEvent>& events, const std::string& reason) {
  if (!popup_) return;
  const std::string title = popup_->title;
  popup_.reset();
  emit(EventKind::dialog_dismissed, title.empty() ? reason : title, events);
}

void World::goto_screen(const std::string& id, bool push_history) {
  if (push_history && id != current_screen_) back_stack_.push_back(current_screen_);
  current_screen_ = id;
  scroll_offset_ = 0;
}

std::string World::resolve(const std::string& templ, const std::map<std::string, std::string>& locals) const {
  return resolve_template(templ, locals, vars_);
}

StepOutcome World::apply_action(const Action& action) {
  if (terminated_) throw WorldError("action " + describe(action) + " after terminate");

  StepOutcome out;
  const auto rendered = last_render_ ? last_render_ : std::make_shared<const Render>(render());
  const Render& r = *rendered;
  const Size px = def_->pixel_size;

  auto fail = [&](std::string msg) {
    out.ok = false;
    out.message = std::move(msg);
    return out;
  };
  auto done = [&](std::string msg = {}) {
    out.ok = true;
    out.message = std::move(msg);
    invalidate();
    return out;
  };

  // Transition lookup shared by every action type.
  auto run_transitions = [&](const std::string* node_id, const std::string& node_text,
                             const std::map<std::string, std::string>& locals) -> bool {
    for (const auto& t : def_->transitions) {
      if (t.screen != current_screen_ || t.on.type != action.type) continue;
      if (node_id) {
        if (!glob_match(t.on.target, *node_id) && !glob_match(t.on.target, base_id(*node_id))) continue;
        if (!glob_match(t.on.text, node_text)) continue;
      }
      if (t.on.direction && *t.on.direction != action.direction) continue;
      if (t.when) {
        PredicateContext ctx;
        ctx.var = [&](const std::string& k) { return var(k); };
        ctx.list = [&](const std::string& k) { return list(k); };
        ctx.screen = current_screen_;
        if (!evaluate(*t.when, ctx)) continue;
      }
      for (const auto& e : t.effects) {
        const auto value = resolve(e.value, locals);
        switch (e.op) {
          case Effect::Op::go:
            goto_screen(e.key, true);
            break;
          case Effect::Op::set:
            vars_[resolve(e.key, locals)] = value;
            break;
          case Effect::Op::append:
            lists_[e.key].push_back(value);
            break;
          case Effect::Op::remove: {
            auto& l = lists_[e.key];
            l.erase(std::remove(l.begin(), l.end(), value), l.end());
            break;
          }
          case Effect::Op::toggle: {
            auto& v = vars_[resolve(e.key, locals)];
            v = v == "on" ? "off" : "on";
            break;
          }
          case Effect::Op::clear:
            vars_.erase(resolve(e.key, locals));
            break;
          case Effect::Op::emit:
            emit(e.event, value, out.events);
            break;
          case Effect::Op::back:
            if (!back_stack_.empty()) {
              current_screen_ = back_stack_.back();
              back_stack_.pop_back();
              scroll_offset_ = 0;
            }
            break;
        }
      }
      return true;
    }
    return false;
  };

  switch (action.type) {
    case ActionType::terminate:
      terminated_ = true;
      terminate_payload_ = action.text;
      return done();

    case ActionType::navigate_home:
      dismiss_popup(out.events, "navigate_home");
      current_screen_ = def_->home_screen;
      back_stack_.clear();
      scroll_offset_ = 0;
      return done();

    case ActionType::navigate_back:
      if (popup_) {
        dismiss_popup(out.events, "navigate_back");
        return done();
      }
      if (run_transitions(nullptr, {}, {})) return done();
      if (back_stack_.empty()) return fail("nothing to go back to");
      current_screen_ = back_stack_.back();
      back_stack_.pop_back();
      scroll_offset_ = 0;
      return done();

    case ActionType::open_app: {
      const auto want = lower(action.app_name);
      for (const auto& [app, entry] : def_->apps) {
        if (lower(app) != want) continue;
        dismiss_popup(out.events, "open_app");
        goto_screen(entry, true);
        return done();
      }
      return fail("unknown app \"" + action.app_name + "\"");
    }

    case ActionType::scroll: {
      if (popup_) return fail("dialog blocks scrolling");
      const bool home = current_screen_ == def_->home_screen;
      if (home && action.direction == Direction::down && !def_->app_drawer_screen.empty()) {
        goto_screen(def_->app_drawer_screen, true);
        return done();
      }
      if (home && action.direction == Direction::up && !def_->quick_settings_screen.empty()) {
        goto_screen(def_->quick_settings_screen, true);
        return done();
      }
      if (run_transitions(nullptr, {}, {})) return done();
      if (def_->screens.at(current_screen_).scrollable) {
        const int max_offset = std::max(0, r.content_bottom - px.height);
        const int step = px.height / 2;
        int next = scroll_offset_;
        if (action.direction == Direction::down) next = std::min(max_offset, scroll_offset_ + step);
        if (action.direction == Direction::up) next = std::max(0, scroll_offset_ - step);
        if (next == scroll_offset_) return fail("cannot scroll " + std::string(to_string(action.direction)));
        scroll_offset_ = next;
        return done();
      }
      return fail("screen does not scroll");
    }

    case ActionType::click:
    case ActionType::long_press:
    case ActionType::input_text:
    case ActionType::swipe: {
      if (!r.tree.contains(action.index)) return fail("non-interactable element");
      const auto& node = r.tree.at(action.index);
      if (!node.interactable) return fail("non-interactable element");
      const auto& m = r.meta[static_cast<std::size_t>(action.index)];
      if (m.popup_button) {
        if (action.type != ActionType::click) return fail("no transition for " + describe(action));
        dismiss_popup(out.events, "button");
        return done();
      }
      auto locals = m.locals;
      locals["target.text"] = node.text;
      locals["input"] = action.text;
      if (run_transitions(&m.node_id, node.text, locals)) return done();
      if (action.type == ActionType::input_text && node.editable && m.widget.rfind("field:", 0) == 0) {
        vars_[m.widget.substr(6)] = action.text;
        return done();
      }
      if (action.type == ActionType::click && m.widget.rfind("toggle:", 0) == 0) {
        auto& v = vars_[m.widget.substr(7)];
        v = v == "on" ? "off" : "on";
        return done();
      }
      const std::string label = node.text.empty() ? node.content_desc : node.text;
      return fail("no transition for " + std::string(to_string(action.type)) + " on '" + label + "'");
    }
  }
  return fail("unsupported action");
}

}  // namespace adec::sim
