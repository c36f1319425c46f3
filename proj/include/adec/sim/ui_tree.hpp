#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace adec::sim {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

struct Size {
  int width = 0;
  int height = 0;
  bool operator==(const Size&) const = default;
};

// Absolute pixel rectangle; right/bottom are exclusive.
struct Rect {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  bool valid() const { return left >= 0 && top >= 0 && left < right && top < bottom; }
  Point centroid() const { return {(left + right) / 2.0, (top + bottom) / 2.0}; }
  Rect shifted(int dx, int dy) const { return {left + dx, top + dy, right + dx, bottom + dy}; }
  bool operator==(const Rect&) const = default;
};

// One element of the textual view hierarchy. Nodes live in a flat pre-order
// arena owned by UiTree; `index` equals the node's position in that arena.
struct UiNode {
  int index = -1;
  int parent = -1;
  std::vector<int> children;

  // Stable identity across observations (the world file's node id; repeated
  // list rows carry "<template id>#<row>").
  std::string resource_id;
  std::string class_name;
  std::string text;
  std::string content_desc;
  Rect bounds;
  bool interactable = false;
  bool editable = false;

  bool operator==(const UiNode&) const = default;
};

// Builder-side node: nested, index-free. UiTree flattens these.
struct NodeDraft {
  std::string resource_id;
  std::string class_name;
  std::string text;
  std::string content_desc;
  Rect bounds;
  bool interactable = false;
  bool editable = false;
  std::vector<NodeDraft> children;
};

// The observed hierarchy: an ordered list of windows (a popup window comes
// first), indexed densely 0..N-1 in pre-order across all windows.
class UiTree {
 public:
  UiTree() = default;
  UiTree(const std::vector<NodeDraft>& windows, Size screen);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<UiNode>& nodes() const { return nodes_; }
  const std::vector<int>& roots() const { return roots_; }
  const UiNode& at(int index) const;
  bool contains(int index) const { return index >= 0 && static_cast<std::size_t>(index) < nodes_.size(); }
  Size screen() const { return screen_; }

  // First node whose resource id matches exactly, or -1.
  int find_by_resource_id(const std::string& id) const;

  // Centroid normalized by the screen size, clamped to [0,1]^2.
  Point normalized_centroid(int index) const;

  bool operator==(const UiTree&) const = default;

 private:
  int append(const NodeDraft& draft, int parent);

  std::vector<UiNode> nodes_;
  std::vector<int> roots_;
  Size screen_;
};

nlohmann::json to_json(const UiTree& tree);
nlohmann::json to_json(const Rect& r);

}  // namespace adec::sim
