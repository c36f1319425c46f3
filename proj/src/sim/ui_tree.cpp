#include "adec/sim/ui_tree.hpp"

#include <algorithm>
#include <stdexcept>

namespace adec::sim {

UiTree::UiTree(const std::vector<NodeDraft>& windows, Size screen) : screen_(screen) {
  for (const auto& w : windows) roots_.push_back(append(w, -1));
}

int UiTree::append(const NodeDraft& draft, int parent) {
  const int index = static_cast<int>(nodes_.size());
  UiNode node;
  node.index = index;
  node.parent = parent;
  node.resource_id = draft.resource_id;
  node.class_name = draft.class_name;
  node.text = draft.text;
  node.content_desc = draft.content_desc;
  node.bounds = draft.bounds;
  node.interactable = draft.interactable;
  node.editable = draft.editable;
  nodes_.push_back(std::move(node));
  for (const auto& c : draft.children) {
    const int child = append(c, index);
    nodes_[index].children.push_back(child);
  }
  return index;
}

const UiNode& UiTree::at(int index) const {
  if (!contains(index)) throw std::out_of_range("ui node index " + std::to_string(index));
  return nodes_[static_cast<std::size_t>(index)];
}

int UiTree::find_by_resource_id(const std::string& id) const {
  for (const auto& n : nodes_) {
    if (n.resource_id == id) return n.index;
  }
  return -1;
}

Point UiTree::normalized_centroid(int index) const {
  const Point c = at(index).bounds.centroid();
  const double w = screen_.width > 0 ? screen_.width : 1.0;
  const double h = screen_.height > 0 ? screen_.height : 1.0;
  return {std::clamp(c.x / w, 0.0, 1.0), std::clamp(c.y / h, 0.0, 1.0)};
}

nlohmann::json to_json(const Rect& r) { return nlohmann::json::array({r.left, r.top, r.right, r.bottom}); }

nlohmann::json to_json(const UiTree& tree) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes()) {
    nodes.push_back({{"index", n.index},
                     {"parent", n.parent},
                     {"id", n.resource_id},
                     {"class", n.class_name},
                     {"text", n.text},
                     {"desc", n.content_desc},
                     {"bounds", to_json(n.bounds)},
                     {"interactable", n.interactable},
                     {"editable", n.editable}});
  }
  return {{"screen", {tree.screen().width, tree.screen().height}}, {"nodes", nodes}};
}

}  // namespace adec::sim
