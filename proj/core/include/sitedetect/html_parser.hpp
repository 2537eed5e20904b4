#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sitedetect::html {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

struct Node {
  enum class Kind : std::uint8_t { kElement, kText };
  Kind kind = Kind::kElement;
  std::string tag;   // lowercase; "#document" for the root
  std::string text;  // UTF-8, entities decoded (text nodes only)
  std::vector<std::pair<std::string, std::string>> attributes;
  NodeId parent = kNoNode;
  std::vector<NodeId> children;

  bool is_element() const { return kind == Kind::kElement; }
  const std::string* attribute(std::string_view name) const;
};

// Forgiving HTML tree. Nesting deeper than kMaxDepth is flattened into the
// deepest allowed element, so traversals may recurse safely.
class Document {
 public:
  static constexpr std::size_t kMaxDepth = 256;

  // `utf8` must already be valid UTF-8.
  static Document parse(std::string_view utf8);

  NodeId root() const { return 0; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // First element with the given tag in document order.
  std::optional<NodeId> find_first(std::string_view tag) const;

 private:
  friend class TreeBuilder;
  std::vector<Node> nodes_;
};

// Decodes character references (&amp; &#233; &#x20AC; ...) in UTF-8 text.
std::string decode_entities(std::string_view text);

// Void elements never take children.
bool is_void_element(std::string_view tag);

}  // namespace sitedetect::html
