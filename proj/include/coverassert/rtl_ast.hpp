#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace coverassert {

// Stable numeric codes (declaration order) feed the path encoding, so new
// kinds may only be appended.
enum class NodeKind : std::uint8_t {
  Module,
  PortList,
  Always,
  Initial,
  Assign,
  If,
  Case,
  Block,
  Statement,
  Expr,
  Identifier,
};

inline constexpr int kNodeKindCount = 11;
inline constexpr std::string_view kAstDumpSchema = "ast-dump/v1";

constexpr int kind_code(NodeKind kind) noexcept { return static_cast<int>(kind); }
std::string_view kind_name(NodeKind kind) noexcept;

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct SyntaxNode {
  NodeKind kind = NodeKind::Statement;
  std::uint32_t depth = 0;
  std::optional<std::uint32_t> parent;
  std::vector<std::uint32_t> children;
  Span span;
  std::string text;  // identifier name; empty for other kinds
};

// One module's syntax tree, stored as an arena; node 0 is the root.
class SyntaxTree {
 public:
  SyntaxTree(std::string file_id, NodeKind root_kind, Span root_span, std::string root_text = {});

  std::uint32_t add_child(std::uint32_t parent, NodeKind kind, Span span, std::string text = {});

  const SyntaxNode& node(std::uint32_t id) const { return nodes_.at(id); }
  const SyntaxNode& root() const { return nodes_.front(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const SyntaxNode> nodes() const noexcept { return nodes_; }
  const std::string& file_id() const noexcept { return file_id_; }

  // Module name for parsed trees; empty for hand-built ones.
  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  std::uint32_t max_depth() const noexcept { return max_depth_; }

 private:
  std::string file_id_;
  std::string name_;
  std::vector<SyntaxNode> nodes_;
  std::uint32_t max_depth_ = 0;
};

struct NodeRef {
  std::uint32_t tree = 0;
  std::uint32_t node = 0;

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

using SignalMap = std::map<std::string, std::vector<NodeRef>, std::less<>>;

// Parsed trees plus the signal-name -> occurrence index. Immutable once built.
class AstIndex {
 public:
  AstIndex() = default;

  // Indexes every Identifier node under its full text and, for hierarchical
  // or scoped names, additionally under the final segment.
  static AstIndex from_trees(std::vector<SyntaxTree> trees);

  std::span<const SyntaxTree> trees() const noexcept { return trees_; }
  const SyntaxTree& tree(std::uint32_t id) const { return trees_.at(id); }
  const SyntaxNode& node(NodeRef ref) const { return trees_.at(ref.tree).node(ref.node); }
  const SignalMap& signal_map() const noexcept { return signal_map_; }

  // Occurrences of `name`; empty when the name is not in any tree.
  std::span<const NodeRef> find(std::string_view name) const;

  std::uint32_t max_depth() const noexcept { return max_depth_; }

 private:
  std::vector<SyntaxTree> trees_;
  SignalMap signal_map_;
  std::uint32_t max_depth_ = 0;
};

struct SourceFile {
  std::string file_id;
  std::string text;
};

// One tree per module declaration. Throws EmptyInput / UnparsableSource.
AstIndex parse_rtl(std::span<const SourceFile> sources);

// Root-to-node inclusive path.
std::vector<NodeRef> node_path(const AstIndex& index, NodeRef ref);

nlohmann::json dump_ast(const AstIndex& index);

}  // namespace coverassert
