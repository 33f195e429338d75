#pragma once

#include "ccmon/formula.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ccmon {

enum class NodeStatus { Interior, Ticked, Crossed };

/// Rule that produced a node's children, or the reason it is a leaf.
enum class TableauRule {
  None,
  And,
  Or,
  Globally,
  Eventually,
  Until,
  Dist,
  DeMorgan,
  Next,
  // leaf reasons
  Loop,
  Done,
  Contradiction,
  Prune,
};

std::string_view to_string(TableauRule r) noexcept;

struct LabelEntry {
  Formula formula;
  /// Set when this entry fulfils an eventuality (the F or U that produced it).
  std::optional<Formula> fulfils;
};

struct TableauNode {
  std::size_t id = 0;
  std::optional<std::size_t> parent;
  std::vector<LabelEntry> label;
  std::vector<std::size_t> children;
  NodeStatus status = NodeStatus::Interior;
  TableauRule rule = TableauRule::None;
  bool poised = false;
  /// For LOOP leaves: the earlier poised node with the same Next formulas.
  std::optional<std::size_t> loop_target;

  std::vector<Formula> formulas() const;
};

struct Branch {
  /// Node ids from the root to the leaf.
  std::vector<std::size_t> nodes;
  NodeStatus outcome = NodeStatus::Interior;
};

struct TableauOptions {
  /// Guard against runaway construction.
  std::size_t max_nodes = 200000;
};

class Tableau {
 public:
  const TableauNode& root() const { return nodes_.front(); }
  const TableauNode& node(std::size_t id) const { return nodes_.at(id); }
  const std::vector<TableauNode>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Root-to-leaf paths, left to right.
  std::vector<Branch> branches() const;
  std::vector<Branch> ticked_branches() const;

 private:
  friend Tableau build_tableau(const Formula& f, const TableauOptions& options);
  std::vector<TableauNode> nodes_;
};

Tableau build_tableau(const Formula& f, const TableauOptions& options = {});

/// Distributes a QDep over the connectives of its left operand, recursively.
/// Anything else is returned unchanged.
Formula apply_dist(const Formula& f);

/// Last poised label of a ticked branch without its Next formulas. Entries
/// that fulfil an eventuality are reported as that eventuality.
std::vector<Formula> terminal_node(const Tableau& t, const Branch& b);

std::string export_dot(const Tableau& t);

}  // namespace ccmon
