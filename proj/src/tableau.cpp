#include "ccmon/tableau.hpp"

#include <algorithm>
#include <iterator>
#include <set>
#include <sstream>

namespace ccmon {

std::string_view to_string(TableauRule r) noexcept {
  switch (r) {
    case TableauRule::None: return "";
    case TableauRule::And: return "AND";
    case TableauRule::Or: return "OR";
    case TableauRule::Globally: return "G";
    case TableauRule::Eventually: return "F";
    case TableauRule::Until: return "U";
    case TableauRule::Dist: return "DIST";
    case TableauRule::DeMorgan: return "NOT";
    case TableauRule::Next: return "X";
    case TableauRule::Loop: return "LOOP";
    case TableauRule::Done: return "DONE";
    case TableauRule::Contradiction: return "CONTRADICTION";
    case TableauRule::Prune: return "PRUNE";
  }
  return "?";
}

std::vector<Formula> TableauNode::formulas() const {
  std::vector<Formula> out;
  for (const LabelEntry& e : label) out.push_back(e.formula);
  return out;
}

Formula apply_dist(const Formula& f) {
  if (!f.is(Kind::QDep)) return f;
  const Formula& l = f.lhs();
  if (l.is(Kind::And))
    return Formula::conj(apply_dist(Formula::qdep(l.lhs(), f.rhs(), f.bound())),
                         apply_dist(Formula::qdep(l.rhs(), f.rhs(), f.bound())));
  if (l.is(Kind::Or))
    return Formula::disj(apply_dist(Formula::qdep(l.lhs(), f.rhs(), f.bound())),
                         apply_dist(Formula::qdep(l.rhs(), f.rhs(), f.bound())));
  return f;
}

namespace {

bool is_literal(const Formula& f) {
  switch (f.kind()) {
    case Kind::Atom:
    case Kind::Budget: return true;
    case Kind::QDep: return !f.lhs().is(Kind::And) && !f.lhs().is(Kind::Or);
    case Kind::Not: {
      const Kind k = f.lhs().kind();
      return k == Kind::Atom || k == Kind::QDep || k == Kind::Budget;
    }
    default: return false;
  }
}

bool is_eventuality(const Formula& f) { return f.is(Kind::Eventually) || f.is(Kind::Until); }

using FormulaSet = std::set<Formula>;

FormulaSet formula_set(const TableauNode& n) {
  FormulaSet s;
  for (const LabelEntry& e : n.label) s.insert(e.formula);
  return s;
}

// Eventualities a label still owes, directly or after one step.
FormulaSet pending(const TableauNode& n) {
  FormulaSet s;
  for (const LabelEntry& e : n.label) {
    if (is_eventuality(e.formula)) s.insert(e.formula);
    if (e.formula.is(Kind::Next) && is_eventuality(e.formula.lhs())) s.insert(e.formula.lhs());
  }
  return s;
}

bool holds(const std::vector<LabelEntry>& label, const Formula& f) {
  return f.is(Kind::True) ||
         std::any_of(label.begin(), label.end(), [&](const LabelEntry& e) { return e.formula == f; });
}

void append(std::vector<LabelEntry>& label, LabelEntry e) {
  if (e.formula.is(Kind::True)) return;
  for (LabelEntry& x : label)
    if (x.formula == e.formula) {
      if (!x.fulfils && e.fulfils) x.fulfils = e.fulfils;
      return;
    }
  label.push_back(std::move(e));
}

std::vector<LabelEntry> replace_at(const std::vector<LabelEntry>& label, std::size_t i,
                                   const std::vector<LabelEntry>& with) {
  std::vector<LabelEntry> out;
  for (std::size_t k = 0; k < label.size(); ++k) {
    if (k == i)
      for (const LabelEntry& w : with) append(out, w);
    else
      append(out, label[k]);
  }
  return out;
}

class Builder {
 public:
  Builder(std::vector<TableauNode>& nodes, const TableauOptions& opt) : nodes_(nodes), opt_(opt) {}

  void run(const Formula& f) {
    TableauNode root;
    append(root.label, {f, std::nullopt});
    add(std::move(root));
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const std::size_t id = stack.back();
      stack.pop_back();
      expand(id);
      const auto& kids = nodes_[id].children;
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
  }

 private:
  // Sorted label contents and tags, computed once per node. `step` is the
  // sorted Next part alone: it fixes everything after the time step.
  struct Info {
    std::vector<Formula> key;
    std::size_t hash = 0;
    std::vector<Formula> step;
    std::size_t step_hash = 0;
    std::vector<Formula> tags;
  };

  std::size_t add(TableauNode n) {
    if (nodes_.size() >= opt_.max_nodes) throw Error("tableau exceeds node limit");
    n.id = nodes_.size();
    Info info;
    for (const LabelEntry& e : n.label) {
      info.key.push_back(e.formula);
      if (e.formula.is(Kind::Next)) info.step.push_back(e.formula);
      if (e.fulfils) info.tags.push_back(*e.fulfils);
    }
    std::sort(info.key.begin(), info.key.end());
    for (const Formula& f : info.key) info.hash = info.hash * 1000003ULL + f.hash();
    std::sort(info.step.begin(), info.step.end());
    for (const Formula& f : info.step) info.step_hash = info.step_hash * 1000003ULL + f.hash();
    info_.push_back(std::move(info));
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

  bool same_label(std::size_t a, std::size_t b) const {
    return info_[a].hash == info_[b].hash && info_[a].key == info_[b].key;
  }

  bool same_step(std::size_t a, std::size_t b) const {
    return info_[a].step_hash == info_[b].step_hash && info_[a].step == info_[b].step;
  }

  void child(std::size_t parent, std::vector<LabelEntry> label) {
    TableauNode c;
    c.parent = parent;
    c.label = std::move(label);
    const std::size_t id = add(std::move(c));
    nodes_[parent].children.push_back(id);
  }

  std::vector<std::size_t> ancestors(std::size_t id) const {
    std::vector<std::size_t> path;
    for (std::optional<std::size_t> k = nodes_[id].parent; k; k = nodes_[*k].parent) path.push_back(*k);
    std::reverse(path.begin(), path.end());
    return path;
  }

  // Eventualities fulfilled at nodes in (from, to] along `path`+to.
  FormulaSet fulfilled(const std::vector<std::size_t>& path, std::size_t from_pos, std::size_t to_id) const {
    FormulaSet s;
    auto take = [&](std::size_t id) { s.insert(info_[id].tags.begin(), info_[id].tags.end()); };
    for (std::size_t k = from_pos + 1; k < path.size(); ++k) take(path[k]);
    take(to_id);
    return s;
  }

  void leaf(std::size_t id, NodeStatus s, TableauRule why) {
    nodes_[id].status = s;
    nodes_[id].rule = why;
  }

  bool contradictory(const TableauNode& n) const {
    FormulaSet s = formula_set(n);
    if (s.count(Formula::bottom())) return true;
    for (const Formula& f : s)
      if (is_literal(f) && s.count(negate(f))) return true;
    return false;
  }

  void expand(std::size_t id) {
    TableauNode& n = nodes_[id];
    if (contradictory(n)) return leaf(id, NodeStatus::Crossed, TableauRule::Contradiction);

    const auto path = ancestors(id);
    if (n.parent && nodes_[*n.parent].rule == TableauRule::Next && repeats_without_progress(id, path))
      return leaf(id, NodeStatus::Crossed, TableauRule::Prune);

    for (std::size_t i = 0; i < nodes_[id].label.size(); ++i) {
      const LabelEntry e = nodes_[id].label[i];
      const Formula& f = e.formula;
      if (is_literal(f) || f.is(Kind::Next)) continue;
      const auto& label = nodes_[id].label;
      auto tagged = [&](const Formula& g) { return LabelEntry{g, e.fulfils}; };
      switch (f.kind()) {
        case Kind::And:
          nodes_[id].rule = TableauRule::And;
          child(id, replace_at(label, i, {tagged(f.lhs()), tagged(f.rhs())}));
          return;
        case Kind::Or: {
          nodes_[id].rule = TableauRule::Or;
          auto left = replace_at(label, i, {tagged(f.lhs())});
          auto right = replace_at(label, i, {tagged(f.rhs())});
          child(id, std::move(left));
          child(id, std::move(right));
          return;
        }
        case Kind::Globally:
          nodes_[id].rule = TableauRule::Globally;
          child(id, replace_at(label, i, {tagged(f.lhs()), {Formula::next(f), std::nullopt}}));
          return;
        case Kind::Eventually: {
          nodes_[id].rule = TableauRule::Eventually;
          auto now = replace_at(label, i, {{f.lhs(), f}});
          // Postponing is subsumed when the operand is already required now.
          if (holds(label, f.lhs())) return child(id, std::move(now));
          auto later = replace_at(label, i, {{Formula::next(f), std::nullopt}});
          child(id, std::move(now));
          child(id, std::move(later));
          return;
        }
        case Kind::Until: {
          nodes_[id].rule = TableauRule::Until;
          auto now = replace_at(label, i, {{f.rhs(), f}});
          if (holds(label, f.rhs())) return child(id, std::move(now));
          auto later = replace_at(label, i, {{f.lhs(), std::nullopt}, {Formula::next(f), std::nullopt}});
          child(id, std::move(now));
          child(id, std::move(later));
          return;
        }
        case Kind::QDep: {
          nodes_[id].rule = TableauRule::Dist;
          Formula d = apply_dist(f);
          std::vector<LabelEntry> parts;
          for (const Formula& g : flatten(d, Kind::And)) parts.push_back(tagged(g));
          child(id, replace_at(label, i, parts));
          return;
        }
        case Kind::Not:
          nodes_[id].rule = TableauRule::DeMorgan;
          child(id, replace_at(label, i, {tagged(negate(f.lhs()))}));
          return;
        case Kind::False:
          return leaf(id, NodeStatus::Crossed, TableauRule::Contradiction);
        default: break;
      }
    }

    // Poised.
    nodes_[id].poised = true;
    std::vector<LabelEntry> next;
    for (const LabelEntry& e : nodes_[id].label)
      if (e.formula.is(Kind::Next)) append(next, {e.formula.lhs(), std::nullopt});
    if (next.empty() && std::none_of(nodes_[id].label.begin(), nodes_[id].label.end(),
                                     [](const LabelEntry& e) { return e.formula.is(Kind::Next); }))
      return leaf(id, NodeStatus::Ticked, TableauRule::Done);

      // Poised labels that agree on their Next part lead to the same future, so
    // LOOP and PRUNE compare only that part.
    std::vector<std::size_t> same;
    for (std::size_t k = 0; k < path.size(); ++k)
      if (nodes_[path[k]].poised && same_step(path[k], id)) same.push_back(k);

    const FormulaSet owed = pending(nodes_[id]);
    for (std::size_t k : same) {
      const FormulaSet got = fulfilled(path, k, id);
      if (std::includes(got.begin(), got.end(), owed.begin(), owed.end())) {
        nodes_[id].loop_target = path[k];
        return leaf(id, NodeStatus::Ticked, TableauRule::Loop);
      }
    }
    for (std::size_t a = 0; a < same.size(); ++a)
      for (std::size_t b = a + 1; b < same.size(); ++b) {
        // Only eventualities the label owes count.
        const FormulaSet first = owed_only(fulfilled_between(path, same[a], same[b]), owed);
        const FormulaSet second = owed_only(fulfilled(path, same[b], id), owed);
        if (std::includes(first.begin(), first.end(), second.begin(), second.end()))
          return leaf(id, NodeStatus::Crossed, TableauRule::Prune);
      }

    nodes_[id].rule = TableauRule::Next;
    child(id, std::move(next));
  }

  static FormulaSet owed_only(const FormulaSet& got, const FormulaSet& owed) {
    FormulaSet s;
    std::set_intersection(got.begin(), got.end(), owed.begin(), owed.end(), std::inserter(s, s.end()));
    return s;
  }

  FormulaSet fulfilled_between(const std::vector<std::size_t>& path, std::size_t from_pos, std::size_t to_pos) const {
    FormulaSet s;
    for (std::size_t k = from_pos + 1; k <= to_pos; ++k) s.insert(info_[path[k]].tags.begin(), info_[path[k]].tags.end());
    return s;
  }

  // A label reached by a time step that already occurred on the branch while
  // owing eventualities none of which were fulfilled since.
  bool repeats_without_progress(std::size_t id, const std::vector<std::size_t>& path) const {
    const FormulaSet owed = pending(nodes_[id]);
    if (owed.empty()) return false;
    for (std::size_t k = 0; k < path.size(); ++k) {
      if (!same_label(path[k], id)) continue;
      const FormulaSet got = fulfilled(path, k, id);
      if (std::none_of(owed.begin(), owed.end(), [&](const Formula& f) { return got.count(f) != 0; })) return true;
    }
    return false;
  }

  std::vector<TableauNode>& nodes_;
  std::vector<Info> info_;
  const TableauOptions& opt_;
};

}  // namespace

Tableau build_tableau(const Formula& f, const TableauOptions& options) {
  Tableau t;
  Builder(t.nodes_, options).run(f);
  return t;
}

std::vector<Branch> Tableau::branches() const {
  std::vector<Branch> out;
  if (nodes_.empty()) return out;
  std::vector<std::size_t> path;
  auto walk = [&](auto&& self, std::size_t id) -> void {
    path.push_back(id);
    const TableauNode& n = nodes_[id];
    if (n.children.empty()) out.push_back({path, n.status});
    for (std::size_t c : n.children) self(self, c);
    path.pop_back();
  };
  walk(walk, 0);
  return out;
}

std::vector<Branch> Tableau::ticked_branches() const {
  std::vector<Branch> out;
  for (Branch& b : branches())
    if (b.outcome == NodeStatus::Ticked) out.push_back(std::move(b));
  return out;
}

std::vector<Formula> terminal_node(const Tableau& t, const Branch& b) {
  if (b.outcome != NodeStatus::Ticked) throw Error("terminal node requested for a branch that is not ticked");
  for (auto it = b.nodes.rbegin(); it != b.nodes.rend(); ++it) {
    const TableauNode& n = t.node(*it);
    if (!n.poised) continue;
    std::vector<Formula> out;
    for (const LabelEntry& e : n.label) {
      if (e.formula.is(Kind::Next)) continue;
      const Formula g = e.fulfils ? *e.fulfils : e.formula;
      if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
    }
    return out;
  }
  throw Error("ticked branch without a poised label");
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string mark(const TableauNode& n) {
  switch (n.rule) {
    case TableauRule::Loop: return "LOOP ✓";
    case TableauRule::Done: return "✓";
    case TableauRule::Contradiction: return "×";
    case TableauRule::Prune: return "PRUNE ×";
    default: return "";
  }
}

}  // namespace

std::string export_dot(const Tableau& t) {
  std::ostringstream os;
  os << "digraph tableau {\n  node [shape=box, fontname=\"monospace\"];\n";
  for (const TableauNode& n : t.nodes()) {
    std::string text;
    for (const LabelEntry& e : n.label) text += (text.empty() ? "" : ", ") + render_formula(e.formula);
    if (text.empty()) text = "true";
    text = dot_escape(text);
    const std::string m = mark(n);
    if (!m.empty()) text += "\\n" + m;
    os << "  n" << n.id << " [label=\"" << text << "\"];\n";
  }
  for (const TableauNode& n : t.nodes())
    for (std::size_t c : n.children)
      os << "  n" << n.id << " -> n" << c << " [label=\"" << to_string(n.rule) << "\"];\n";
  os << "}\n";
  return os.str();
}

}  // namespace ccmon
