#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccmon {

/// Cost units. Always non-negative at the interface; signed so budget
/// arithmetic can go below zero before it is checked.
using Cost = std::int64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position);
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

enum class Verdict { True, False, Unknown };

std::string_view to_string(Verdict v) noexcept;

enum class Kind : std::uint8_t {
  True,
  False,
  Atom,
  Not,
  And,
  Or,
  Next,
  Eventually,
  Globally,
  Until,
  QDep,
  // Internal: an active cost obligation spawned by a QDep. Never produced by
  // the parser.
  Budget,
};

/// Immutable, structurally compared formula handle. Copies share the node.
class Formula {
 public:
  Formula();  // true

  static Formula top();
  static Formula bottom();
  static Formula atom(std::string name);
  static Formula negation(Formula f);
  static Formula conj(Formula a, Formula b);
  static Formula disj(Formula a, Formula b);
  static Formula next(Formula f);
  static Formula eventually(Formula f);
  static Formula globally(Formula f);
  static Formula until(Formula a, Formula b);
  static Formula qdep(Formula lhs, Formula rhs, Cost bound);
  static Formula budget(Formula rhs, Cost remaining);

  Kind kind() const noexcept;
  /// Atom name; empty for other kinds.
  const std::string& name() const noexcept;
  /// QDep bound or Budget remaining; 0 otherwise.
  Cost bound() const noexcept;
  /// First operand (the only operand of unary kinds, the obligation target of
  /// a Budget).
  const Formula& lhs() const;
  const Formula& rhs() const;
  std::size_t hash() const noexcept;

  bool is(Kind k) const noexcept { return kind() == k; }
  bool is_constant() const noexcept { return is(Kind::True) || is(Kind::False); }

  friend bool operator==(const Formula& a, const Formula& b) noexcept;
  friend bool operator!=(const Formula& a, const Formula& b) noexcept { return !(a == b); }
  /// Total order used for label sets and deterministic containers.
  friend bool operator<(const Formula& a, const Formula& b) noexcept;

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> node);
  static Formula build(Kind k, std::string name, Cost bound, Formula lhs, Formula rhs);
  std::shared_ptr<const Node> node_;
};

struct FormulaHash {
  std::size_t operator()(const Formula& f) const noexcept { return f.hash(); }
};

// ---------------------------------------------------------------------------
// Text form

Formula parse_formula(std::string_view text);
std::string render_formula(const Formula& f);

// ---------------------------------------------------------------------------
// Structural operations

/// Negation normal form of !f.
Formula negate(const Formula& f);
/// Negation normal form of f.
Formula normalize(const Formula& f);
bool is_nnf(const Formula& f);

/// Propositions occurring in f, sorted.
std::set<std::string> atoms(const Formula& f);

/// And/Or constructors that absorb constants and drop repeated operands.
Formula simplify_and(const Formula& a, const Formula& b);
Formula simplify_or(const Formula& a, const Formula& b);

/// Flattened operands of a chain of the same binary connective.
std::vector<Formula> flatten(const Formula& f, Kind connective);
Formula make_chain(const std::vector<Formula>& parts, Kind connective);

// ---------------------------------------------------------------------------
// Traces

struct Event {
  std::set<std::string> props;
  Cost cost = 0;
  /// Cost already accumulated by the data carried under a proposition since
  /// its originating trigger. Empty on merged global events.
  std::map<std::string, Cost> age;

  bool holds(const std::string& p) const { return props.count(p) != 0; }
};

struct Trace {
  std::vector<Event> events;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }
  /// d(k): sum of event costs up to and including position k.
  std::vector<Cost> cumulative() const;
};

struct ProgressOptions {
  /// Lower bound on the cost of every future event. With a positive value an
  /// obligation is declared lost as soon as the remaining budget cannot cover
  /// one more event.
  Cost min_event_cost = 0;
};

/// Residual obligation after consuming e. d_before is the cumulative cost
/// before e; budgets are tracked inside the residual, so it is informational.
Formula progress(const Formula& f, const Event& e, Cost d_before = 0,
                 const ProgressOptions& options = {});

struct Evaluation {
  Verdict verdict = Verdict::Unknown;
  /// Position of the event at which the verdict became final.
  std::optional<std::size_t> decided_at;
  Formula residual;
};

Evaluation evaluate(const Formula& f, const Trace& t, const ProgressOptions& options = {});
Verdict evaluate_trace(const Formula& f, const Trace& t, const ProgressOptions& options = {});

// ---------------------------------------------------------------------------
// Sub-formula indices shared by monitors

class SubformulaIndex {
 public:
  SubformulaIndex() = default;
  explicit SubformulaIndex(const Formula& root);

  /// Adds the sub-formulas of f that are not yet indexed.
  void extend(const Formula& f);
  std::optional<std::size_t> find(const Formula& f) const;
  std::size_t at(const Formula& f) const;
  const Formula& formula(std::size_t idx) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(std::size_t idx) const noexcept { return idx < entries_.size(); }

 private:
  std::vector<Formula> entries_;
  std::unordered_map<Formula, std::size_t, FormulaHash> lookup_;
};

}  // namespace ccmon
