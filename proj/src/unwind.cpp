#include "ccmon/unwind.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <limits>
#include <set>

namespace ccmon {

namespace {

void collect_qdep(const Formula& f, std::vector<QDepTuple>& out) {
  switch (f.kind()) {
    case Kind::True:
    case Kind::False:
    case Kind::Atom: return;
    case Kind::QDep:
      out.push_back({f.lhs(), f.rhs(), f.bound()});
      collect_qdep(f.lhs(), out);
      collect_qdep(f.rhs(), out);
      return;
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
      collect_qdep(f.lhs(), out);
      collect_qdep(f.rhs(), out);
      return;
    default: collect_qdep(f.lhs(), out); return;
  }
}

// Atom names in first-occurrence order.
void ordered_atoms(const Formula& f, std::vector<std::string>& out) {
  switch (f.kind()) {
    case Kind::True:
    case Kind::False: return;
    case Kind::Atom:
      if (std::find(out.begin(), out.end(), f.name()) == out.end()) out.push_back(f.name());
      return;
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
    case Kind::QDep:
      ordered_atoms(f.lhs(), out);
      ordered_atoms(f.rhs(), out);
      return;
    default: ordered_atoms(f.lhs(), out); return;
  }
}

std::string describe(const DependencyPath& p) {
  std::string s;
  for (const Process& q : p.procs) s += (s.empty() ? "" : " -> ") + q.pid + "(" + std::to_string(q.cost) + ")";
  return s;
}

}  // namespace

std::vector<QDepTuple> extract_qdep(const Formula& f) {
  std::vector<QDepTuple> out;
  collect_qdep(f, out);
  return out;
}

Cost local_constraint(const DependencyGraph& g, const std::string& from_pid, const std::string& target, Cost q) {
  const auto sink = g.producer(target);
  if (!sink) throw UnwindError("variable " + target + " has no producer");
  g.process(from_pid);
  if (from_pid == *sink) return q;
  Cost best = std::numeric_limits<Cost>::max();
  const DependencyPath* cheapest = nullptr;
  std::vector<DependencyPath> paths;
  for (const std::string& s : g.successors(from_pid))
    for (DependencyPath& p : g.paths_from(s, target)) paths.push_back(std::move(p));
  for (const DependencyPath& p : paths) {
    const Cost c = path_cost(p);
    if (c < best) {
      best = c;
      cheapest = &p;
    }
  }
  if (!cheapest) throw UnwindError("process " + from_pid + " is not on a dependency path to " + target);
  if (best > q)
    throw InfeasibleConstraint("infeasible constraint for " + from_pid + ": cheapest downstream path " +
                               describe(*cheapest) + " costs " + std::to_string(best) + " > " + std::to_string(q));
  return q - best;
}

Formula apply_dependency_rule(const Process& p, const std::string& v, Cost c) {
  if (!p.writes(v)) throw UnwindError(v + " is not an output of " + p.pid);
  std::vector<Formula> ins;
  for (const std::string& i : p.inputs) ins.push_back(Formula::atom(i));
  return Formula::qdep(make_chain(ins, Kind::And), Formula::atom(v), c);
}

const UnwoundConjunct& UnwoundFormula::conjunct_for(const Formula& qdep) const {
  for (const UnwoundConjunct& c : conjuncts)
    if (c.qdep == qdep) return c;
  throw UnwindError("no unwound conjunct " + render_formula(qdep));
}

namespace {

class Unwinder {
 public:
  Unwinder(const DependencyGraph& g, UnwoundFormula& out) : g_(g), out_(out) {}

  struct Pair {
    Formula shape;
    Formula monitored;
  };

  Pair rewrite(const Formula& f) {
    switch (f.kind()) {
      case Kind::True:
      case Kind::False:
      case Kind::Atom:
      case Kind::Budget: return {f, f};
      case Kind::QDep: {
        auto emitted = unwind_tuple(f);
        if (!emitted) return rebuild_qdep(f);
        return {make_chain(emitted->shape, Kind::And), make_chain(emitted->monitored, Kind::And)};
      }
      case Kind::Globally: {
        if (f.lhs().is(Kind::QDep)) {
          auto emitted = unwind_tuple(f.lhs());
          if (!emitted) {
            Pair inner = rebuild_qdep(f.lhs());
            return {Formula::globally(inner.shape), Formula::globally(inner.monitored)};
          }
          std::vector<Formula> s, m;
          for (const Formula& x : emitted->shape) s.push_back(Formula::globally(x));
          for (const Formula& x : emitted->monitored) m.push_back(Formula::globally(x));
          return {make_chain(s, Kind::And), make_chain(m, Kind::And)};
        }
        Pair inner = rewrite(f.lhs());
        return {Formula::globally(inner.shape), Formula::globally(inner.monitored)};
      }
      case Kind::Not:
      case Kind::Next:
      case Kind::Eventually: {
        Pair inner = rewrite(f.lhs());
        return {unary(f.kind(), inner.shape), unary(f.kind(), inner.monitored)};
      }
      case Kind::And:
      case Kind::Or:
      case Kind::Until: {
        Pair a = rewrite(f.lhs());
        Pair b = rewrite(f.rhs());
        return {binary(f.kind(), a.shape, b.shape), binary(f.kind(), a.monitored, b.monitored)};
      }
    }
    return {f, f};
  }

 private:
  struct Emitted {
    std::vector<Formula> shape;
    std::vector<Formula> monitored;
  };

  static Formula unary(Kind k, const Formula& a) {
    if (k == Kind::Not) return Formula::negation(a);
    if (k == Kind::Next) return Formula::next(a);
    return Formula::eventually(a);
  }

  static Formula binary(Kind k, const Formula& a, const Formula& b) {
    if (k == Kind::And) return Formula::conj(a, b);
    if (k == Kind::Or) return Formula::disj(a, b);
    return Formula::until(a, b);
  }

  // A QDep that stays: its operands may still hold QDeps of their own.
  Pair rebuild_qdep(const Formula& f) {
    Pair l = rewrite(f.lhs());
    Pair r = rewrite(f.rhs());
    return {Formula::qdep(l.shape, r.shape, f.bound()), Formula::qdep(l.monitored, r.monitored, f.bound())};
  }

  std::optional<Emitted> unwind_tuple(const Formula& q) {
    const std::size_t tuple = next_tuple_++;
    std::vector<std::string> targets;
    ordered_atoms(q.rhs(), targets);
    Emitted em;
    for (const std::string& v : targets) {
      if (!g_.producer(v)) {
        if (g_.is_environment(v)) continue;
        throw UnwindError("unknown variable " + v + " in " + render_formula(q));
      }
      std::deque<std::string> work{v};
      std::set<std::string> visited;
      while (!work.empty()) {
        const std::string w = work.front();
        work.pop_front();
        if (!visited.insert(w).second) continue;
        const Process& p = g_.process(*g_.producer(w));
        const Cost c = local_constraint(g_, p.pid, v, q.bound());
        Formula shape = apply_dependency_rule(p, w, c);
        Formula anchored = Formula::qdep(q.lhs(), Formula::atom(w), c);
        out_.conjuncts.push_back({shape, c, p.pid, v, q.lhs(), tuple});
        em.shape.push_back(shape);
        em.monitored.push_back(anchored);
        for (const std::string& in : p.inputs)
          if (g_.producer(in) && !visited.count(in)) work.push_back(in);
      }
    }
    if (em.shape.empty()) return std::nullopt;
    // The nested QDeps of a replaced occurrence are gone; skip their indices.
    next_tuple_ += extract_qdep(q.lhs()).size() + extract_qdep(q.rhs()).size();
    return em;
  }

  const DependencyGraph& g_;
  UnwoundFormula& out_;
  std::size_t next_tuple_ = 0;
};

}  // namespace

UnwoundFormula unwind(const Formula& f, const DependencyGraph& g) {
  UnwoundFormula out;
  out.original = f;
  Unwinder u(g, out);
  auto result = u.rewrite(f);
  out.changed = !out.conjuncts.empty();
  if (!out.changed) {
    out.formula = f;
    out.monitored = f;
    return out;
  }
  out.formula = result.shape;
  out.monitored = result.monitored;
  return out;
}

}  // namespace ccmon
