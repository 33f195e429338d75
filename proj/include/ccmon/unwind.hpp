#pragma once

#include "ccmon/formula.hpp"
#include "ccmon/graph.hpp"

#include <string>
#include <vector>

namespace ccmon {

class UnwindError : public Error {
 public:
  using Error::Error;
};

/// The downstream lower-bound cost already exceeds the global bound.
class InfeasibleConstraint : public UnwindError {
 public:
  using UnwindError::UnwindError;
};

struct QDepTuple {
  Formula lhs;
  Formula rhs;
  Cost bound = 0;
};

/// Every QDep node of f, pre-order, duplicates kept.
std::vector<QDepTuple> extract_qdep(const Formula& f);

/// q minus the cheapest cost from the successors of from_pid to the producer
/// of target. from_pid's own cost is not counted.
Cost local_constraint(const DependencyGraph& g, const std::string& from_pid, const std::string& target, Cost q);

/// (IN(p) as a left-nested conjunction) o<=c v.
Formula apply_dependency_rule(const Process& p, const std::string& v, Cost c);

struct UnwoundConjunct {
  /// The local QDep over the process inputs, e.g. (O0 o<=12 O2).
  Formula qdep;
  Cost constraint = 0;
  /// Producer of qdep's right operand; the process that owns the obligation.
  std::string pid;
  /// Right operand of the originating tuple that this constraint is measured against.
  std::string target;
  /// Left operand of the originating tuple.
  Formula root_trigger;
  /// Index into the tuples returned by extract_qdep.
  std::size_t tuple = 0;
};

struct UnwoundFormula {
  Formula original;
  /// Unwound formula: each unwound QDep replaced by the conjunction of its
  /// per-process conjuncts (G distributed when the occurrence sits under G).
  Formula formula;
  /// Same shape, but every conjunct measured from the root trigger:
  /// (L_root o<=c_i v_i). The c_i are deadlines counted from activation of
  /// the original obligation, so this is the form that evaluates like the
  /// original on graph-consistent traces.
  Formula monitored;
  std::vector<UnwoundConjunct> conjuncts;
  bool changed = false;

  const UnwoundConjunct& conjunct_for(const Formula& qdep) const;
};

UnwoundFormula unwind(const Formula& f, const DependencyGraph& g);

}  // namespace ccmon
