"""Python access to the ccmon core.

Graphs and scenarios may be given as dicts or JSON text. Structured results
come back as plain dicts.
"""

import json as _json

from . import _core
from ._core import Error, GraphError, InfeasibleConstraint, ParseError, ScenarioError

__all__ = [
    "Error", "GraphError", "InfeasibleConstraint", "ParseError", "ScenarioError",
    "render", "negate", "atoms", "evaluate", "unwind", "group", "tableau_dot",
    "simulate", "centralized", "random_scenario", "sorting_line",
]


def _text(doc):
    return doc if isinstance(doc, str) else _json.dumps(doc)


def render(formula):
    return _core.render(formula)


def negate(formula):
    return _core.negate(formula)


def atoms(formula):
    return set(_core.atoms(formula))


def evaluate(formula, events, costs=None, min_event_cost=0):
    """Verdict ("True", "False" or "Unknown") of formula on a finite trace.

    events is a list of sets of propositions; every event costs 1 unless
    costs is given.
    """
    return _core.evaluate(formula, [set(e) for e in events], list(costs or []), min_event_cost)


def unwind(formula, graph):
    return _json.loads(_core.unwind(formula, _text(graph)))


def group(formula, graph):
    return _json.loads(_core.group(formula, _text(graph)))


def tableau_dot(formula):
    return _core.tableau_dot(formula)


def simulate(scenario, rounds=None):
    """Runs a scenario dict, JSON text, or "sorting_line"/"sorting_line_blue"."""
    return _json.loads(_core.simulate(_text(scenario), rounds))


def centralized(scenario):
    return _json.loads(_core.centralized(_text(scenario)))


def random_scenario(seed):
    return _json.loads(_core.random_scenario(seed))


def sorting_line(blue=False):
    return _json.loads(_core.sorting_line(blue))
