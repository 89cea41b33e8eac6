"""Requirement-driven graceful degradation and recovery for CPS.

STL requirements are weakened or strengthened at runtime, with the optimal
adjustment and the matching action plan found per control cycle by a
mixed-integer linear program over a predictive environment model.
"""

from .formula import (
    And,
    Eventually,
    Formula,
    FormulaError,
    Globally,
    Implies,
    Interval,
    Not,
    Or,
    Param,
    ParamKind,
    Pred,
    Term,
    Until,
    formula_horizon,
    is_concrete,
    parameters,
    to_text,
)
from .parser import StlSyntaxError, parse_pstl, parse_stl
from .requirement import (
    Polarity,
    RequirementError,
    RequirementSpace,
    Valuation,
    degree_of_strengthening,
    degree_of_weakening,
    in_validity_domain,
    instantiate,
    load_requirement_space,
    requirement_space_from_dict,
    valuation_leq,
    weaker_than,
)
from .semantics import (
    RobustnessValue,
    UndefinedRobustnessError,
    robustness,
    robustness_series,
    satisfies,
    strengthening_degree,
    weakening_degree,
)
from .signal import Signal, SignalError, load_trace_csv

__version__ = "0.1.0"
