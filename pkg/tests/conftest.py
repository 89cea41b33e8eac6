import numpy as np
import pytest

from stladapt import Signal
from stladapt.formula import (
    And,
    Eventually,
    Globally,
    Implies,
    Interval,
    Not,
    Or,
    Pred,
    Term,
    Until,
)


@pytest.fixture
def thrust_example_signal():
    """The two-sample thrust trace (110 N, then 80 N) from the worked example."""
    return Signal.from_columns(1.0, {"thrust": [110.0, 80.0]})


def random_formula(rng, variables, depth, max_b=4):
    """A random concrete formula of bounded depth with integer-step intervals."""
    if depth == 0:
        var = variables[rng.integers(len(variables))]
        coef = float(rng.choice([-2.0, -1.0, 1.0, 1.0, 2.0]))
        const = float(rng.integers(-3, 4))
        op = (">", "<", ">=", "<=")[rng.integers(4)]
        bound = float(np.round(rng.normal(0, 5), 2))
        return Pred(Term.make({var: coef}, const), op, bound)
    kind = rng.integers(7)
    sub = lambda: random_formula(rng, variables, depth - 1, max_b)  # noqa: E731
    if kind == 0:
        return Not(sub())
    if kind == 1:
        return And(sub(), sub())
    if kind == 2:
        return Or(sub(), sub())
    if kind == 3:
        return Implies(sub(), sub())
    a = int(rng.integers(0, max_b))
    b = int(rng.integers(a, max_b + 1))
    iv = Interval(float(a), float(b))
    if kind == 4:
        return Globally(iv, sub())
    if kind == 5:
        return Eventually(iv, sub())
    return Until(iv, sub(), sub())


def random_signal(rng, variables, min_len=1, max_len=20, period=1.0):
    n = int(rng.integers(min_len, max_len + 1))
    return Signal(period, tuple(variables),
                  np.round(rng.normal(0, 10, size=(n, len(variables))), 3))
