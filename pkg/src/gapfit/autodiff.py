"""Scalar reverse-mode automatic differentiation with a per-evaluation tape.

Each evaluation of a function records the primitives it actually executed
(including whichever branches were taken) on a fresh :class:`Tape`.  A single
reverse sweep over that tape then accumulates adjoints and yields the exact
gradient of the executed path.

Supported primitives: add, sub, mul, div, neg, square, natural-exponent power,
exp, log.  Operators are overloaded on :class:`DiffScalar`, so any loss written
as ordinary arithmetic over scalars (loops and branches included) can be
differentiated without modification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EvaluationError, TapeMismatchError

__all__ = ["Tape", "DiffScalar", "GradientResult", "gradient", "check_gradient",
           "square", "exp", "log"]


class Tape:
    """Append-only record of executed primitives.

    Node ``i`` stores the indices of its parent nodes and the local partial
    derivatives of its value with respect to each parent.  Parents always
    precede their children, so one reverse pass visits every node exactly once.
    """

    __slots__ = ("parents", "partials")

    def __init__(self):
        self.parents = []
        self.partials = []

    def __len__(self):
        return len(self.parents)

    def append(self, parents, partials):
        self.parents.append(parents)
        self.partials.append(partials)
        return len(self.parents) - 1


class DiffScalar:
    """A value plus its node in the active tape.

    Instances with ``tape is None`` are constants; they participate in
    arithmetic but record nothing.  A DiffScalar is bound to one tape for its
    whole lifetime; mixing tapes raises :class:`TapeMismatchError`.
    """

    __slots__ = ("value", "tape", "index")

    def __init__(self, value, tape=None, index=-1):
        self.value = float(value)
        self.tape = tape
        self.index = index

    def __repr__(self):
        return f"DiffScalar({self.value!r})"

    # -- primitive recording --------------------------------------------

    def _binary(self, other, value, d_self, d_other):
        tape, parents, partials = self.tape, [], []
        if isinstance(other, DiffScalar):
            if tape is not None and other.tape is not None and tape is not other.tape:
                raise TapeMismatchError("operands bound to different tapes")
            tape = tape if tape is not None else other.tape
            if other.tape is not None:
                parents.append(other.index)
                partials.append(d_other)
        if self.tape is not None:
            parents.insert(0, self.index)
            partials.insert(0, d_self)
        if not math.isfinite(value):
            raise EvaluationError(f"non-finite value {value!r} in primitive",
                                  step=len(tape) if tape is not None else None)
        if tape is None or not parents:
            return DiffScalar(value)
        return DiffScalar(value, tape, tape.append(tuple(parents), tuple(partials)))

    def _unary(self, value, d_self):
        if not math.isfinite(value):
            raise EvaluationError(f"non-finite value {value!r} in primitive",
                                  step=len(self.tape) if self.tape is not None else None)
        if self.tape is None:
            return DiffScalar(value)
        return DiffScalar(value, self.tape,
                          self.tape.append((self.index,), (d_self,)))

    # -- arithmetic operators -------------------------------------------

    def __add__(self, other):
        o = _val(other)
        return self._binary(other, self.value + o, 1.0, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        o = _val(other)
        return self._binary(other, self.value - o, 1.0, -1.0)

    def __rsub__(self, other):
        o = _val(other)
        return self._binary(other, o - self.value, -1.0, 1.0)

    def __mul__(self, other):
        o = _val(other)
        return self._binary(other, self.value * o, o, self.value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _val(other)
        if o == 0.0:
            raise ZeroDivisionError("division by zero in differentiated code")
        return self._binary(other, self.value / o, 1.0 / o, -self.value / (o * o))

    def __rtruediv__(self, other):
        o = _val(other)
        if self.value == 0.0:
            raise ZeroDivisionError("division by zero in differentiated code")
        v = self.value
        return self._binary(other, o / v, -o / (v * v), 1.0 / v)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise TypeError("only natural-number exponents are supported")
        if n == 0:
            return DiffScalar(1.0)
        return self._unary(self.value ** n, n * self.value ** (n - 1))

    def __neg__(self):
        return self._unary(-self.value, -1.0)


def _val(x):
    return x.value if isinstance(x, DiffScalar) else float(x)


# -- generic primitives (work on DiffScalar and on plain floats) ---------

def square(x):
    if isinstance(x, DiffScalar):
        return x._unary(x.value * x.value, 2.0 * x.value)
    return x * x


def exp(x):
    if isinstance(x, DiffScalar):
        v = math.exp(x.value)
        return x._unary(v, v)
    return math.exp(x)


def log(x):
    if isinstance(x, DiffScalar):
        if x.value <= 0.0:
            raise EvaluationError("log of non-positive value", step=None)
        return x._unary(math.log(x.value), 1.0 / x.value)
    return math.log(x)


@dataclass
class GradientResult:
    """Function value together with one gradient entry per input."""

    value: float
    gradient: list


def gradient(f, x):
    """Evaluate ``f`` at ``x`` and return its exact gradient.

    ``f`` receives a list of DiffScalars (one per entry of ``x``) and must
    return a scalar built from the supported primitives.  The gradient is
    obtained by a single reverse sweep over the tape recorded during the
    forward evaluation; branches contribute the derivative of the path
    actually taken.
    """
    tape = Tape()
    inputs = [DiffScalar(float(v), tape, tape.append((), ())) for v in x]
    out = f(inputs)
    if not isinstance(out, DiffScalar):
        out = DiffScalar(out)
    if not math.isfinite(out.value):
        raise EvaluationError("function produced a non-finite output", step=out.index)
    if out.tape is None:
        return GradientResult(out.value, [0.0] * len(x))

    adjoint = [0.0] * len(tape)
    adjoint[out.index] = 1.0
    parents, partials = tape.parents, tape.partials
    for i in range(out.index, -1, -1):
        a = adjoint[i]
        if a == 0.0:
            continue
        for p, d in zip(parents[i], partials[i]):
            adjoint[p] += a * d
    return GradientResult(out.value, [adjoint[s.index] for s in inputs])


def check_gradient(f, x, h=1e-6):
    """Max relative discrepancy between the tape gradient and central FD.

    Returns ``max_i |g_ad[i] - g_fd[i]| / max(1, |g_ad[i]|)``.  ``f`` must also
    accept plain floats, which it does automatically when written with the
    generic primitives above.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    g_ad = gradient(f, x).gradient
    worst = 0.0
    xs = [float(v) for v in x]
    for i in range(len(xs)):
        lo = list(xs)
        hi = list(xs)
        lo[i] -= h
        hi[i] += h
        f_lo = _val(f(lo))
        f_hi = _val(f(hi))
        g_fd = (f_hi - f_lo) / (2.0 * h)
        worst = max(worst, abs(g_ad[i] - g_fd) / max(1.0, abs(g_ad[i])))
    return worst
