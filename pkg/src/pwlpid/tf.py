"""Rational transfer-function algebra for the PID loop.

Polynomials are stored with ascending powers of s.  Products and the
closed-loop combination are pure polynomial arithmetic: no pole-zero
cancellation ever happens implicitly (``RationalTF.equivalent`` compares
rational functions by cross-multiplication instead).
"""

from dataclasses import dataclass
import json
import math

import numpy as np
from numpy.polynomial import polynomial as P


class ImproperTransferFunction(ValueError):
    """deg(num) > deg(den); the initial-value limit does not exist."""


class Poly:
    """Real polynomial with ascending coefficients.

    The highest-order coefficient is nonzero after construction; the
    zero polynomial is canonically ``(0.0,)``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        last = c.size
        while last > 1 and c[last - 1] == 0.0:
            last -= 1
        self.coeffs = tuple(float(v) for v in c[:last])

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return self.coeffs == (0.0,)

    def __call__(self, s):
        return P.polyval(s, self.coeffs)

    def __add__(self, other):
        return Poly(P.polyadd(self.coeffs, _coeffs(other)))

    def __sub__(self, other):
        return Poly(P.polysub(self.coeffs, _coeffs(other)))

    def __mul__(self, other):
        return Poly(P.polymul(self.coeffs, _coeffs(other)))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Poly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def allclose(self, other, rtol=1e-9, atol=1e-12):
        a, b = self.coeffs, _coeffs(other)
        width = max(len(a), len(b))
        pa = np.zeros(width)
        pb = np.zeros(width)
        pa[: len(a)] = a
        pb[: len(b)] = b
        return bool(np.allclose(pa, pb, rtol=rtol, atol=atol))

    def __repr__(self):
        return f"Poly({list(self.coeffs)})"

    def __str__(self):
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0.0 and self.degree > 0:
                continue
            if k == 0:
                terms.append(f"{c:g}")
            elif k == 1:
                terms.append(f"{c:g}*s")
            else:
                terms.append(f"{c:g}*s^{k}")
        return " + ".join(terms) if terms else "0"


def _coeffs(p):
    return p.coeffs if isinstance(p, Poly) else Poly(p).coeffs


S = Poly([0.0, 1.0])
ONE = Poly([1.0])


@dataclass(frozen=True)
class PidGains:
    """PID gain triple; all components finite and nonnegative."""

    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        for name, v in (("kp", self.kp), ("ki", self.ki), ("kd", self.kd)):
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            if v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")
        object.__setattr__(self, "kp", float(self.kp))
        object.__setattr__(self, "ki", float(self.ki))
        object.__setattr__(self, "kd", float(self.kd))

    def as_tuple(self):
        return (self.kp, self.ki, self.kd)

    def numerator(self):
        """kd*s^2 + kp*s + ki, the controller numerator over den = s."""
        return Poly([self.ki, self.kp, self.kd])


@dataclass(frozen=True)
class RationalTF:
    """Ratio of real polynomials num/den, ascending coefficients."""

    num: Poly
    den: Poly

    def __post_init__(self):
        num = self.num if isinstance(self.num, Poly) else Poly(self.num)
        den = self.den if isinstance(self.den, Poly) else Poly(self.den)
        if den.is_zero():
            raise ValueError("denominator must not be the zero polynomial")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def __mul__(self, other):
        if not isinstance(other, RationalTF):
            return NotImplemented
        return RationalTF(self.num * other.num, self.den * other.den)

    def times_step(self):
        """Multiply by the unit-step transform 1/s (no cancellation)."""
        return RationalTF(self.num, self.den * S)

    def equivalent(self, other, rtol=1e-9, atol=1e-12):
        """Equality as rational functions via cross-multiplication."""
        return (self.num * other.den).allclose(other.num * self.den,
                                               rtol=rtol, atol=atol)

    def __str__(self):
        return f"({self.num}) / ({self.den})"

    def to_dict(self):
        return {"num": list(self.num.coeffs), "den": list(self.den.coeffs)}

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def region_tf(a):
    """Per-region plant transfer function 1 / (s^n + a . (1, s, ..., s^(n-1)))
    for the affine piece with gradient ``a``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    n = a.size
    den = np.zeros(n + 1)
    den[:n] = a
    den[n] += 1.0
    return RationalTF(ONE, Poly(den))


def limit_tf(grad_at_point):
    """Transfer function of the vanishing-mesh limit: ``region_tf`` with
    the gradient of the nonlinearity at the operating point."""
    return region_tf(grad_at_point)


def closed_loop(plant, gains):
    """Unity-feedback loop T = CG / (1 + CG) with C = kp + ki/s + kd*s.

    The controller's 1/s is cleared by polynomial arithmetic:
    T = Cnum*Gnum / (s*Gden + Cnum*Gnum) with Cnum = kd*s^2 + kp*s + ki.
    No common factors are removed.
    """
    cnum = gains.numerator()
    num = cnum * plant.num
    den = S * plant.den + num
    return RationalTF(num, den)


def initial_value(tf_times_step):
    """Post-initial value y(0+) = lim_{s->inf} s * Y(s) from the leading
    coefficients of Y = ``tf_times_step``.

    Zero when strictly proper by two or more degrees; +inf when
    deg(num) == deg(den); :class:`ImproperTransferFunction` when the
    function is improper.
    """
    num, den = tf_times_step.num, tf_times_step.den
    if num.is_zero():
        return 0.0
    gap = den.degree - num.degree
    if gap < 0:
        raise ImproperTransferFunction(
            f"deg(num)={num.degree} > deg(den)={den.degree}")
    if gap == 0:
        return math.inf
    if gap == 1:
        return num.coeffs[-1] / den.coeffs[-1]
    return 0.0


def post_initial_values(gains, a):
    """Closed-form post-initial state of the first-order loop with plant
    slope ``a``:

        y(0+)  = kd / (1 + kd)
        y'(0+) = (kp - a*kd) / (1 + kd)^2

    The jump comes from the impulsive controller action at t = 0.
    """
    kd, kp = gains.kd, gains.kp
    y0p = kd / (1.0 + kd)
    dy0p = (kp - a * kd) / (1.0 + kd) ** 2
    return y0p, dy0p


# Closed-loop tuning baseline for the linear worked example:
# C(s) = 2.4 + 4.0/s + 0.25s.
EXAMPLE1_BASELINE_GAINS = PidGains(2.4, 4.0, 0.25)


def analytic_step_example1(t, gains=EXAMPLE1_BASELINE_GAINS):
    """Unit-step response of the linear example loop with the baseline
    gains, from the inverse Laplace transform of
    (0.25s^2 + 2.4s + 4) / (1.25s^3 + 4.4s^2 + 4s):

        y(t) = 1 - (4/5) e^(-44t/25) cos(8t/25) - (3/5) e^(-44t/25) sin(8t/25)

    multiplied by the unit step (t < 0 returns 0).  Only defined for the
    baseline gain triple; other gains go through the simulator.
    """
    if gains != EXAMPLE1_BASELINE_GAINS:
        raise ValueError("closed form is fixed to gains (2.4, 4.0, 0.25)")
    t = np.asarray(t, dtype=float)
    decay = np.exp(-44.0 * t / 25.0)
    y = 1.0 - 0.8 * decay * np.cos(8.0 * t / 25.0) \
        - 0.6 * decay * np.sin(8.0 * t / 25.0)
    y = np.where(t < 0.0, 0.0, y)
    return float(y) if y.ndim == 0 else y


def analytic_step_example1_derivatives(t):
    """(y, y', y'') of the baseline closed form, for residual checks and
    post-impulse state comparisons; zero for t < 0."""
    t = np.asarray(t, dtype=float)
    decay = np.exp(-44.0 * t / 25.0)
    c = np.cos(8.0 * t / 25.0)
    s = np.sin(8.0 * t / 25.0)
    y = 1.0 - 0.8 * decay * c - 0.6 * decay * s
    dy = decay * (1.216 * c + 1.312 * s)
    d2y = decay * (-1.72032 * c - 2.69824 * s)
    mask = t < 0.0
    y = np.where(mask, 0.0, y)
    dy = np.where(mask, 0.0, dy)
    d2y = np.where(mask, 0.0, d2y)
    if y.ndim == 0:
        return float(y), float(dy), float(d2y)
    return y, dy, d2y


def routh_stable(den):
    """Routh-Hurwitz test: True iff all roots of ``den`` have negative
    real part.  Zero rows or pivot zeros report False (not provably
    stable), which is the conservative answer for screening."""
    c = list(Poly(den).coeffs)
    if len(c) == 1:
        return c[0] != 0.0
    # descending order for the classical table
    row0 = c[::-1]
    if row0[0] < 0:
        row0 = [-v for v in row0]
    if any(v <= 0 for v in row0 if v != 0.0) or any(v == 0.0 for v in row0):
        # A Hurwitz polynomial has all coefficients present and positive.
        return False
    n = len(row0)
    width = (n + 1) // 2
    table = [row0[0::2] + [0.0] * (width - len(row0[0::2])),
             row0[1::2] + [0.0] * (width - len(row0[1::2]))]
    for _ in range(n - 2):
        prev, cur = table[-2], table[-1]
        if cur[0] == 0.0:
            return False
        new = []
        for j in range(width - 1):
            new.append((cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0])
        new.append(0.0)
        table.append(new)
    return all(row[0] > 0.0 for row in table[: n])
