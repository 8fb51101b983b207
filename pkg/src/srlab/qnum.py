"""
Angular-momentum coupling coefficients and two-subsystem ladder elements.

Quantum numbers are carried internally as doubled integers (``2j``, ``2m``)
so that selection rules are exact integer comparisons. Public functions
accept :class:`HalfInt`, ``int``, ``float`` or :class:`fractions.Fraction`
values; anything that is not an exact multiple of 1/2 is rejected.

Conventions
-----------
- Clebsch-Gordan coefficients are real, Condon-Shortley phase.
- ``racah_w(a, b, c, d, e, f) = (-1)**(a+b+c+d) * {a b e; d c f}``.
- Coefficients that vanish by a triangle or magnetic selection rule return
  0.0; structurally malformed ``(j, m)`` pairs raise
  :class:`InvalidQuantumNumber`.

Ladder elements in the coupled basis ``|(j1, j2) j m>`` are available by two
independent routes: explicit decoupling into product states
(``method="decouple"``) and the Wigner-Eckart theorem with Racah
recoupling (``method="wigner_eckart"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "HalfInt",
    "CoupledState",
    "TensorRank",
    "InvalidQuantumNumber",
    "MismatchedAlpha",
    "dpm",
    "clebsch_gordan",
    "wigner_6j",
    "racah_w",
    "reduced_element",
    "ladder_element",
    "coupled_basis",
    "ladder_matrix",
]

_OPS = ("J1-", "J1+J1-", "J2-", "J2+J2-")


class InvalidQuantumNumber(ValueError):
    """Raised for malformed angular momentum quantum numbers."""


class MismatchedAlpha(ValueError):
    """Raised when bra and ket belong to different (j1, j2) labels."""


@dataclass(frozen=True, order=True)
class HalfInt:
    """Exact half-integer stored as ``twice = 2 * value``."""

    twice: int

    @classmethod
    def of(cls, value) -> "HalfInt":
        return cls(_twice(value))

    def __float__(self) -> float:
        return self.twice / 2

    def __add__(self, other):
        return HalfInt(self.twice + _twice(other))

    def __sub__(self, other):
        return HalfInt(self.twice - _twice(other))

    def __neg__(self):
        return HalfInt(-self.twice)

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __repr__(self) -> str:
        if self.twice % 2 == 0:
            return f"HalfInt({self.twice // 2})"
        return f"HalfInt({self.twice}/2)"


def _twice(value) -> int:
    """Return 2*value as an int, rejecting non half-integers."""
    if isinstance(value, HalfInt):
        return value.twice
    if isinstance(value, (int, np.integer)):
        return 2 * int(value)
    if isinstance(value, Fraction):
        t = 2 * value
        if t.denominator != 1:
            raise InvalidQuantumNumber(f"{value} is not a multiple of 1/2")
        return int(t)
    t = 2.0 * float(value)
    r = round(t)
    if abs(t - r) > 1e-9:
        raise InvalidQuantumNumber(f"{value} is not a multiple of 1/2")
    return int(r)


def _check_j(tj: int) -> None:
    if tj < 0:
        raise InvalidQuantumNumber(f"j = {tj / 2} must be non-negative")


def _check_jm(tj: int, tm: int) -> None:
    _check_j(tj)
    if abs(tm) > tj or (tj - tm) % 2:
        raise InvalidQuantumNumber(f"invalid pair j = {tj / 2}, m = {tm / 2}")


@dataclass(frozen=True)
class CoupledState:
    """Basis state ``|(j1, j2) j m>`` of two coupled angular momenta."""

    j1: HalfInt
    j2: HalfInt
    j: HalfInt
    m: HalfInt

    def __post_init__(self):
        for name in ("j1", "j2", "j", "m"):
            v = getattr(self, name)
            if not isinstance(v, HalfInt):
                object.__setattr__(self, name, HalfInt.of(v))
        t1, t2, tj, tm = self.j1.twice, self.j2.twice, self.j.twice, self.m.twice
        _check_j(t1)
        _check_j(t2)
        _check_jm(tj, tm)
        if not _triangle(t1, t2, tj):
            raise InvalidQuantumNumber(
                f"j = {tj / 2} not reachable from j1 = {t1 / 2}, j2 = {t2 / 2}"
            )


@dataclass(frozen=True)
class TensorRank:
    K: int
    Q: int = 0

    def __post_init__(self):
        if self.K not in (0, 1, 2) or abs(self.Q) > self.K:
            raise InvalidQuantumNumber(f"unsupported tensor rank K={self.K}, Q={self.Q}")


# ---------------------------------------------------------------------------
# log-factorial table

_LOGFACT = np.zeros(1)


def _logfact(n: int) -> float:
    global _LOGFACT
    if n >= _LOGFACT.size:
        size = max(2 * n + 1, 512)
        _LOGFACT = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, size)))))
    return float(_LOGFACT[n])


def _triangle(ta: int, tb: int, tc: int) -> bool:
    return (
        (ta + tb + tc) % 2 == 0
        and tc >= abs(ta - tb)
        and tc <= ta + tb
    )


def _log_delta(ta: int, tb: int, tc: int) -> float:
    # log of the triangle coefficient Delta(a, b, c), arguments doubled
    return 0.5 * (
        _logfact((ta + tb - tc) // 2)
        + _logfact((ta - tb + tc) // 2)
        + _logfact((-ta + tb + tc) // 2)
        - _logfact((ta + tb + tc) // 2 + 1)
    )


# ---------------------------------------------------------------------------
# coefficients


def dpm(j, m, sign: str) -> float:
    """Ladder factor ``d_{+/-}(j, m) = sqrt(j(j+1) - m(m +/- 1))``."""
    tj, tm = _twice(j), _twice(m)
    _check_jm(tj, tm)
    if sign in ("+", 1, +1):
        s = 1
    elif sign in ("-", -1):
        s = -1
    else:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    # 4*(j(j+1) - m(m+s)) in integers
    val = tj * (tj + 2) - tm * (tm + 2 * s)
    return math.sqrt(max(val, 0) / 4.0)


@lru_cache(maxsize=200_000)
def _cg2(t1: int, tm1: int, t2: int, tm2: int, tj: int, tm: int) -> float:
    if tm1 + tm2 != tm or not _triangle(t1, t2, tj):
        return 0.0
    if abs(tm) > tj:
        return 0.0
    # Racah closed form; all factorial arguments are integers
    a = (t1 + t2 - tj) // 2
    b = (t1 - tm1) // 2
    c = (t2 + tm2) // 2
    d = (tj - t2 + tm1) // 2
    e = (tj - t1 - tm2) // 2
    kmin = max(0, -d, -e)
    kmax = min(a, b, c)
    if kmin > kmax:
        return 0.0
    pref = 0.5 * (
        math.log(tj + 1)
        + _logfact((tj + t1 - t2) // 2)
        + _logfact((tj - t1 + t2) // 2)
        + _logfact((t1 + t2 - tj) // 2)
        - _logfact((t1 + t2 + tj) // 2 + 1)
        + _logfact((tj + tm) // 2)
        + _logfact((tj - tm) // 2)
        + _logfact((t1 - tm1) // 2)
        + _logfact((t1 + tm1) // 2)
        + _logfact((t2 - tm2) // 2)
        + _logfact((t2 + tm2) // 2)
    )
    terms = []
    for k in range(kmin, kmax + 1):
        lg = pref - (
            _logfact(k)
            + _logfact(a - k)
            + _logfact(b - k)
            + _logfact(c - k)
            + _logfact(d + k)
            + _logfact(e + k)
        )
        terms.append((-1) ** k * math.exp(lg))
    return math.fsum(terms)


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """Clebsch-Gordan coefficient ``<j1 m1; j2 m2 | j m>``.

    Returns 0 when ``m != m1 + m2`` or the triangle rule fails.
    """
    t1, tm1, t2, tm2, tj, tm = (_twice(v) for v in (j1, m1, j2, m2, j, m))
    _check_jm(t1, tm1)
    _check_jm(t2, tm2)
    _check_j(tj)
    if (tj - tm) % 2:
        raise InvalidQuantumNumber(f"invalid pair j = {tj / 2}, m = {tm / 2}")
    return _cg2(t1, tm1, t2, tm2, tj, tm)


@lru_cache(maxsize=200_000)
def _sixj2(ta: int, tb: int, tc: int, td: int, te: int, tf: int) -> float:
    # {a b c; d e f}
    triads = ((ta, tb, tc), (ta, te, tf), (td, tb, tf), (td, te, tc))
    if not all(_triangle(*t) for t in triads):
        return 0.0
    s1 = (ta + tb + tc) // 2
    s2 = (ta + te + tf) // 2
    s3 = (td + tb + tf) // 2
    s4 = (td + te + tc) // 2
    p1 = (ta + tb + td + te) // 2
    p2 = (ta + tc + td + tf) // 2
    p3 = (tb + tc + te + tf) // 2
    tmin = max(s1, s2, s3, s4)
    tmax = min(p1, p2, p3)
    pref = sum(_log_delta(*t) for t in triads)
    terms = []
    for t in range(tmin, tmax + 1):
        lg = pref + _logfact(t + 1) - (
            _logfact(t - s1)
            + _logfact(t - s2)
            + _logfact(t - s3)
            + _logfact(t - s4)
            + _logfact(p1 - t)
            + _logfact(p2 - t)
            + _logfact(p3 - t)
        )
        terms.append((-1) ** t * math.exp(lg))
    return math.fsum(terms)


def wigner_6j(a, b, c, d, e, f) -> float:
    """Wigner 6j symbol ``{a b c; d e f}``."""
    args = tuple(_twice(v) for v in (a, b, c, d, e, f))
    for t in args:
        _check_j(t)
    return _sixj2(*args)


def racah_w(a, b, c, d, e, f) -> float:
    """Racah coefficient ``W(a b c d; e f) = (-1)^(a+b+c+d) {a b e; d c f}``."""
    ta, tb, tc, td, te, tf = (_twice(v) for v in (a, b, c, d, e, f))
    for t in (ta, tb, tc, td, te, tf):
        _check_j(t)
    return _racah_w2(ta, tb, tc, td, te, tf)


def _racah_w2(ta, tb, tc, td, te, tf) -> float:
    val = _sixj2(ta, tb, te, td, tc, tf)
    if val == 0.0:
        return 0.0
    phase = (ta + tb + tc + td) // 2
    return -val if phase % 2 else val


def reduced_element(j, kind: str) -> float:
    """Reduced matrix element ``<j||T||j>`` of a tensor built from J.

    ``kind`` is one of ``"T1(J)"``, ``"T0(J,J)"``, ``"T1(J,J)"``,
    ``"T2(J,J)"``. The normalisation follows
    ``<j m|T_KQ|j' m'> = <j||T_K||j'> C(j' m' K Q | j m)``.
    """
    tj = _twice(j)
    _check_j(tj)
    jj = tj / 2
    x = jj * (jj + 1)
    if kind == "T1(J)":
        return math.sqrt(x)
    if kind == "T0(J,J)":
        return -x / math.sqrt(3.0)
    if kind == "T1(J,J)":
        return -math.sqrt(x / 2)
    if kind == "T2(J,J)":
        return math.sqrt(max(x * (2 * jj - 1) * (2 * jj + 3), 0.0) / 6)
    raise ValueError(f"unknown reduced element kind {kind!r}")


# ---------------------------------------------------------------------------
# ladder elements in |(j1 j2) j m>


def _dm2(tj: int, tm: int) -> float:
    # d_-(j, m) for doubled arguments
    return math.sqrt(max(tj * (tj + 2) - tm * (tm - 2), 0) / 4.0)


def _jm_decouple(t1, t2, tj, tm, tjp, tmp, sub=1) -> float:
    # <(j1 j2) j m | Jsub- | (j1 j2) j' m'>
    if tm != tmp - 2:
        return 0.0
    terms = []
    for tm1 in range(-t1, t1 + 1, 2):
        tm2 = tmp - tm1
        if abs(tm2) > t2:
            continue
        c1 = _cg2(t1, tm1, t2, tm2, tjp, tmp)
        if c1 == 0.0:
            continue
        if sub == 1:
            d, c2 = _dm2(t1, tm1), _cg2(t1, tm1 - 2, t2, tm2, tj, tm)
        else:
            d, c2 = _dm2(t2, tm2), _cg2(t1, tm1, t2, tm2 - 2, tj, tm)
        terms.append(d * c1 * c2)
    return math.fsum(terms)


def _jpjm_decouple(t1, t2, tj, tm, tjp, tmp, sub=1) -> float:
    # <(j1 j2) j m | Jsub+ Jsub- | (j1 j2) j' m'>
    if tm != tmp:
        return 0.0
    terms = []
    for tm1 in range(-t1, t1 + 1, 2):
        tm2 = tm - tm1
        if abs(tm2) > t2:
            continue
        # d_+(j, m-1) * d_-(j, m) == d_-(j, m)**2
        w = _dm2(t1, tm1) ** 2 if sub == 1 else _dm2(t2, tm2) ** 2
        if w == 0.0:
            continue
        terms.append(w * _cg2(t1, tm1, t2, tm2, tjp, tm) * _cg2(t1, tm1, t2, tm2, tj, tm))
    return math.fsum(terms)


def _sign(half_twice: int) -> int:
    # (-1)**(x) for x = half_twice / 2, which must be an integer
    assert half_twice % 2 == 0
    return -1 if (half_twice // 2) % 2 else 1


def _jm_we(t1, t2, tj, tm, tjp, tmp) -> float:
    w = _racah_w2(t1, t1, tj, tjp, 2, t2)
    if w == 0.0:
        return 0.0
    cg = _cg2(tjp, tmp, 2, -2, tj, tm)
    if cg == 0.0:
        return 0.0
    j1 = t1 / 2
    phase = _sign(tj + t1 - t2 + 2)
    return (
        math.sqrt(2.0)
        * phase
        * math.sqrt((tjp + 1) * (t1 + 1) * j1 * (j1 + 1))
        * w
        * cg
    )


def _jpjm_we(t1, t2, tj, tm, tjp, tmp) -> float:
    if tm != tmp:
        return 0.0
    j1 = t1 / 2
    x = j1 * (j1 + 1)
    phase = _sign(tj + t1 - t2 + 2)
    pref = 2.0 * phase * math.sqrt((tjp + 1) * (t1 + 1))
    terms = (
        -x / 3 * _racah_w2(t1, t1, tj, tjp, 0, t2) * _cg2(tjp, tmp, 0, 0, tj, tm),
        math.sqrt(x) / 2 * _racah_w2(t1, t1, tj, tjp, 2, t2) * _cg2(tjp, tmp, 2, 0, tj, tm),
        math.sqrt(max(x * (2 * j1 - 1) * (2 * j1 + 3), 0.0))
        / 6
        * _racah_w2(t1, t1, tj, tjp, 4, t2)
        * _cg2(tjp, tmp, 4, 0, tj, tm),
    )
    return pref * math.fsum(terms)


@lru_cache(maxsize=500_000)
def _ladder2(op: str, method: str, t1, t2, tj, tm, tjp, tmp) -> float:
    kind = "+-" if "+" in op else "-"
    sub = 2 if op.startswith("J2") else 1
    if method == "decouple":
        fn = _jm_decouple if kind == "-" else _jpjm_decouple
        return fn(t1, t2, tj, tm, tjp, tmp, sub)
    fn = _jm_we if kind == "-" else _jpjm_we
    if sub == 1:
        return fn(t1, t2, tj, tm, tjp, tmp)
    # swapping the coupling order multiplies |(j1 j2) j m> by (-1)^(j1+j2-j),
    # so the element picks up (-1)^(j-j')
    return _sign(tj - tjp) * fn(t2, t1, tj, tm, tjp, tmp)


def ladder_element(bra: CoupledState, ket: CoupledState, op: str, method: str = "decouple") -> float:
    """Matrix element ``<bra| op |ket>`` in the coupled two-subsystem basis.

    Parameters
    ----------
    bra, ket : CoupledState
        Must share ``(j1, j2)``.
    op : {"J1-", "J1+J1-", "J2-", "J2+J2-"}
    method : {"decouple", "wigner_eckart"}
        Explicit Clebsch-Gordan decoupling sum, or the closed Wigner-Eckart
        expression with Racah coefficients. Both agree to machine precision.
    """
    if op not in _OPS:
        raise ValueError(f"op must be one of {_OPS}")
    if method not in ("decouple", "wigner_eckart"):
        raise ValueError(f"unknown method {method!r}")
    if bra.j1 != ket.j1 or bra.j2 != ket.j2:
        raise MismatchedAlpha(
            f"bra alpha=({bra.j1}, {bra.j2}) differs from ket alpha=({ket.j1}, {ket.j2})"
        )
    t1, t2 = bra.j1.twice, bra.j2.twice
    tj, tm, tjp, tmp = bra.j.twice, bra.m.twice, ket.j.twice, ket.m.twice
    limit = 4 if "+" in op else 2
    if abs(tj - tjp) > limit:
        return 0.0
    return _ladder2(op, method, t1, t2, tj, tm, tjp, tmp)


def coupled_basis(j1, j2, jmin=None):
    """List of ``(2j, 2m)`` labels for ``|(j1 j2) j m>``, j descending, m descending.

    ``jmin`` truncates the basis to ``j >= jmin``.
    """
    t1, t2 = _twice(j1), _twice(j2)
    tlo = abs(t1 - t2)
    if jmin is not None:
        tlo = max(tlo, _twice(jmin))
    out = []
    for tj in range(t1 + t2, tlo - 1, -2):
        for tm in range(tj, -tj - 1, -2):
            out.append((tj, tm))
    return out


def ladder_matrix(j1, j2, op: str, basis=None, method: str = "decouple") -> np.ndarray:
    """Dense matrix of ``op`` over a list of ``(2j, 2m)`` coupled labels."""
    if basis is None:
        basis = coupled_basis(j1, j2)
    t1, t2 = _twice(j1), _twice(j2)
    n = len(basis)
    out = np.zeros((n, n))
    lowering = op in ("J1-", "J2-")
    for a, (tj, tm) in enumerate(basis):
        for b, (tjp, tmp) in enumerate(basis):
            if lowering:
                if tm != tmp - 2 or abs(tj - tjp) > 2:
                    continue
            elif tm != tmp or abs(tj - tjp) > 4:
                continue
            out[a, b] = _ladder2(op, method, t1, t2, tj, tm, tjp, tmp)
    return out
