"""Extended-precision real and complex arrays built from float64 limbs.

A value is stored as an unevaluated sum of 1, 2 or 4 hardware doubles
("limbs") kept in decreasing magnitude and non-overlapping after every
renormalization: ``|limbs[i+1]| <= ulp(limbs[i]) / 2``.  The three
precision levels are

    ==========  =====  ===================
    level       limbs  unit roundoff
    ==========  =====  ===================
    ``"d"``     1      2**-53
    ``"dd"``    2      2**-106  (~1.2e-32)
    ``"qd"``    4      2**-212  (~1.5e-64)
    ==========  =====  ===================

All composite operations renormalize eagerly, so the non-overlap
invariant can be checked after any public op.  Relative error of a
single add/sub/mul/div/sqrt is at most ``8 * eps(level)`` (documented
constant, enforced by the oracle tests, not assumed).

Arrays carry their limbs in a trailing axis: an ``ExtendedReal`` of
shape ``(n,)`` at level ``"qd"`` wraps a float64 ndarray of shape
``(n, 4)``; an ``ExtendedComplex`` adds a re/im axis before the limb
axis.  Elementwise kernels are vectorized numpy expressions, so the
cost of one operation is nearly independent of the number of elements
for small arrays; code that wants speed batches many elements into one
call rather than looping.

Scalar building blocks ``two_sum`` and ``two_prod`` are exact: the pair
``(s, e)`` satisfies ``s + e == a (op) b`` in exact arithmetic.  The
product uses the libm fused multiply-add when it can be loaded and the
Dekker split otherwise; both paths are exercised by the tests.

>>> a = ExtendedReal.from_str("1.1", "dd")
>>> b = ExtendedReal.from_str("2.2", "dd")
>>> print(a + b)
3.3000000000000000000000000000000000000E+0
"""

from __future__ import annotations

import ctypes
import ctypes.util
import math
import warnings
from fractions import Fraction
from decimal import Decimal, localcontext

import numpy as np

__all__ = [
    "LEVELS",
    "PrecisionLossWarning",
    "eps",
    "nlimbs",
    "two_sum",
    "quick_two_sum",
    "split",
    "two_prod",
    "two_prod_dekker",
    "two_prod_fma",
    "ExtendedReal",
    "ExtendedComplex",
    "arith",
    "complex_arith",
    "reduce_sum",
]

LEVELS = ("d", "dd", "qd")

_NLIMBS = {"d": 1, "dd": 2, "qd": 4}
_LEVEL_OF = {1: "d", 2: "dd", 4: "qd"}
_EPS = {"d": 2.0 ** -53, "dd": 2.0 ** -106, "qd": 2.0 ** -212}
# significant decimal digits that guarantee a bit-exact parse round trip
_DIGITS = {"d": 17, "dd": 36, "qd": 68}

_SPLITTER = 134217729.0  # 2**27 + 1, Dekker split constant
_PROD_UNDERFLOW = 2.0 ** -969  # below this the product's error term can be inexact


class PrecisionLossWarning(UserWarning):
    """The error term of an exact transform may have been rounded."""


def eps(level: str) -> float:
    """Unit roundoff of a precision level."""
    return _EPS[level]


def nlimbs(level: str) -> int:
    """Number of float64 limbs used by a precision level."""
    return _NLIMBS[level]


# ----------------------------------------------------------------------
# scalar error-free transforms
# ----------------------------------------------------------------------

def two_sum(a: float, b: float) -> tuple:
    """Knuth's exact addition: returns (s, e) with s + e == a + b.

    Works for any ordering of the operands.  Overflow to infinity in s
    propagates; NaN in gives NaN out.

    >>> two_sum(2.0 ** 53, 1.0)
    (9007199254740992.0, 1.0)
    """
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def quick_two_sum(a: float, b: float) -> tuple:
    """Dekker's exact addition, requires |a| >= |b| (or a == 0 == b)."""
    s = a + b
    e = b - (s - a)
    return s, e


def split(a: float) -> tuple:
    """Dekker split of a double into a 26-bit high and low part.

    The halves satisfy hi + lo == a exactly and each fits in 26 bits of
    mantissa, so products of halves are exact.  Overflows for
    |a| >= 2**996; operands that large are outside this library's domain.
    """
    t = _SPLITTER * a
    hi = t - (t - a)
    lo = a - hi
    return hi, lo


def two_prod_dekker(a: float, b: float) -> tuple:
    """Exact product via Dekker splitting: (p, e) with p + e == a * b."""
    p = a * b
    ahi, alo = split(a)
    bhi, blo = split(b)
    e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    if p != 0.0 and abs(p) < _PROD_UNDERFLOW:
        warnings.warn(
            "two_prod error term may be inexact near the underflow threshold",
            PrecisionLossWarning,
            stacklevel=2,
        )
    return p, e


def _load_libm_fma():
    try:
        name = ctypes.util.find_library("m") or "libm.so.6"
        libm = ctypes.CDLL(name)
        fn = libm.fma
        fn.restype = ctypes.c_double
        fn.argtypes = [ctypes.c_double, ctypes.c_double, ctypes.c_double]
        # sanity: fma must be fused, not a rounded multiply-add
        if fn(1.0 + 2.0 ** -27, 1.0 + 2.0 ** -27, -(1.0 + 2.0 ** -26)) != 2.0 ** -54:
            return None
        return fn
    except (OSError, AttributeError):
        return None


_FMA = _load_libm_fma()

if _FMA is not None:

    def two_prod_fma(a: float, b: float) -> tuple:
        """Exact product via fused multiply-add: (p, e), p + e == a * b."""
        p = a * b
        e = _FMA(a, b, -p)
        if p != 0.0 and abs(p) < _PROD_UNDERFLOW:
            warnings.warn(
                "two_prod error term may be inexact near the underflow threshold",
                PrecisionLossWarning,
                stacklevel=2,
            )
        return p, e

    two_prod = two_prod_fma
else:  # pragma: no cover - host without a loadable libm fma
    two_prod_fma = None
    two_prod = two_prod_dekker


# ----------------------------------------------------------------------
# vectorized kernels on raw limb arrays, shape (..., L)
# ----------------------------------------------------------------------

def _v_two_sum(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def _v_quick_two_sum(a, b):
    s = a + b
    e = b - (s - a)
    return s, e


def _v_two_prod(a, b):
    p = a * b
    t = _SPLITTER * a
    ahi = t - (t - a)
    alo = a - ahi
    t = _SPLITTER * b
    bhi = t - (t - b)
    blo = b - bhi
    e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, e


def _v_three_sum(a, b, c):
    # full three-way sum: value, first error, second error
    t1, t2 = _v_two_sum(a, b)
    s, t3 = _v_two_sum(c, t1)
    e1, e2 = _v_two_sum(t2, t3)
    return s, e1, e2


def _v_three_sum2(a, b, c):
    # three-way sum where the second error is folded flat
    t1, t2 = _v_two_sum(a, b)
    s, t3 = _v_two_sum(c, t1)
    return s, t2 + t3


def _accumulate(s0, s1, rest):
    """Compress a magnitude-ordered error chain into four limb slots.

    Replays the classic branch structure of quad-double renormalization
    (feed each value into the lowest active slot, open a new slot when a
    rounding error survives) with masks, so it vectorizes.
    """
    shape = np.broadcast(s0, s1).shape
    z = np.zeros(shape)
    slot0 = np.broadcast_to(s0, shape).copy()
    slot1 = np.broadcast_to(s1, shape).copy()
    slot2 = z.copy()
    slot3 = z.copy()
    cnt = np.where(slot1 != 0.0, 1, 0)
    for v in rest:
        active = np.where(
            cnt == 0, slot0, np.where(cnt == 1, slot1, np.where(cnt == 2, slot2, slot3))
        )
        s, e = _v_quick_two_sum(active, v)
        slot0 = np.where(cnt == 0, s, slot0)
        slot1 = np.where(cnt == 1, s, slot1)
        slot2 = np.where(cnt == 2, s, slot2)
        slot3 = np.where(cnt == 3, s, slot3)
        adv = (e != 0.0) & (cnt < 3)
        cnt = cnt + adv
        put = adv
        slot1 = np.where(put & (cnt == 1), e, slot1)
        slot2 = np.where(put & (cnt == 2), e, slot2)
        slot3 = np.where(put & (cnt == 3), e, slot3)
    return slot0, slot1, slot2, slot3


def _renorm(parts):
    """Renormalize 4 or 5 roughly ordered components into 4 canonical limbs."""
    s = parts[-1]
    errs = []
    for i in range(len(parts) - 2, -1, -1):
        s, e = _v_quick_two_sum(parts[i], s)
        errs.append(e)
    errs.reverse()  # most significant error first
    return _accumulate(s, errs[0], errs[1:])


def _pack(*planes):
    return np.stack(planes, axis=-1)


# -- level "d" ---------------------------------------------------------

def _add1(a, b):
    return a + b


def _sub1(a, b):
    return a - b


def _mul1(a, b):
    return a * b


def _div1(a, b):
    return a / b


def _sqrt1(a):
    return np.sqrt(a)


def _mul1_d(a, b):
    return a * b[..., None]


# -- level "dd" --------------------------------------------------------

def _add2(a, b):
    s, e = _v_two_sum(a[..., 0], b[..., 0])
    t, f = _v_two_sum(a[..., 1], b[..., 1])
    e = e + t
    s, e = _v_quick_two_sum(s, e)
    e = e + f
    s, e = _v_quick_two_sum(s, e)
    return _pack(s, e)


def _sub2(a, b):
    return _add2(a, -b)


def _mul2(a, b):
    p, e = _v_two_prod(a[..., 0], b[..., 0])
    e = e + (a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0])
    s, e = _v_quick_two_sum(p, e)
    return _pack(s, e)


def _mul2_d(a, b):
    # dd times plain double, b shaped like the value part
    p, e = _v_two_prod(a[..., 0], b)
    e = e + a[..., 1] * b
    s, e = _v_quick_two_sum(p, e)
    return _pack(s, e)


def _add2_d(a, b):
    s, e = _v_two_sum(a[..., 0], b)
    e = e + a[..., 1]
    s, e = _v_quick_two_sum(s, e)
    return _pack(s, e)


def _div2(a, b):
    q1 = a[..., 0] / b[..., 0]
    r = _sub2(a, _mul2_d(b, q1))
    q2 = r[..., 0] / b[..., 0]
    r = _sub2(r, _mul2_d(b, q2))
    q3 = r[..., 0] / b[..., 0]
    s, e = _v_quick_two_sum(q1, q2)
    return _add2_d(_pack(s, e), q3)


def _sqrt2(a):
    a0 = a[..., 0]
    if np.any(a0 < 0.0):
        raise ValueError("square root of a negative extended real")
    nz = a0 > 0.0
    safe = np.where(nz, a0, 1.0)
    x = 1.0 / np.sqrt(safe)
    ax = safe * x
    p, pe = _v_two_prod(ax, ax)
    e = _sub2(a, _pack(p, pe))
    corr = e[..., 0] * (x * 0.5)
    s, lo = _v_two_sum(ax, corr)
    out = _pack(s, lo)
    return out * nz[..., None]


# -- level "qd" --------------------------------------------------------

def _add4(a, b):
    # componentwise add in the style of the reference quad-double library's
    # default: cheap, branch-free, error within the documented constant
    a, b = np.broadcast_arrays(a, b)
    s, t = _v_two_sum(np.moveaxis(a, -1, 0), np.moveaxis(b, -1, 0))
    s0, s1, s2, s3 = s[0], s[1], s[2], s[3]
    t0, t1, t2, t3 = t[0], t[1], t[2], t[3]
    s1, t0 = _v_two_sum(s1, t0)
    s2, t0, t1 = _v_three_sum(s2, t0, t1)
    s3, t0 = _v_three_sum2(s3, t0, t2)
    t0 = t0 + t1 + t3
    return _pack(*_renorm([s0, s1, s2, s3, t0]))


def _add4_merge(a, b):
    """Magnitude-merge quad-double add (slower, smallest constant).

    Merges the eight limbs by decreasing magnitude and recompresses with a
    double-length accumulator; kept as the reference-quality alternate.
    """
    a, b = np.broadcast_arrays(a, b)
    m = np.concatenate([a, b], axis=-1)  # (..., 8)
    order = np.argsort(-np.abs(m), axis=-1, kind="stable")
    m = np.take_along_axis(m, order, axis=-1)
    u, v = _v_quick_two_sum(m[..., 0], m[..., 1])
    shape = u.shape
    x0 = np.zeros(shape)
    x1 = np.zeros(shape)
    x2 = np.zeros(shape)
    x3 = np.zeros(shape)
    cnt = np.zeros(shape, dtype=np.int64)
    for i in range(2, 8):
        t = m[..., i]
        full = cnt >= 4
        s1, vn = _v_two_sum(v, t)
        s2, un = _v_two_sum(u, s1)
        emit = (un != 0.0) & (vn != 0.0) & ~full
        out = np.where(emit, s2, 0.0)
        u = np.where(full, u, np.where(emit, un, s2))
        v = np.where(full, v, np.where(vn != 0.0, vn, un))
        commit = out != 0.0
        x0 = np.where(commit & (cnt == 0), out, x0)
        x1 = np.where(commit & (cnt == 1), out, x1)
        x2 = np.where(commit & (cnt == 2), out, x2)
        x3 = np.where(commit & (cnt == 3), out, x3)
        x3 = np.where(full, x3 + t, x3)
        cnt = cnt + commit
    # flush the double-length accumulator into the remaining slots
    x0 = np.where(cnt == 0, u, x0)
    x1 = np.where(cnt == 0, v, np.where(cnt == 1, u, x1))
    x2 = np.where(cnt == 1, v, np.where(cnt == 2, u, x2))
    x3 = np.where(cnt == 2, v, np.where(cnt == 3, u, x3))
    r0, r1, r2, r3 = _renorm([x0, x1, x2, x3])
    return _pack(r0, r1, r2, r3)


def _sub4(a, b):
    return _add4(a, -b)


def _mul4(a, b):
    a0, a1, a2, a3 = (a[..., k] for k in range(4))
    b0, b1, b2, b3 = (b[..., k] for k in range(4))
    # the ten exact partial products with weight <= eps**3, one batched call
    pa = np.stack([a0, a0, a1, a0, a1, a2, a0, a1, a2, a3])
    pb = np.stack([b0, b1, b0, b2, b1, b0, b3, b2, b1, b0])
    p, q = _v_two_prod(pa, pb)
    p0, p1, p2, p3, p4, p5, p6, p7, p8, p9 = (p[k] for k in range(10))
    q0, q1, q2, q3, q4, q5, q6, q7, q8, q9 = (q[k] for k in range(10))

    p1, p2, q0 = _v_three_sum(p1, p2, q0)
    # six-three sum of (p2, q1, q2, p3, p4, p5)
    p2, q1, q2 = _v_three_sum(p2, q1, q2)
    p3, p4, p5 = _v_three_sum(p3, p4, p5)
    s0, t0 = _v_two_sum(p2, p3)
    s1, t1 = _v_two_sum(q1, p4)
    s2 = q2 + p5
    s1, t0 = _v_two_sum(s1, t0)
    s2 = s2 + (t0 + t1)
    # nine-two sum of (q0, s1(late), q3, q4, q5, p6, p7, p8, p9)
    ha, la = _v_two_sum(np.stack([q0, q4, p6, p8]), np.stack([q3, q5, p7, p9]))
    t0, t1 = _v_two_sum(ha[0], ha[1])
    t1 = t1 + (la[0] + la[1])
    r0, r1 = _v_two_sum(ha[2], ha[3])
    r1 = r1 + (la[2] + la[3])
    q3, q4 = _v_two_sum(t0, r0)
    q4 = q4 + (t1 + r1)
    t0, t1 = _v_two_sum(q3, s1)
    t1 = t1 + q4
    # order eps**4 dust, folded flat
    t1 = t1 + (a1 * b3 + a2 * b2 + a3 * b1) + (q6 + q7 + q8 + q9) + s2
    r = _renorm([p0, p1, s0, t0, t1])
    return _pack(*r)


def _mul4_d(a, b):
    a0, a1, a2, a3 = (a[..., k] for k in range(4))
    p, q = _v_two_prod(np.stack([a0, a1, a2]), np.stack([b, b, b]))
    p0, p1, p2 = p[0], p[1], p[2]
    q0, q1, q2 = q[0], q[1], q[2]
    p3 = a3 * b
    s0 = p0
    s1, s2 = _v_two_sum(q0, p1)
    s2, q1, p2 = _v_three_sum(s2, q1, p2)
    q1, q2 = _v_three_sum2(q1, q2, p3)
    s3 = q1
    s4 = q2 + p2
    r = _renorm([s0, s1, s2, s3, s4])
    return _pack(*r)


def _add4_d(a, b):
    c0, e = _v_two_sum(a[..., 0], b)
    c1, e = _v_two_sum(a[..., 1], e)
    c2, e = _v_two_sum(a[..., 2], e)
    c3, e = _v_two_sum(a[..., 3], e)
    r = _renorm([c0, c1, c2, c3, e])
    return _pack(*r)


def _div4(a, b):
    b0 = b[..., 0]
    q0 = a[..., 0] / b0
    r = _sub4(a, _mul4_d(b, q0))
    q1 = r[..., 0] / b0
    r = _sub4(r, _mul4_d(b, q1))
    q2 = r[..., 0] / b0
    r = _sub4(r, _mul4_d(b, q2))
    q3 = r[..., 0] / b0
    r = _sub4(r, _mul4_d(b, q3))
    q4 = r[..., 0] / b0
    out = _renorm([q0, q1, q2, q3, q4])
    return _pack(*out)


def _half(a):
    return a * 0.5  # exact power-of-two scale, limbs stay canonical


def _sqrt4(a):
    a0 = a[..., 0]
    if np.any(a0 < 0.0):
        raise ValueError("square root of a negative extended real")
    nz = a0 > 0.0
    safe = np.where(nz[..., None], a, _pack(*([np.ones(a0.shape)] * 4)))
    r = _pack(
        1.0 / np.sqrt(safe[..., 0]),
        np.zeros(a0.shape),
        np.zeros(a0.shape),
        np.zeros(a0.shape),
    )
    h = _half(safe)
    for _ in range(3):
        # Newton step on 1/sqrt: r += r * (1/2 - h * r**2)
        t = _mul4(h, _mul4(r, r))
        t = _add4_d(-t, 0.5)
        r = _add4(r, _mul4(r, t))
    out = _mul4(r, safe)
    return out * nz[..., None]


_ADD = {1: _add1, 2: _add2, 4: _add4}
_SUB = {1: _sub1, 2: _sub2, 4: _sub4}
_MUL = {1: _mul1, 2: _mul2, 4: _mul4}
_DIV = {1: _div1, 2: _div2, 4: _div4}
_SQRT = {1: _sqrt1, 2: _sqrt2, 4: _sqrt4}
_MUL_D = {1: _mul1_d, 2: lambda a, b: _mul2_d(a, b), 4: lambda a, b: _mul4_d(a, b)}


def _renorm_limbs(a, L):
    """Re-canonicalize a limb array (idempotent on already canonical input)."""
    if L == 1:
        return a.copy()
    if L == 2:
        s, e = _v_quick_two_sum(a[..., 0], a[..., 1])
        s, e = _v_quick_two_sum(s, e)
        return _pack(s, e)
    r = _renorm([a[..., 0], a[..., 1], a[..., 2], a[..., 3]])
    return _pack(*r)


def _cmp_limbs(a, b, L):
    """Lexicographic comparison of canonical limb arrays: -1, 0, +1."""
    c = np.sign(a[..., 0] - b[..., 0])
    for k in range(1, L):
        c = np.where(c == 0.0, np.sign(a[..., k] - b[..., k]), c)
    return c


def _pairwise(x, op):
    """Deterministic pairwise reduction along axis 0 of a limb-plane array."""
    n = x.shape[0]
    while n > 1:
        m = n // 2
        y = op(x[0 : 2 * m : 2], x[1 : 2 * m : 2])
        if n % 2:
            y = np.concatenate([y, x[n - 1 : n]], axis=0)
        x = y
        n = x.shape[0]
    return x[0]


# ----------------------------------------------------------------------
# decimal conversions
# ----------------------------------------------------------------------

def _fraction_to_limbs(f: Fraction, L: int):
    out = []
    for _ in range(L):
        v = float(f)  # correctly rounded
        out.append(v)
        f = f - Fraction(v)
    return np.array(out)


def _limbs_to_fraction(limbs) -> Fraction:
    total = Fraction(0)
    for v in limbs:
        total += Fraction(float(v))
    return total


def _format_fraction(f: Fraction, digits: int) -> str:
    if f == 0:
        return "0.0E+0"
    with localcontext() as ctx:
        ctx.prec = digits
        d = Decimal(f.numerator) / Decimal(f.denominator)
    return format(d, f".{digits - 1}E")


def _parse_decimal(text: str, L: int):
    f = Fraction(Decimal(text.strip()))
    return _fraction_to_limbs(f, L)


# ----------------------------------------------------------------------
# public array types
# ----------------------------------------------------------------------

class ExtendedReal:
    """Array of extended-precision reals; the trailing axis holds limbs.

    Instances are treated as immutable: operations return new arrays and
    concurrent readers never see in-place mutation.
    """

    __slots__ = ("limbs",)

    def __init__(self, limbs):
        limbs = np.asarray(limbs, dtype=np.float64)
        if limbs.ndim < 1 or limbs.shape[-1] not in _LEVEL_OF:
            raise ValueError("limb axis must have length 1, 2 or 4")
        self.limbs = limbs

    # -- construction --------------------------------------------------

    @classmethod
    def zeros(cls, shape, level: str) -> "ExtendedReal":
        if isinstance(shape, int):
            shape = (shape,)
        return cls(np.zeros(tuple(shape) + (_NLIMBS[level],)))

    @classmethod
    def from_float(cls, x, level: str) -> "ExtendedReal":
        x = np.asarray(x, dtype=np.float64)
        L = _NLIMBS[level]
        limbs = np.zeros(x.shape + (L,))
        limbs[..., 0] = x
        return cls(limbs)

    @classmethod
    def from_str(cls, text: str, level: str) -> "ExtendedReal":
        return cls(_parse_decimal(text, _NLIMBS[level]))

    @classmethod
    def from_fraction(cls, f: Fraction, level: str) -> "ExtendedReal":
        return cls(_fraction_to_limbs(f, _NLIMBS[level]))

    # -- structure -----------------------------------------------------

    @property
    def level(self) -> str:
        return _LEVEL_OF[self.limbs.shape[-1]]

    @property
    def nlimbs(self) -> int:
        return self.limbs.shape[-1]

    @property
    def shape(self):
        return self.limbs.shape[:-1]

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx) -> "ExtendedReal":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return ExtendedReal(self.limbs[idx + (slice(None),)])

    def reshape(self, *shape) -> "ExtendedReal":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return ExtendedReal(self.limbs.reshape(tuple(shape) + (self.nlimbs,)))

    def copy(self) -> "ExtendedReal":
        return ExtendedReal(self.limbs.copy())

    # -- arithmetic ----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, ExtendedReal):
            if other.nlimbs != self.nlimbs:
                raise ValueError(
                    f"precision level mismatch: {self.level} vs {other.level}"
                )
            return other
        if isinstance(other, (int, float)):
            v = float(other)
            if isinstance(other, int) and v != other:
                raise ValueError("integer operand is not exactly a double")
            return ExtendedReal.from_float(v, self.level)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedReal(_ADD[self.nlimbs](self.limbs, other.limbs))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedReal(_SUB[self.nlimbs](self.limbs, other.limbs))

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedReal(_SUB[self.nlimbs](other.limbs, self.limbs))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedReal(_MUL[self.nlimbs](self.limbs, other.limbs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedReal(_DIV[self.nlimbs](self.limbs, other.limbs))

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedReal(_DIV[self.nlimbs](other.limbs, self.limbs))

    def __neg__(self):
        return ExtendedReal(-self.limbs)

    def __abs__(self):
        neg = self.limbs[..., 0:1] < 0.0
        return ExtendedReal(np.where(neg, -self.limbs, self.limbs))

    def scale(self, c: float) -> "ExtendedReal":
        """Multiply by a plain double (one rounding per limb pass)."""
        c = np.broadcast_to(np.float64(c), self.shape)
        return ExtendedReal(_MUL_D[self.nlimbs](self.limbs, c))

    def masked(self, mask) -> "ExtendedReal":
        """Exact elementwise multiply by a 0/1 mask."""
        m = np.asarray(mask, dtype=np.float64)
        return ExtendedReal(self.limbs * m[..., None])

    def sqrt(self) -> "ExtendedReal":
        return ExtendedReal(_SQRT[self.nlimbs](self.limbs))

    def renormalize(self) -> "ExtendedReal":
        return ExtendedReal(_renorm_limbs(self.limbs, self.nlimbs))

    # -- comparisons (value order, elementwise boolean ndarrays) -------

    def _cmp(self, other):
        other = self._coerce(other)
        return _cmp_limbs(self.limbs, other.limbs, self.nlimbs)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def eq(self, other):
        return self._cmp(other) == 0

    # -- conversions ---------------------------------------------------

    def to_float(self):
        """Nearest plain double per element (ndarray)."""
        acc = self.limbs[..., -1]
        for k in range(self.nlimbs - 2, -1, -1):
            acc = acc + self.limbs[..., k]
        return acc

    def __float__(self):
        if self.shape != ():
            raise TypeError("only scalar ExtendedReal converts to float")
        return float(self.to_float())

    def to_fraction(self) -> Fraction:
        if self.shape != ():
            raise TypeError("only scalar ExtendedReal converts to Fraction")
        return _limbs_to_fraction(self.limbs)

    def to_str(self, digits: int | None = None) -> str:
        if self.shape != ():
            raise TypeError("only scalar ExtendedReal formats to a string")
        if not np.all(np.isfinite(self.limbs)):
            return repr(float(self.limbs[0]))
        return _format_fraction(self.to_fraction(), digits or _DIGITS[self.level])

    def isfinite(self):
        return np.all(np.isfinite(self.limbs), axis=-1)

    def __str__(self):
        if self.shape == ():
            return self.to_str()
        return f"ExtendedReal(shape={self.shape}, level={self.level})"

    def __repr__(self):
        if self.shape == ():
            return f"ExtendedReal({self.limbs.tolist()}, level={self.level!r})"
        return self.__str__()


class ExtendedComplex:
    """Array of extended-precision complex numbers.

    Storage is a float64 ndarray of shape ``(..., 2, L)``; axis -2 holds
    the real and imaginary parts, axis -1 the limbs.
    """

    __slots__ = ("parts",)

    def __init__(self, parts):
        parts = np.asarray(parts, dtype=np.float64)
        if parts.ndim < 2 or parts.shape[-2] != 2 or parts.shape[-1] not in _LEVEL_OF:
            raise ValueError("expected shape (..., 2, L) with L in {1, 2, 4}")
        self.parts = parts

    # -- construction --------------------------------------------------

    @classmethod
    def zeros(cls, shape, level: str) -> "ExtendedComplex":
        if isinstance(shape, int):
            shape = (shape,)
        return cls(np.zeros(tuple(shape) + (2, _NLIMBS[level])))

    @classmethod
    def from_complex(cls, z, level: str) -> "ExtendedComplex":
        z = np.asarray(z, dtype=np.complex128)
        L = _NLIMBS[level]
        parts = np.zeros(z.shape + (2, L))
        parts[..., 0, 0] = z.real
        parts[..., 1, 0] = z.imag
        return cls(parts)

    @classmethod
    def from_parts(cls, re: ExtendedReal, im: ExtendedReal) -> "ExtendedComplex":
        if re.nlimbs != im.nlimbs:
            raise ValueError("precision level mismatch between parts")
        return cls(np.stack([re.limbs, im.limbs], axis=-2))

    @classmethod
    def from_str(cls, re_text: str, im_text: str, level: str) -> "ExtendedComplex":
        return cls.from_parts(
            ExtendedReal.from_str(re_text, level), ExtendedReal.from_str(im_text, level)
        )

    # -- structure -----------------------------------------------------

    @property
    def re(self) -> ExtendedReal:
        return ExtendedReal(self.parts[..., 0, :])

    @property
    def im(self) -> ExtendedReal:
        return ExtendedReal(self.parts[..., 1, :])

    @property
    def level(self) -> str:
        return _LEVEL_OF[self.parts.shape[-1]]

    @property
    def nlimbs(self) -> int:
        return self.parts.shape[-1]

    @property
    def shape(self):
        return self.parts.shape[:-2]

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx) -> "ExtendedComplex":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return ExtendedComplex(self.parts[idx + (slice(None), slice(None))])

    def reshape(self, *shape) -> "ExtendedComplex":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return ExtendedComplex(self.parts.reshape(tuple(shape) + (2, self.nlimbs)))

    def copy(self) -> "ExtendedComplex":
        return ExtendedComplex(self.parts.copy())

    # -- arithmetic ----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, ExtendedComplex):
            if other.nlimbs != self.nlimbs:
                raise ValueError(
                    f"precision level mismatch: {self.level} vs {other.level}"
                )
            return other
        if isinstance(other, ExtendedReal):
            return ExtendedComplex.from_parts(
                other, ExtendedReal.zeros(other.shape, other.level)
            )._coerce_check(self)
        if isinstance(other, (int, float, complex)):
            return ExtendedComplex.from_complex(complex(other), self.level)
        return NotImplemented

    def _coerce_check(self, ref):
        if self.nlimbs != ref.nlimbs:
            raise ValueError("precision level mismatch")
        return self

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedComplex(_ADD[self.nlimbs](self.parts, other.parts))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedComplex(_SUB[self.nlimbs](self.parts, other.parts))

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ExtendedComplex(_SUB[self.nlimbs](other.parts, self.parts))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        L = self.nlimbs
        x, y = np.broadcast_arrays(self.parts, other.parts)
        ar, ai = x[..., 0, :], x[..., 1, :]
        br, bi = y[..., 0, :], y[..., 1, :]
        p = _MUL[L](np.stack([ar, ai, ar, ai]), np.stack([br, bi, bi, br]))
        s = _ADD[L](np.stack([p[0], p[2]]), np.stack([-p[1], p[3]]))
        return ExtendedComplex(np.stack([s[0], s[1]], axis=-2))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._smith_div(other)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other._smith_div(self)

    def _smith_div(self, other):
        """Scaled complex division (Smith's formula), elementwise."""
        L = self.nlimbs
        x, y = np.broadcast_arrays(self.parts, other.parts)
        ar, ai = x[..., 0, :], x[..., 1, :]
        br, bi = y[..., 0, :], y[..., 1, :]
        swap = np.abs(bi[..., 0:1]) > np.abs(br[..., 0:1])
        u = np.where(swap, bi, br)
        v = np.where(swap, br, bi)
        r = _DIV[L](v, u)
        den = _ADD[L](u, _MUL[L](v, r))
        t = _MUL[L](np.stack([ar, ai]), np.stack([r, r]))
        t1, t2 = t[0], t[1]  # ar*r, ai*r
        re_num = np.where(swap, _ADD[L](t1, ai), _ADD[L](ar, t2))
        im_num = np.where(swap, _SUB[L](t2, ar), _SUB[L](ai, t1))
        q = _DIV[L](np.stack([re_num, im_num]), np.stack([den, den]))
        return ExtendedComplex(np.stack([q[0], q[1]], axis=-2))

    def __neg__(self):
        return ExtendedComplex(-self.parts)

    def conj(self) -> "ExtendedComplex":
        parts = self.parts.copy()
        parts[..., 1, :] = -parts[..., 1, :]
        return ExtendedComplex(parts)

    def scale(self, c: float) -> "ExtendedComplex":
        c = np.broadcast_to(np.float64(c), self.parts.shape[:-1])
        return ExtendedComplex(_MUL_D[self.nlimbs](self.parts, c))

    def scale_real(self, c: ExtendedReal) -> "ExtendedComplex":
        """Multiply by an extended real factor."""
        L = self.nlimbs
        if c.nlimbs != L:
            raise ValueError("precision level mismatch")
        limbs = np.broadcast_to(c.limbs[..., None, :], self.parts.shape)
        return ExtendedComplex(_MUL[L](self.parts, limbs))

    def masked(self, mask) -> "ExtendedComplex":
        m = np.asarray(mask, dtype=np.float64)
        return ExtendedComplex(self.parts * m[..., None, None])

    def abs2(self) -> ExtendedReal:
        """Squared modulus, |re|^2 + |im|^2."""
        L = self.nlimbs
        p = _MUL[L](self.parts, self.parts)
        return ExtendedReal(_ADD[L](p[..., 0, :], p[..., 1, :]))

    def __abs__(self) -> ExtendedReal:
        return self.abs2().sqrt()

    # -- conversions ---------------------------------------------------

    def to_complex(self):
        acc = self.parts[..., -1]
        for k in range(self.nlimbs - 2, -1, -1):
            acc = acc + self.parts[..., k]
        return acc[..., 0] + 1j * acc[..., 1]

    def __complex__(self):
        if self.shape != ():
            raise TypeError("only scalar ExtendedComplex converts to complex")
        return complex(self.to_complex())

    def isfinite(self):
        return np.all(np.isfinite(self.parts), axis=(-1, -2))

    def __str__(self):
        if self.shape == ():
            return f"({self.re.to_str()}, {self.im.to_str()})"
        return f"ExtendedComplex(shape={self.shape}, level={self.level})"

    __repr__ = __str__


# ----------------------------------------------------------------------
# functional dispatch and reductions
# ----------------------------------------------------------------------

_ARITH_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def arith(op: str, a: ExtendedReal, b: ExtendedReal | None = None) -> ExtendedReal:
    """Named real arithmetic.

    op is one of 'add', 'sub', 'mul', 'div' (binary) or 'sqrt', 'abs',
    'cmp' ('cmp' returns the sign of a - b as a 1-limb-exact value).
    """
    if op == "sqrt":
        return a.sqrt()
    if op == "abs":
        return abs(a)
    if op == "cmp":
        return ExtendedReal.from_float(a._cmp(b), a.level)
    return _ARITH_OPS[op](a, b)


def complex_arith(
    op: str, a: ExtendedComplex, b: ExtendedComplex | None = None
) -> ExtendedComplex:
    """Named complex arithmetic: op in {'add', 'sub', 'mul', 'div'}."""
    return _ARITH_OPS[op](a, b)


def reduce_sum(x, axis: int = 0):
    """Deterministic pairwise sum of ExtendedReal/ExtendedComplex along an axis.

    The reduction tree depends only on the length of the axis, so results
    are bitwise reproducible for a fixed input regardless of thread count.
    """
    if isinstance(x, ExtendedReal):
        limbs = np.moveaxis(x.limbs, axis, 0)
        return ExtendedReal(_pairwise(limbs, _ADD[x.nlimbs]))
    limbs = np.moveaxis(x.parts, axis if axis >= 0 else axis - 2, 0)
    return ExtendedComplex(_pairwise(limbs, _ADD[x.nlimbs]))
