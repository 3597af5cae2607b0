"""Rational approximants r_K(x) = const + Re sum_k c_k / (x - z_k).

Four families are supported on a positive spectrum interval [a, b]:

* ``exp_neg``   -- exp(-x), best-uniform (Caratheodory-Fejer) poles computed
  from a Chebyshev transplant of the exponential; a parabolic-contour
  quadrature serves as fallback for orders the CF construction cannot
  reach in double precision.
* ``sqrt``      -- sqrt(x), trapezoid rule on an imaginary-axis substitution;
  all poles land on the negative real axis.
* ``log``       -- log(x), trapezoid rule on a conformal map of the right
  half-plane slit along [sqrt(a), sqrt(b)]; produces the canonical pole sum
  plus an additive constant (the constant cancels in differences).
* ``tanh_sqrt`` -- tanh(sqrt(x)), trapezoid rule on a conformal map of the
  doubly slit plane.

Poles come in conjugate pairs; only the upper-half-plane member of each
pair is stored, with its coefficient doubled, so evaluation takes a real
part of a K-term sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hankel
from scipy.special import ellipj

from .elliptic import complete_k, jacobi_cplx
from .errors import (
    ContractViolationError,
    PoleEvaluationError,
    UnreachableAccuracyError,
    UnsupportedParameterError,
)

KINDS = ("exp_neg", "sqrt", "log", "tanh_sqrt")

K_SCHEDULE = range(1, 41)

# Largest half-pair order the CF construction supports before the governing
# singular value sinks below double-precision roundoff.
CF_MAX_K = 7

_CF_SCL_GRID = (2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 9.0)

UNIFORM_ERROR_SAMPLES = 10_000


def kind_function(kind):
    """Scalar function f associated with an approximant kind (vectorized)."""
    table = {
        "exp_neg": lambda x: np.exp(-x),
        "sqrt": np.sqrt,
        "log": np.log,
        "tanh_sqrt": lambda x: np.tanh(np.sqrt(x)),
    }
    try:
        return table[kind]
    except KeyError:
        raise UnsupportedParameterError(f"unknown function kind {kind!r}") from None


@dataclass(frozen=True)
class RationalApproximant:
    """Pole/coefficient form of r_K, valid on the interval [a, b]."""

    kind: str
    interval: tuple
    poles: np.ndarray
    coeffs: np.ndarray
    constant: float
    K: int
    eps: float = field(default=np.nan)
    method: str = ""

    def __call__(self, x):
        return evaluate(self, x)

    def function(self):
        return kind_function(self.kind)

    def to_json_dict(self):
        return {
            "kind": self.kind,
            "interval": [float(self.interval[0]), float(self.interval[1])],
            "K": int(self.K),
            "poles": [[z.real, z.imag] for z in self.poles],
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
            "constant": float(self.constant),
            "eps": float(self.eps),
            "method": self.method,
        }

    def dumps(self):
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            kind=d["kind"],
            interval=(d["interval"][0], d["interval"][1]),
            poles=np.array([complex(re, im) for re, im in d["poles"]]),
            coeffs=np.array([complex(re, im) for re, im in d["coeffs"]]),
            constant=d["constant"],
            K=d["K"],
            eps=d["eps"],
            method=d.get("method", ""),
        )

    @classmethod
    def loads(cls, s):
        return cls.from_json_dict(json.loads(s))


def evaluate(r: RationalApproximant, x):
    """r(x) = constant + Re sum_k c_k / (x - z_k) for real x (scalar or array)."""
    x_arr = np.asarray(x, dtype=float)
    diff = x_arr[..., None] - r.poles
    if np.any(diff == 0):
        bad = r.poles[np.any(diff == 0, axis=tuple(range(x_arr.ndim)))][0]
        raise PoleEvaluationError(f"evaluation point coincides with pole {bad}")
    val = r.constant + np.sum(r.coeffs / diff, axis=-1).real
    return val if np.ndim(x) else float(val)


def _chebyshev_sample(a, b, n):
    theta = (np.arange(n) + 0.5) * np.pi / n
    x = 0.5 * (a + b) + 0.5 * (b - a) * np.cos(theta)
    return np.concatenate([[a], x[::-1], [b]])


def uniform_error(r: RationalApproximant, f, samples=UNIFORM_ERROR_SAMPLES):
    """max |f(x) - r(x)| over a Chebyshev-point sample of [a, b] plus endpoints."""
    a, b = r.interval
    x = _chebyshev_sample(a, b, samples)
    return float(np.max(np.abs(f(x) - evaluate(r, x))))


def pole_interval_distance(poles, a, b):
    """Smallest distance from any pole to the real segment [a, b]."""
    poles = np.asarray(poles, dtype=complex)
    re, im = poles.real, poles.imag
    inside = (re >= a) & (re <= b)
    d_inside = np.abs(im)
    d_outside = np.minimum(np.abs(poles - a), np.abs(poles - b))
    return float(np.min(np.where(inside, d_inside, d_outside)))


def _check_interval(interval, positive_lower):
    a, b = float(interval[0]), float(interval[1])
    if positive_lower and not 0 < a < b:
        raise ContractViolationError(f"interval must satisfy 0 < a < b, got [{a}, {b}]")
    if not positive_lower and not 0 <= a < b:
        raise ContractViolationError(f"interval must satisfy 0 <= a < b, got [{a}, {b}]")
    return a, b


def _finish(kind, interval, poles, coeffs, constant, K, method):
    poles = np.asarray(poles, dtype=complex)
    coeffs = np.asarray(coeffs, dtype=complex)
    a, b = interval
    if pole_interval_distance(poles, a, b) <= 0:
        raise ContractViolationError(f"{kind} construction produced a pole inside [{a}, {b}]")
    r = RationalApproximant(kind, (a, b), poles, coeffs, float(constant), int(K), method=method)
    eps = uniform_error(r, kind_function(kind))
    return RationalApproximant(kind, (a, b), poles, coeffs, float(constant), int(K), eps, method)


# ----------------------------------------------------------------------
# exp(-x): Caratheodory-Fejer on a Chebyshev transplant of the negative
# real axis.  Pole/residue sets depend only on the order n = 2K and the
# transplant scale, so candidates are cached per order and the best scale
# is picked by measured error on the requested interval.
# ----------------------------------------------------------------------

_cf_cache: dict = {}


def _cf_candidates(n):
    if n in _cf_cache:
        return _cf_cache[n]
    nf = 1024
    w = np.exp(2j * np.pi * np.arange(nf) / nf)
    t = w.real
    out = []
    for scl in _CF_SCL_GRID:
        F = np.exp(scl * (t - 1) / (t + 1 + 1e-16))
        c = np.fft.fft(F).real / nf
        H = hankel(c[1 : nf // 2 + 1])
        U, S, Vh = np.linalg.svd(H)
        u = U[::-1, n]
        v = Vh[n, :]
        pad = np.zeros(nf - len(u))
        blaschke = np.fft.fft(np.concatenate([u, pad])) / np.fft.fft(np.concatenate([v, pad]))
        f_anal = np.polyval(c[nf // 2 :: -1], w)
        rt = f_anal - S[n] * w**n * blaschke
        roots = np.roots(v)
        qk = roots[np.abs(roots) > 1.0]
        if len(qk) != n:
            continue
        qc = np.poly(qk)
        numer = (np.fft.fft(rt * np.polyval(qc, w)).real / nf)[n::-1]
        ck = np.empty(n, dtype=complex)
        for j in range(n):
            others = np.poly(qk[np.arange(n) != j])
            ck[j] = np.polyval(numer, qk[j]) / np.polyval(others, qk[j])
        zk = scl * (qk - 1) ** 2 / (qk + 1) ** 2
        ck = 4 * ck * zk / (qk**2 - 1)
        # poles/coefficients of r ~ e^x on the negative axis; flip for exp(-x)
        poles = -zk
        coeffs = -ck
        sel = poles.imag > 0
        if sel.sum() != n // 2:
            continue
        out.append((poles[sel], 2 * coeffs[sel]))
    _cf_cache[n] = out
    return out


def _parabolic_exp_neg(K):
    n = 2 * K
    theta = -np.pi + (np.arange(n) + 0.5) * 2 * np.pi / n
    z = n * (0.1309 - 0.1194 * theta**2 + 0.2500j * theta)
    dz = n * (-2 * 0.1194 * theta + 0.2500j)
    h = 2 * np.pi / n
    # e^y = sum w_j (z_j - y)^{-1} with w_j = (h/2 pi i) e^{z_j} z'_j; the
    # sign flips from (z - y) to (y - z) and from y to -x cancel
    coeffs = h / (2j * np.pi) * np.exp(z) * dz
    poles = -z
    sel = poles.imag > 0
    return poles[sel], 2 * coeffs[sel]


def build_exp(K, interval):
    """Pole/coefficient form for exp(-x); K conjugate pairs kept.

    Orders up to CF_MAX_K use the best-uniform construction; beyond that a
    parabolic-contour quadrature is substituted (recorded in ``method``).
    """
    a, b = _check_interval(interval, positive_lower=False)
    if K not in K_SCHEDULE:
        raise UnsupportedParameterError(f"exp_neg supports K in [1, 40], got {K}")
    f = kind_function("exp_neg")
    if K <= CF_MAX_K:
        candidates = _cf_candidates(2 * K)
        if not candidates:
            raise UnsupportedParameterError(f"CF construction failed for K={K}")
        probe = _chebyshev_sample(a, b, 512)
        best = None
        for poles, coeffs in candidates:
            trial = RationalApproximant("exp_neg", (a, b), poles, coeffs, 0.0, K)
            err = np.max(np.abs(f(probe) - evaluate(trial, probe)))
            if best is None or err < best[0]:
                best = (err, poles, coeffs)
        return _finish("exp_neg", (a, b), best[1], best[2], 0.0, K, "cf")
    poles, coeffs = _parabolic_exp_neg(K)
    return _finish("exp_neg", (a, b), poles, coeffs, 0.0, K, "parabolic")


# ----------------------------------------------------------------------
# sqrt(x): substitute t = sqrt(a) sc(y, 1-m) in
# sqrt(x) = (2x/pi) * integral_0^inf (t^2 + x)^{-1} dt, midpoint rule on
# y in (0, K').  All poles -t_j^2 are real negative.
# ----------------------------------------------------------------------

def build_sqrt(K, interval):
    """Pole/coefficient form for sqrt(x); K real negative poles."""
    a, b = _check_interval(interval, positive_lower=True)
    if K not in K_SCHEDULE:
        raise UnsupportedParameterError(f"sqrt supports K in [1, 40], got {K}")
    m = a / b
    Kp = complete_k(1.0 - m)
    y = (np.arange(K) + 0.5) * Kp / K
    s1, c1, d1, _ = ellipj(y, 1.0 - m)
    t = np.sqrt(a) * s1 / c1
    dt = np.sqrt(a) * d1 / c1**2
    pref = 2.0 * Kp / (np.pi * K)
    poles = -(t**2)
    coeffs = pref * dt * poles
    constant = pref * np.sum(dt)
    return _finish("sqrt", (a, b), poles, coeffs, constant, K, "imag-axis")


def _slit_map_nodes(a, b, K, quarter_power):
    """Midline nodes of the rectangle-to-slit-domain conformal map.

    With ``quarter_power`` the map lives in the s-plane (s^2 = z) and the
    modulus derives from (b/a)^(1/4); otherwise it acts in the z-plane with
    modulus from (b/a)^(1/2).
    """
    ratio = (b / a) ** (0.25 if quarter_power else 0.5)
    k = (ratio - 1) / (ratio + 1)
    m = k * k
    Kv = complete_k(m)
    Kp = complete_k(1.0 - m)
    u = -Kv + (np.arange(K) + 0.5) * 2.0 * Kv / K + 0.5j * Kp
    sn, cn, dn = jacobi_cplx(u, m)
    mid = (a * b) ** (0.25 if quarter_power else 0.5)
    w = mid * (1 / k + sn) / (1 / k - sn)
    dw = mid * (2 / k) * cn * dn / (1 / k - sn) ** 2
    h = 2.0 * Kv / K
    return w, dw, h


def build_log(K, interval):
    """Pole/coefficient form plus additive constant for log(x).

    Built in the s-plane (z = s^2): the contour encircles [sqrt(a), sqrt(b)]
    away from the imaginary axis, where log(s^2) is singular.  Rewriting
    x (z - x)^{-1} = -1 + z (z - x)^{-1} turns the quadrature into the
    canonical pole sum plus a constant; the constant drops out of any
    difference of two evaluations.
    """
    a, b = _check_interval(interval, positive_lower=True)
    if K not in K_SCHEDULE:
        raise UnsupportedParameterError(f"log supports K in [1, 40], got {K}")
    s, ds, h = _slit_map_nodes(a, b, K, quarter_power=True)
    z = s**2
    pref = -2.0 * h / np.pi
    constant = -pref * np.sum((np.log(z) / s) * ds).imag
    coeffs = 1j * pref * np.log(z) * s * ds
    return _finish("log", (a, b), z, coeffs, constant, K, "half-plane-slit")


def build_tanh_sqrt(K, interval):
    """Pole/coefficient form for tanh(sqrt(x)).

    Contour encircles [a, b] in the doubly slit plane; the poles of
    tanh(sqrt(z)) sit on the negative real axis, outside the contour.
    """
    a, b = _check_interval(interval, positive_lower=True)
    if K not in K_SCHEDULE:
        raise UnsupportedParameterError(f"tanh_sqrt supports K in [1, 40], got {K}")
    z, dz, h = _slit_map_nodes(a, b, K, quarter_power=False)
    fz = np.tanh(np.sqrt(z))
    coeffs = -1j * (h / np.pi) * fz * dz
    return _finish("tanh_sqrt", (a, b), z, coeffs, 0.0, K, "double-slit")


_BUILDERS = {
    "exp_neg": build_exp,
    "sqrt": build_sqrt,
    "log": build_log,
    "tanh_sqrt": build_tanh_sqrt,
}


def build(kind, K, interval):
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise UnsupportedParameterError(f"unknown function kind {kind!r}") from None
    return builder(K, interval)


def choose_K(kind, interval, target):
    """Smallest K in the ascending schedule with uniform error <= target."""
    if not target > 0:
        raise ContractViolationError(f"target accuracy must be positive, got {target}")
    best_k, best_eps = None, np.inf
    for K in K_SCHEDULE:
        r = build(kind, K, interval)
        if r.eps <= target:
            return r
        if r.eps < best_eps:
            best_k, best_eps = K, r.eps
    raise UnreachableAccuracyError(
        f"no {kind} approximant on {interval} reaches {target:.3e} "
        f"(best eps={best_eps:.3e} at K={best_k})",
        best_k=best_k,
        best_eps=best_eps,
    )
