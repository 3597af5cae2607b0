"""Three-term Lanczos recurrence with reorthogonalization, plus the Gauss
quadrature evaluation e1^T f(T_m) e1 on the resulting Jacobi matrix.

Reorthogonalization modes:

* ``full``    -- orthogonalize every new vector against the whole stored
  basis (second pass when the first one removes most of the vector).
* ``partial`` -- track the loss-of-orthogonality recurrence and
  orthogonalize only when the estimated inner products exceed
  sqrt(machine epsilon); the step after a correction is corrected too.
* ``none``    -- plain recurrence (kept for the loss-of-orthogonality
  study; do not use for production estimates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractViolationError,
    NumericalFailureError,
    QuadratureDomainError,
)
from .operators import LinearOperator

REORTH_MODES = ("none", "full", "partial")

BREAKDOWN_REL_TOL = 1e-13

_EPS = np.finfo(float).eps
_SQRT_EPS = math.sqrt(_EPS)


@dataclass
class SymTridiagonal:
    """Jacobi matrix: diagonal alphas (m) and off-diagonal betas (m - 1)."""

    alphas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        self.betas = np.asarray(self.betas, dtype=float)
        if len(self.betas) != max(len(self.alphas) - 1, 0):
            raise ContractViolationError(
                f"off-diagonal length {len(self.betas)} does not match order "
                f"{len(self.alphas)}"
            )

    @property
    def m(self) -> int:
        return len(self.alphas)

    def to_dense(self) -> np.ndarray:
        T = np.diag(self.alphas)
        if self.m > 1:
            T += np.diag(self.betas, 1) + np.diag(self.betas, -1)
        return T


@dataclass
class TridiagEigen:
    """Eigenvalues (ascending) and first components of orthonormal eigenvectors."""

    thetas: np.ndarray
    first_row: np.ndarray


def tridiag_eigen(T: SymTridiagonal) -> TridiagEigen:
    """All eigenvalues of T and the first row of its eigenvector matrix.

    Implicit-shift QL on the tridiagonal, accumulating each plane rotation
    against e1 only, so the quadrature weights cost O(m^2) in total.  Raises
    after 50 sweeps on any single eigenvalue.
    """
    m = T.m
    if m < 1:
        raise ContractViolationError("tridiag_eigen needs order >= 1")
    d = T.alphas.copy()
    e = np.zeros(m)
    e[: m - 1] = T.betas
    z = np.zeros(m)
    z[0] = 1.0
    for l in range(m):
        iterations = 0
        while True:
            mm = l
            while mm < m - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    break
                mm += 1
            if mm == l:
                break
            iterations += 1
            if iterations > 50:
                raise NumericalFailureError(
                    f"tridiagonal eigensolver did not converge for index {l}"
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[mm] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(mm - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                fz = z[i + 1]
                z[i + 1] = s * z[i] + c * fz
                z[i] = c * z[i] - s * fz
            if not underflow:
                d[l] -= p
                e[l] = g
                e[mm] = 0.0
    order = np.argsort(d, kind="stable")
    return TridiagEigen(d[order], z[order])


def quadrature_value(T: SymTridiagonal, f) -> float:
    """Gauss-quadrature value e1^T f(T) e1 = sum_k S_1k^2 f(theta_k)."""
    eig = tridiag_eigen(T)
    with np.errstate(all="ignore"):
        values = np.asarray(f(eig.thetas), dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        theta = eig.thetas[bad][0]
        raise QuadratureDomainError(
            f"f undefined at quadrature node theta={theta}", theta=theta
        )
    return float(np.sum(eig.first_row**2 * values))


class LanczosState:
    """State of one Lanczos run: stored basis, Jacobi coefficients, and the
    loss-of-orthogonality recurrence (partial mode)."""

    def __init__(self, op: LinearOperator, u, reorth_mode: str = "full",
                 m_max: int = 2000, breakdown_rel_tol: float = BREAKDOWN_REL_TOL,
                 restart_seed: int = 0):
        if reorth_mode not in REORTH_MODES:
            raise ContractViolationError(f"unknown reorth mode {reorth_mode!r}")
        u = np.asarray(u, dtype=float)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            raise ContractViolationError("Lanczos start vector must be nonzero")
        if u.shape != (op.dim,):
            raise ContractViolationError(
                f"start vector shape {u.shape} does not match operator dim {op.dim}"
            )
        self.op = op
        self.norm_sq = float(norm**2)
        self.reorth_mode = reorth_mode
        self.m_max = int(m_max)
        self.breakdown_rel_tol = float(breakdown_rel_tol)
        self.m = 0
        self.alphas: list = []
        self.betas: list = []          # betas[j] = beta_{j+2}
        self.breakdown = False
        self.restarts = 0
        self._norm_estimate = 0.0
        self._rng = np.random.Generator(np.random.Philox(key=np.uint64(restart_seed)))
        self._capacity = 16
        self._basis = np.empty((self._capacity, op.dim))
        self._basis[0] = u / norm
        self._nstored = 1
        # partial-mode state: omega rows for the two latest vectors
        self._omega_prev = np.zeros(0)
        self._omega_cur = np.ones(1)
        self._force_reorth = False

    # -- basis bookkeeping -------------------------------------------------

    def basis(self) -> np.ndarray:
        return self._basis[: self._nstored]

    def _append_vector(self, v):
        if self._nstored == self._capacity:
            self._capacity = min(max(2 * self._capacity, 16), max(self.m_max + 1, 16))
            grown = np.empty((self._capacity, self.op.dim))
            grown[: self._nstored] = self._basis[: self._nstored]
            self._basis = grown
        self._basis[self._nstored] = v
        self._nstored += 1

    def tridiagonal(self, m: int | None = None) -> SymTridiagonal:
        m = self.m if m is None else m
        if not 1 <= m <= self.m:
            raise ContractViolationError(f"no Jacobi matrix of order {m} available")
        return SymTridiagonal(np.array(self.alphas[:m]), np.array(self.betas[: m - 1]))

    # -- reorthogonalization ----------------------------------------------

    def _orthogonalize(self, w, upto):
        V = self._basis[:upto]
        w -= V.T @ (V @ w)
        return w

    def _omega_advance(self, beta_next):
        """One row of the loss-of-orthogonality recurrence (partial mode)."""
        k = self.m            # just completed step k, have omega rows k-1, k
        alphas, betas = self.alphas, self.betas
        omega_new = np.empty(k + 1)
        omega_new[k] = 1.0
        psi = _EPS * self.op.dim * (betas[0] if betas else 1.0) / max(beta_next, 1e-300)
        omega_new[k - 1] = psi if k >= 1 else 1.0
        if k >= 2:
            j = np.arange(k - 1)
            beta_j1 = np.array(betas[:k - 1])        # beta_{j+2} linking j+1,j+2
            omega_up = self._omega_cur[1:k]
            omega_mid = self._omega_cur[:k - 1]
            omega_down = np.concatenate([[0.0], self._omega_cur[: k - 2]])
            beta_jm = np.concatenate([[0.0], betas[: k - 2]])
            alpha_j = np.array(alphas[: k - 1])
            beta_k = betas[k - 2] if k >= 2 else 0.0
            prev = self._omega_prev[: k - 1] if len(self._omega_prev) >= k - 1 else \
                np.zeros(k - 1)
            noise = _EPS * 0.3 * (beta_j1 + beta_next)
            omega_new[: k - 1] = (
                beta_j1 * omega_up
                + (alpha_j - alphas[k - 1]) * omega_mid
                + beta_jm * omega_down
                - beta_k * prev
            ) / beta_next + noise
        self._omega_prev = self._omega_cur
        self._omega_cur = omega_new

    def max_basis_inner_product(self) -> float:
        """max_{j<k} |v_j . v_k| against the newest vector (testing hook)."""
        if self._nstored < 2:
            return 0.0
        V = self._basis[: self._nstored - 1]
        return float(np.max(np.abs(V @ self._basis[self._nstored - 1])))


def lanczos_init(op: LinearOperator, u, reorth_mode: str = "full",
                 m_max: int = 2000, restart_seed: int = 0) -> LanczosState:
    """Normalize the start vector; record ||u||^2 for the bilinear form."""
    return LanczosState(op, u, reorth_mode=reorth_mode, m_max=m_max,
                        restart_seed=restart_seed)


def lanczos_step(state: LanczosState, on_breakdown: str = "stop"):
    """One Lanczos step: returns (alpha_m, beta_{m+1}).

    On breakdown (beta below the scale-aware tolerance) the subspace is
    invariant and the quadrature exact; with ``on_breakdown='stop'`` the
    state is flagged and beta_{m+1} = 0 is returned.  With ``'restart'`` a
    random unit vector orthogonal to the stored basis continues the run,
    keeping the factorization valid with a zero coupling coefficient.
    """
    if state.breakdown and on_breakdown == "stop":
        raise ContractViolationError("Lanczos run already terminated by breakdown")
    if state.m >= state.op.dim:
        raise ContractViolationError("cannot exceed the operator dimension")
    if state.m >= state.m_max:
        raise ContractViolationError(f"m_max={state.m_max} steps exhausted")
    k = state.m
    v = state._basis[k]
    w = state.op(v)
    alpha = float(v @ w)
    w -= alpha * v
    if k > 0:
        w -= state.betas[k - 1] * state._basis[k - 1]
    state._norm_estimate = max(state._norm_estimate,
                               abs(alpha) + (state.betas[k - 1] if k > 0 else 0.0))

    if state.reorth_mode == "full":
        norm_before = np.linalg.norm(w)
        w = state._orthogonalize(w, k + 1)
        if np.linalg.norm(w) < norm_before / math.sqrt(2.0):
            w = state._orthogonalize(w, k + 1)

    beta = float(np.linalg.norm(w))
    state.alphas.append(alpha)
    state.m += 1

    tol = state.breakdown_rel_tol * max(state._norm_estimate, 1.0)
    if beta <= tol:
        if on_breakdown == "restart" and state.m < state.op.dim:
            fresh = None
            for _ in range(3):
                cand = state._rng.standard_normal(state.op.dim)
                cand = state._orthogonalize(cand, state.m)
                cand = state._orthogonalize(cand, state.m)
                nrm = np.linalg.norm(cand)
                if nrm > 1e-6:
                    fresh = cand / nrm
                    break
            if fresh is None:
                state.breakdown = True
                return alpha, 0.0
            state.betas.append(0.0)
            state._append_vector(fresh)
            state.restarts += 1
            state._omega_prev = np.zeros(state.m)
            state._omega_cur = np.ones(state.m + 1)
            state._omega_cur[:-1] = _EPS
            return alpha, 0.0
        state.breakdown = True
        return alpha, 0.0

    if state.reorth_mode == "partial":
        state._omega_advance(beta)
        if state._force_reorth or np.max(np.abs(state._omega_cur[:-1])) > _SQRT_EPS:
            w = state._orthogonalize(w, state.m)
            w = state._orthogonalize(w, state.m)
            beta_new = float(np.linalg.norm(w))
            state._force_reorth = not state._force_reorth
            state._omega_cur[:-1] = _EPS
            if beta_new <= tol:
                state.breakdown = True
                return alpha, 0.0
            beta = beta_new

    state.betas.append(beta)
    state._append_vector(w / beta)
    return alpha, beta


def bilinear_estimate(state: LanczosState, f) -> float:
    """||u||^2 e1^T f(T_m) e1 for the current Jacobi matrix."""
    if state.m < 1:
        raise ContractViolationError("no Lanczos steps taken yet")
    return state.norm_sq * quadrature_value(state.tridiagonal(), f)


def lanczos_run(op: LinearOperator, u, steps: int, reorth_mode: str = "full",
                on_breakdown: str = "stop") -> LanczosState:
    """Run up to ``steps`` Lanczos steps (stops early on breakdown)."""
    state = lanczos_init(op, u, reorth_mode=reorth_mode,
                         m_max=max(steps, 1))
    for _ in range(steps):
        lanczos_step(state, on_breakdown=on_breakdown)
        if state.breakdown:
            break
    return state
