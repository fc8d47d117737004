"""Inverted-Y four-level atom: Hamiltonian, Lindblad generator and steady state.

Levels are labelled 1..4 as in the usual inverted-Y diagram: |1> and |2> are
ground states, |3> the shared intermediate state and |4> the upper state.
The coupling field drives |2>-|3>, pump and probe share |3>-|4>, and a weak
seed may be placed on |1>-|3>.

All rates, Rabi frequencies and detunings are angular (rad/us, i.e. 2*pi*MHz).
Density matrices are vectorised column-by-column (Fortran order), so that
``vec(A @ rho @ B) = kron(B.T, A) @ vec(rho)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, NotConverged, SingularSystem

TWO_PI = 2.0 * math.pi
DIM = 4

# residual accepted from the trace-constrained linear solve
STEADY_RESIDUAL = 1e-10
# smallest singular value ratio tolerated before declaring rank deficiency
SINGULAR_RCOND = 1e-13


def mhz(value):
    """Convert ordinary frequency in MHz to angular units (2*pi*MHz)."""
    if np.ndim(value):
        return TWO_PI * np.asarray(value, dtype=float)
    return TWO_PI * float(value)


def _check_finite(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite, got {value!r}")


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(DIM, DIM, order="F")


TRACE_ROW = vec(np.eye(DIM)).astype(complex)


# ----------------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class AtomScheme:
    """Decay and relaxation rates of the four-level system.

    Parameters
    ----------
    gamma : float
        Total decay rate of |3>, split into |1> and |2> by ``b1`` and ``b2``.
    Gamma : float
        Decay rate of |4> into |3>.
    gamma_g : float, optional
        Population exchange rate between |1> and |2> (each way). Defaults to
        ``1e-3 * gamma``.
    gamma_12 : float, optional
        Pure dephasing of the ground-state coherence. Defaults to
        ``1e-3 * gamma``.
    b1 : float
        Branching ratio of |3> into |1>; ``b2 = 1 - b1``.
    """

    gamma: float = TWO_PI * 3.0
    Gamma: float = TWO_PI * 1.0
    gamma_g: float | None = None
    gamma_12: float | None = None
    b1: float = 0.5

    def __post_init__(self):
        if self.gamma_g is None:
            object.__setattr__(self, "gamma_g", 1e-3 * self.gamma)
        if self.gamma_12 is None:
            object.__setattr__(self, "gamma_12", 1e-3 * self.gamma)
        for name in ("gamma", "Gamma", "gamma_g", "gamma_12", "b1"):
            _check_finite(name, getattr(self, name))
        if self.gamma <= 0 or self.Gamma <= 0:
            raise ValueError("gamma and Gamma must be positive")
        if self.gamma_g <= 0:
            raise ValueError("gamma_g must be positive (unique steady state)")
        if self.gamma_12 < 0:
            raise ValueError("gamma_12 must be non-negative")
        if not 0.0 <= self.b1 <= 1.0:
            raise ValueError(f"b1 must lie in [0, 1], got {self.b1}")

    @property
    def b2(self) -> float:
        return 1.0 - self.b1


@dataclass(frozen=True)
class DriveFields:
    """Rabi frequencies and detunings of the four fields.

    The rotating frame is only time independent when pump and probe are
    degenerate and the seed is two-photon resonant with the coupling, so
    ``delta_p`` and ``delta_c`` follow ``delta_1`` and ``delta_2``. Passing
    an inconsistent value raises ``ValueError``.
    """

    omega_c: complex = 0.0
    omega_p: float = 0.0
    omega_pr: float = 0.0
    omega_s: float = 0.0
    delta_1: float = 0.0
    delta_2: float = 0.0
    delta_c: float | None = None
    delta_p: float | None = None

    def __post_init__(self):
        for name in ("omega_c", "omega_p", "omega_pr", "omega_s", "delta_1", "delta_2"):
            _check_finite(name, getattr(self, name))
        for name, ref in (("delta_c", self.delta_2), ("delta_p", self.delta_1)):
            given = getattr(self, name)
            if given is None:
                object.__setattr__(self, name, ref)
            elif not math.isclose(given, ref, rel_tol=1e-12, abs_tol=1e-12):
                raise ValueError(
                    f"{name} = {given} breaks the static frame (must equal {ref})"
                )


@dataclass(frozen=True)
class DensityMatrix:
    """A 4x4 density matrix. Invariants are checked by :meth:`validate`."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (DIM, DIM):
            raise ValueError(f"density matrix must be 4x4, got {rho.shape}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-10,
                 psd_tol: float = 1e-8) -> None:
        rho = self.rho
        if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > trace_tol:
            raise ValueError(f"trace is {np.trace(rho)}, expected 1")
        if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -psd_tol:
            raise ValueError("density matrix is not positive semidefinite")

    @classmethod
    def pure(cls, level: int) -> "DensityMatrix":
        rho = np.zeros((DIM, DIM), complex)
        rho[level - 1, level - 1] = 1.0
        return cls(rho)


@dataclass(frozen=True)
class Liouvillian:
    """Lindblad generator acting on column-stacked density matrices."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (DIM * DIM, DIM * DIM):
            raise ValueError(f"Liouvillian must be 16x16, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))


# ----------------------------------------------------------------------------
# Construction
# ----------------------------------------------------------------------------

def _ket_bra(i: int, j: int) -> np.ndarray:
    op = np.zeros((DIM, DIM), complex)
    op[i - 1, j - 1] = 1.0
    return op


def build_hamiltonian(scheme: AtomScheme, drives: DriveFields) -> np.ndarray:
    """Rotating-frame Hamiltonian (angular units, hbar = 1)."""
    if abs(drives.omega_s) > 1e-2 * scheme.gamma * (1 + 1e-12):
        raise ValueError(
            f"seed Rabi frequency {abs(drives.omega_s):g} exceeds 1e-2 * gamma"
        )
    h = np.zeros((DIM, DIM), complex)
    h[2, 2] = -drives.delta_2
    h[3, 3] = -(drives.delta_2 + drives.delta_1)
    h[0, 2] = -drives.omega_s / 2
    h[1, 2] = -drives.omega_c / 2
    h[2, 3] = -(drives.omega_p + drives.omega_pr) / 2
    upper = np.triu(h, 1)
    return h + upper.conj().T


def collapse_operators(scheme: AtomScheme) -> list[np.ndarray]:
    ops = [
        math.sqrt(scheme.b1 * scheme.gamma) * _ket_bra(1, 3),
        math.sqrt(scheme.b2 * scheme.gamma) * _ket_bra(2, 3),
        math.sqrt(scheme.Gamma) * _ket_bra(3, 4),
        math.sqrt(scheme.gamma_g) * _ket_bra(1, 2),
        math.sqrt(scheme.gamma_g) * _ket_bra(2, 1),
        math.sqrt(scheme.gamma_12 / 2) * (_ket_bra(1, 1) - _ket_bra(2, 2)),
    ]
    return [op for op in ops if np.any(op)]


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> -i[h, rho]``."""
    eye = np.eye(DIM)
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def dissipator_superop(ops) -> np.ndarray:
    eye = np.eye(DIM)
    out = np.zeros((DIM * DIM, DIM * DIM), complex)
    for c in ops:
        cdc = c.conj().T @ c
        out += np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)
    return out


def lindblad_action(h: np.ndarray, ops, rho: np.ndarray) -> np.ndarray:
    """Right-hand side of the master equation evaluated directly on ``rho``."""
    out = -1j * (h @ rho - rho @ h)
    for c in ops:
        cd = c.conj().T
        out += c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)
    return out


def build_liouvillian(scheme: AtomScheme, drives: DriveFields) -> Liouvillian:
    h = build_hamiltonian(scheme, drives)
    return Liouvillian(commutator_superop(h) + dissipator_superop(collapse_operators(scheme)))


# ----------------------------------------------------------------------------
# Solvers
# ----------------------------------------------------------------------------

def _constrained(matrices: np.ndarray) -> np.ndarray:
    a = np.array(matrices, dtype=complex, copy=True)
    a[..., 0, :] = TRACE_ROW
    return a


def steady_states(matrices: np.ndarray) -> np.ndarray:
    """Solve a stack of Liouvillians ``(..., 16, 16)`` for their steady states.

    Returns density matrices of shape ``(..., 4, 4)``. Rank deficiency is
    detected through the residual and finiteness of the solution.
    """
    mats = np.asarray(matrices, dtype=complex)
    a = _constrained(mats)
    b = np.zeros(mats.shape[:-1], complex)
    b[..., 0] = 1.0
    try:
        x = np.linalg.solve(a, b[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("trace-constrained Liouvillian is singular") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("trace-constrained Liouvillian is singular")
    resid = np.max(np.abs(np.einsum("...ij,...j->...i", mats, x)), axis=-1)
    scale = np.maximum(1.0, np.max(np.abs(mats), axis=(-2, -1)))
    if np.any(resid > STEADY_RESIDUAL * scale):
        raise SingularSystem(
            f"steady-state residual {np.max(resid):.3e} exceeds tolerance"
        )
    rho = np.swapaxes(x.reshape(mats.shape[:-2] + (DIM, DIM)), -1, -2)
    return 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))


def steady_state(L: Liouvillian) -> DensityMatrix:
    """Unique stationary state of ``L``.

    One row of ``L`` is replaced by the trace functional and the resulting
    linear system is solved directly.
    """
    a = _constrained(L.matrix)
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] <= SINGULAR_RCOND * sv[0]:
        raise SingularSystem(
            f"constrained Liouvillian is rank deficient (sigma_min/sigma_max = "
            f"{sv[-1] / sv[0]:.2e}); is gamma_g zero?"
        )
    return DensityMatrix(steady_states(L.matrix))


def rk4_step_matrix(m: np.ndarray, h: float) -> np.ndarray:
    """Propagator of one classical RK4 step for the linear system ``x' = m x``."""
    z = h * m
    eye = np.eye(m.shape[0])
    z2 = z @ z
    return eye + z + z2 / 2 + z2 @ z / 6 + z2 @ z2 / 24


def rk4_trajectory(L: Liouvillian, rho0: DensityMatrix, h: float, steps: int) -> np.ndarray:
    """Plain RK4 trajectory, returned as an array of shape ``(steps + 1, 4, 4)``."""
    m = L.matrix
    x = vec(rho0.rho).astype(complex)
    out = [unvec(x)]
    for _ in range(steps):
        k1 = m @ x
        k2 = m @ (x + 0.5 * h * k1)
        k3 = m @ (x + 0.5 * h * k2)
        k4 = m @ (x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(unvec(x))
    return np.array(out)


def evolve_to_steady(L: Liouvillian, rho0: DensityMatrix, t_max: float = 1e5,
                     tol: float = 1e-10, h: float | None = None) -> DensityMatrix:
    """Integrate the master equation until it stops changing.

    A fixed RK4 step is used; it is halved until the one-step propagator has
    no growing modes. Because the system is linear and autonomous, the state
    after ``2**m`` steps is obtained by repeated squaring of that propagator,
    which reproduces the stepped trajectory at times ``h * 2**m``.

    Parameters
    ----------
    t_max : float
        Longest integration time in us.
    tol : float
        Convergence threshold on ``max |d rho / dt|``.
    h : float, optional
        Initial step. Defaults to the inverse spectral radius of ``L``.

    Raises
    ------
    NotConverged
        If ``|d rho/dt|`` is still above ``tol`` at ``t_max``.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    m = L.matrix
    if h is None:
        radius = float(np.max(np.abs(np.linalg.eigvals(m))))
        h = 1.0 / radius if radius > 0 else t_max
    h = min(h, t_max)
    while True:
        step = rk4_step_matrix(m, h)
        if np.max(np.abs(np.linalg.eigvals(step))) <= 1.0 + 1e-12:
            break
        h /= 2
        if h < 1e-12:
            raise NotConverged(float("inf"), t_max)

    x0 = vec(rho0.rho).astype(complex)
    prop = step
    t = h
    while True:
        x = prop @ x0
        resid = float(np.max(np.abs(m @ x)))
        if resid < tol:
            rho = unvec(x)
            return DensityMatrix(0.5 * (rho + rho.conj().T))
        if 2 * t > t_max:
            raise NotConverged(resid, t_max)
        prop = prop @ prop
        t *= 2


def coherence(rho: DensityMatrix, i: int, j: int) -> complex:
    """Element ``rho_ij`` with 1-based level indices."""
    for idx in (i, j):
        if not (isinstance(idx, (int, np.integer)) and 1 <= idx <= DIM):
            raise IndexOutOfRange(f"level index must be in 1..4, got {idx!r}")
    return complex(rho.rho[i - 1, j - 1])
