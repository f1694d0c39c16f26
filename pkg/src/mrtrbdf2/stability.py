"""Linear stability analysis of the multirate scheme.

For y' = A·y a one-step solver with rational amplification R(Z) = D(Z)⁻¹N(Z),
Z = h·A, gives rise to a multirate amplification matrix when a constant macro
step h is split once into two half steps h/2 for an active component subset,
with the latent components reconstructed at the midpoint by an interpolation
matrix Q acting on the start state.  The assembly here simulates those block
equations with LU solves; an algebraically expanded closed form is kept
alongside as a cross-check.  Norm sweeps over a grid of rescaled step sizes
h·max|λ(A)| reproduce the stability diagnostics for the built-in model
systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .dense_linalg import as_matrix, lu_factor, lu_solve, matrix_norm, spectral_radius
from .errors import UnknownSystem
from .ode_problem import ActivePartition
from .trbdf2 import GAMMA

NORM_KINDS = ("one", "two", "inf")


@dataclass(frozen=True)
class RationalMatrixMethod:
    """One-step solver amplification R(Z) = D(Z)⁻¹N(Z), polynomials in Z.

    Coefficients are ascending in powers of Z and are applied with the
    identity in place of Z⁰.  Consistency requires D(0)⁻¹N(0) = I.
    """

    numerator: Tuple[float, ...]
    denominator: Tuple[float, ...]

    def n_poly(self, z: np.ndarray) -> np.ndarray:
        return _matrix_poly(self.numerator, z)

    def d_poly(self, z: np.ndarray) -> np.ndarray:
        return _matrix_poly(self.denominator, z)

    def amplification(self, z: np.ndarray) -> np.ndarray:
        lu = lu_factor(self.d_poly(z))
        return lu_solve(lu, self.n_poly(z))


def _matrix_poly(coeffs: Sequence[float], z: np.ndarray) -> np.ndarray:
    n = z.shape[0]
    out = np.zeros_like(z)
    for c in reversed(coeffs):
        out = out @ z + c * np.eye(n)
    return out


def trbdf2_method() -> RationalMatrixMethod:
    """Rational form of the TR-BDF2 amplification:
    N(Z) = [1+(1−γ)²]Z + 2(2−γ)I,  D(Z) = (1−γ)γZ² + (γ²−2)Z + 2(2−γ)I."""
    g = GAMMA
    return RationalMatrixMethod(
        numerator=(2.0 * (2.0 - g), 1.0 + (1.0 - g) ** 2),
        denominator=(2.0 * (2.0 - g), g * g - 2.0, (1.0 - g) * g),
    )


TRBDF2_METHOD = trbdf2_method()


@dataclass(frozen=True)
class StabilitySetup:
    """One stability-matrix assembly: system matrix, macro step, active subset
    and latent interpolation kind ('linear' or 'hermite')."""

    matrix: np.ndarray
    h: float
    active: ActivePartition
    kind: str = "hermite"
    method: RationalMatrixMethod = TRBDF2_METHOD

    def __post_init__(self) -> None:
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError("system matrix must be square")
        if self.active.m != m.shape[0]:
            raise ValueError("partition dimension does not match the matrix")
        if self.kind not in ("linear", "hermite"):
            raise ValueError("interpolation kind must be 'linear' or 'hermite'")


def single_rate_amplification(a, h: float, method: RationalMatrixMethod = TRBDF2_METHOD) -> np.ndarray:
    """Amplification matrix R(h·A) of the single-rate solver."""
    z = h * as_matrix(a)
    return method.amplification(z)


def interpolation_matrix(a, h: float, kind: str, method: RationalMatrixMethod = TRBDF2_METHOD) -> np.ndarray:
    """Matrix mapping the start state to the macro-midpoint reconstruction.

    Linear kind: (I + R)/2.  Hermite kind: the cubic dense-output branch at
    the midpoint written in terms of the trapezoidal-stage amplification
    R_γ = (I − (γ/2)Z)⁻¹(I + (γ/2)Z).
    """
    z = h * as_matrix(a)
    n = z.shape[0]
    eye = np.eye(n)
    if kind == "linear":
        return 0.5 * (eye + method.amplification(z))
    if kind != "hermite":
        raise ValueError("interpolation kind must be 'linear' or 'hermite'")
    g = GAMMA
    lu = lu_factor(eye - 0.5 * g * z)
    r_gamma = lu_solve(lu, eye + 0.5 * g * z)
    gz = g * z
    f_mat = 3.0 * (r_gamma - eye - gz) - gz @ (r_gamma - eye)
    g_mat = gz @ (r_gamma - eye) - 2.0 * (r_gamma - eye - gz)
    beta = 1.0 / (2.0 * g)
    return eye + beta * gz + beta**2 * f_mat + beta**3 * g_mat


def multirate_amplification(setup: StabilitySetup) -> np.ndarray:
    """Multirate amplification matrix for one h/2 refinement of the active set.

    Assembled by simulating the two half-step block systems: latent rows copy
    the single-rate macro step, active rows run two half steps against the
    interpolated (first half) and macro-endpoint (second half) latent values.
    """
    a = as_matrix(setup.matrix)
    m = a.shape[0]
    act = setup.active.indices
    lat = setup.active.complement().indices
    z = setup.h * a
    method = setup.method

    r_full = method.amplification(z)
    if act.size == 0:
        return r_full.copy()

    q = interpolation_matrix(a, setup.h, setup.kind, method)
    d_half = method.d_poly(0.5 * z)
    n_half = method.n_poly(0.5 * z)

    d_aa = d_half[np.ix_(act, act)]
    lu_aa = lu_factor(d_aa)

    # First half step: D_aa x1 = [N_half]_act u - D_a,lat (Q u)_lat.
    rhs1 = n_half[act, :].copy()
    if lat.size:
        rhs1 -= d_half[np.ix_(act, lat)] @ q[lat, :]
    m1 = lu_solve(lu_aa, rhs1)

    # Second half step: endpoint latent values come from the macro step itself.
    rhs2 = n_half[np.ix_(act, act)] @ m1
    if lat.size:
        rhs2 += d_half[np.ix_(act, lat)] @ (-r_full[lat, :]) + n_half[np.ix_(act, lat)] @ q[lat, :]
    m2 = lu_solve(lu_aa, rhs2)

    r_mr = np.zeros((m, m))
    r_mr[act, :] = m2
    if lat.size:
        r_mr[lat, :] = r_full[lat, :]
    return r_mr


def multirate_amplification_expanded(setup: StabilitySetup) -> np.ndarray:
    """Closed-form expansion of the same matrix, kept as an independent
    cross-check of the block assembly."""
    a = as_matrix(setup.matrix)
    m = a.shape[0]
    act = setup.active.indices
    lat = setup.active.complement().indices
    z = setup.h * a
    method = setup.method

    r_full = method.amplification(z)
    if act.size == 0:
        return r_full.copy()

    q = interpolation_matrix(a, setup.h, setup.kind, method)
    d_half = method.d_poly(0.5 * z)
    n_half = method.n_poly(0.5 * z)

    p = np.zeros((act.size, m))
    p[np.arange(act.size), act] = 1.0
    e = p.T
    p_perp = np.zeros((lat.size, m))
    p_perp[np.arange(lat.size), lat] = 1.0
    e_perp = p_perp.T

    d_aa = p @ d_half @ e
    d_al = p @ d_half @ e_perp
    n_aa = p @ n_half @ e
    n_al = p @ n_half @ e_perp
    d_aa_inv = np.linalg.inv(d_aa)

    inner = (
        d_aa_inv @ n_aa @ d_aa_inv @ (p @ n_half - d_al @ (p_perp @ q))
        + d_aa_inv @ n_al @ (p_perp @ q)
        - d_aa_inv @ d_al @ (p_perp @ r_full)
    )
    return e @ inner + e_perp @ p_perp @ r_full


@dataclass
class AmplificationReport:
    """Norm sweep results: one row per (rescaled step, interpolation kind)."""

    system: str
    max_abs_eigenvalue: float
    rows: List[dict] = field(default_factory=list)

    COLUMNS = (
        "rescaled_h", "kind", "norm1", "norm2", "norminf", "spectral_radius",
        "single_rate_norm1", "single_rate_norm2", "single_rate_norminf",
        "single_rate_spectral_radius",
    )


def _all_norms(mat: np.ndarray) -> Tuple[float, float, float, float]:
    return (
        matrix_norm(mat, "one"),
        matrix_norm(mat, "two"),
        matrix_norm(mat, "inf"),
        spectral_radius(mat),
    )


def default_rescaled_grid(n_points: int = 60, s_min: float = 1e-3, s_max: float = 100.0) -> np.ndarray:
    """Logarithmic grid of rescaled step values h·max|λ(A)|."""
    return np.geomspace(s_min, s_max, n_points)


def norm_sweep(
    a,
    partition: ActivePartition,
    kinds: Sequence[str] = ("linear", "hermite"),
    rescaled_grid: np.ndarray | None = None,
    system_name: str = "",
    method: RationalMatrixMethod = TRBDF2_METHOD,
) -> AmplificationReport:
    """Sweep matrix norms of the multirate and single-rate amplification
    matrices over a grid of rescaled time steps."""
    a = as_matrix(a)
    lam = spectral_radius(a)
    if lam <= 0.0:
        lam = 1.0  # zero matrix: rescaling is moot, use h directly
    grid = default_rescaled_grid() if rescaled_grid is None else np.asarray(rescaled_grid, dtype=float)
    report = AmplificationReport(system=system_name, max_abs_eigenvalue=lam)
    for s in grid:
        h = float(s) / lam
        r_single = single_rate_amplification(a, h, method)
        sr = _all_norms(r_single)
        for kind in kinds:
            setup = StabilitySetup(matrix=a, h=h, active=partition, kind=kind, method=method)
            mr = _all_norms(multirate_amplification(setup))
            report.rows.append({
                "rescaled_h": float(s),
                "kind": kind,
                "norm1": mr[0],
                "norm2": mr[1],
                "norminf": mr[2],
                "spectral_radius": mr[3],
                "single_rate_norm1": sr[0],
                "single_rate_norm2": sr[1],
                "single_rate_norminf": sr[2],
                "single_rate_spectral_radius": sr[3],
            })
    return report


def _conservative_diffusion(n: int, coeff: np.ndarray, dx: float) -> np.ndarray:
    """(D(x) u')' by second differences, Dirichlet closure.

    Interface diffusivities are harmonic means (the standard conservative
    treatment of a coefficient jump), so the matrix stays symmetric and the
    slow/fast blocks couple only weakly.
    """
    iface = np.empty(n + 1)
    iface[1:-1] = 2.0 * coeff[:-1] * coeff[1:] / (coeff[:-1] + coeff[1:])
    iface[0] = coeff[0]
    iface[-1] = coeff[-1]
    a = np.zeros((n, n))
    for i in range(n):
        a[i, i] = -(iface[i] + iface[i + 1])
        if i > 0:
            a[i, i - 1] = iface[i]
        if i < n - 1:
            a[i, i + 1] = iface[i + 1]
    return a / dx**2


def _flux_form_advection(n: int, vel: np.ndarray, dx: float) -> np.ndarray:
    """-(v(x) u)' with centered interface values, Dirichlet closure.

    Off-diagonal pairs are exactly skew-symmetric, keeping the operator
    near-normal across the velocity jump.
    """
    iface = np.empty(n + 1)
    iface[1:-1] = 2.0 * vel[:-1] * vel[1:] / (vel[:-1] + vel[1:])
    iface[0] = vel[0]
    iface[-1] = vel[-1]
    a = np.zeros((n, n))
    for i in range(n):
        a[i, i] = 0.5 * (iface[i] - iface[i + 1])
        if i > 0:
            a[i, i - 1] = 0.5 * iface[i]
        if i < n - 1:
            a[i, i + 1] = -0.5 * iface[i + 1]
    return a / dx


def _advective_form_advection(n: int, vel: np.ndarray, dx: float) -> np.ndarray:
    """-v(x) u' by centered differences on a periodic grid (pure transport;
    the spectrum stays purely imaginary for any velocity field)."""
    a = np.zeros((n, n))
    for i in range(n):
        a[i, (i - 1) % n] = vel[i] / 2.0
        a[i, (i + 1) % n] = -vel[i] / 2.0
    return a / dx


MODEL_SYSTEMS = ("sys1", "sys2", "sys2_nofriction", "heat40", "advdiff40", "adv40")


def model_system(name: str) -> Tuple[np.ndarray, ActivePartition]:
    """Built-in model systems and their default active partitions.

    Systems are arranged with the latent (slow) variables first; the returned
    partition names the fast components, which is where the half-step
    refinement is applied in the sweeps.
    """
    if name == "sys1":
        a = np.array([[-1.0, 1.0], [-1000.0, -1000.0]])
        return a, ActivePartition(2, [1])
    if name in ("sys2", "sys2_nofriction"):
        m1 = m2 = 1.0
        k1, k2 = 1.0, 1e6
        g1 = 0.0
        g2 = 0.0 if name == "sys2_nofriction" else 100.0
        a = np.array([
            [0.0, 1.0, 0.0, 0.0],
            [-k1 / m1, -g1, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [k2 / m2, 0.0, -k2 / m2, -g2],
        ])
        return a, ActivePartition(4, [2, 3])
    if name in ("heat40", "advdiff40", "adv40"):
        n = 40
        dx = 1.0 / n  # unit domain resolved by all 40 variables
        slow = np.ones(n)
        if name == "heat40":
            coeff = slow.copy()
            coeff[n // 2:] = 1e6
            a = _conservative_diffusion(n, coeff, dx)
        elif name == "advdiff40":
            coeff = slow.copy()
            coeff[n // 2:] = 1e4
            a = _conservative_diffusion(n, coeff, dx) + _flux_form_advection(n, coeff, dx)
        else:
            vel = slow.copy()
            vel[n // 2:] = 1e4
            a = _advective_form_advection(n, vel, dx)
        return a, ActivePartition(n, np.arange(n // 2, n))
    raise UnknownSystem(f"unknown model system {name!r}; choose from {MODEL_SYSTEMS}")
