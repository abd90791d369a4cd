"""Multiport network algebra for RIS-aided links.

The end-to-end link (N transmit antennas, M surface elements, K receive
antennas) is an L-port network, L = N + M + K, described either by its
scattering matrix S or its impedance matrix Z, both partitioned into the
nine blocks (TT, TI, TR, IT, II, IR, RT, RI, RR).  This module provides
the reflection-coefficient map, the S <-> Z conversions, and three channel
models of increasing specialization:

* ``channel_general``   -- full L-port model with arbitrary source/load
  reflection coefficients;
* ``channel_scattering``-- matched ends and unilateral propagation,
  H = S_RT + S_RI (I - Theta S_II)^-1 Theta S_IT;
* ``channel_impedance`` -- the equivalent impedance form,
  H = (Z_RT - Z_RI (Z_II + Z_I)^-1 Z_IT) / (2 Z0),
  where the surface coupling matrix Z_II appears explicitly.

All functions are pure; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .architecture import RisArchitecture, TunableImpedance, assemble_block_diagonal
from .errors import AssumptionViolation, DimensionMismatch, ThetaNearIdentity
from .linalg import (DEFAULT_RCOND_FLOOR, CheckedFactor, as_complex_matrix,
                     solve_checked, solve_right_checked)

DEFAULT_Z0 = 50.0
DEFAULT_VALIDATION_ATOL = 1e-9

_BLOCK_NAMES = ("tt", "ti", "tr", "it", "ii", "ir", "rt", "ri", "rr")


@dataclass
class PortBlocks:
    """Nine-block partition of an L-port parameter matrix, L = N + M + K.

    Blocks are named by their (row, column) port roles: ``rt`` couples the
    transmitter ports into the receiver ports, ``ii`` is the surface block,
    and so on.  ``z0`` is the positive real reference impedance in ohms.
    """

    tt: np.ndarray
    ti: np.ndarray
    tr: np.ndarray
    it: np.ndarray
    ii: np.ndarray
    ir: np.ndarray
    rt: np.ndarray
    ri: np.ndarray
    rr: np.ndarray
    z0: float = DEFAULT_Z0

    def __post_init__(self):
        for name in _BLOCK_NAMES:
            setattr(self, name, np.atleast_2d(as_complex_matrix(getattr(self, name), name)))
        self.z0 = float(self.z0)
        if self.z0 <= 0:
            raise ValueError(f"reference impedance must be positive, got {self.z0}")
        n, m, k = self.dims
        expected = {"tt": (n, n), "ti": (n, m), "tr": (n, k),
                    "it": (m, n), "ii": (m, m), "ir": (m, k),
                    "rt": (k, n), "ri": (k, m), "rr": (k, k)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(
                    f"block {name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.tt.shape[0], self.ii.shape[0], self.rr.shape[0]

    def assemble(self) -> np.ndarray:
        """Full (N+M+K) x (N+M+K) matrix in port order T, I, R."""
        return np.block([[self.tt, self.ti, self.tr],
                         [self.it, self.ii, self.ir],
                         [self.rt, self.ri, self.rr]])

    @classmethod
    def from_full(cls, full: np.ndarray, n: int, m: int, k: int, z0: float = DEFAULT_Z0):
        full = as_complex_matrix(full, "full matrix", (n + m + k, n + m + k))
        t = slice(0, n)
        i = slice(n, n + m)
        r = slice(n + m, n + m + k)
        return cls(full[t, t], full[t, i], full[t, r],
                   full[i, t], full[i, i], full[i, r],
                   full[r, t], full[r, i], full[r, r], z0)


class ImpedanceParams(PortBlocks):
    """Partitioned L-port impedance matrix (ohms)."""

    def check_reciprocal(self, atol: float = DEFAULT_VALIDATION_ATOL) -> None:
        if np.max(np.abs(self.ii - self.ii.T)) > atol:
            raise AssumptionViolation("surface block is not reciprocal (Z_II != Z_II^T)")


class ScatteringParams(PortBlocks):
    """Partitioned L-port scattering matrix (dimensionless)."""


@dataclass
class ChannelTerms:
    """SISO channel ingredients: scalar direct path plus the surface coupling matrix.

    ``z_rt`` is the direct transmitter-to-receiver impedance, ``z_ri`` the
    surface-to-receiver row (length M), ``z_it`` the transmitter-to-surface
    column (length M), and ``z_ii`` the M x M surface impedance matrix whose
    diagonal is the element self impedance and whose off-diagonal entries are
    the mutual coupling.
    """

    z_rt: complex
    z_ri: np.ndarray
    z_ii: np.ndarray
    z_it: np.ndarray
    z0: float = DEFAULT_Z0

    def __post_init__(self):
        self.z_rt = complex(self.z_rt)
        self.z_ri = np.ravel(as_complex_matrix(self.z_ri, "z_ri"))
        self.z_it = np.ravel(as_complex_matrix(self.z_it, "z_it"))
        m = self.z_ri.shape[0]
        self.z_ii = as_complex_matrix(self.z_ii, "z_ii", (m, m))
        if self.z_it.shape != (m,):
            raise DimensionMismatch(
                f"z_it has shape {self.z_it.shape}, expected ({m},)")
        self.z0 = float(self.z0)
        if self.z0 <= 0:
            raise ValueError(f"reference impedance must be positive, got {self.z0}")
        if np.max(np.abs(self.z_ii - self.z_ii.T)) > DEFAULT_VALIDATION_ATOL * max(1.0, np.max(np.abs(self.z_ii))):
            raise AssumptionViolation("z_ii must be symmetric (reciprocal surface)")
        if np.any(np.diag(self.z_ii).real <= 0):
            raise AssumptionViolation("z_ii diagonal must have positive real parts")

    @property
    def m(self) -> int:
        return self.z_ri.shape[0]


def _z_i_matrix(z_i) -> np.ndarray:
    if isinstance(z_i, TunableImpedance):
        return z_i.matrix()
    return np.atleast_2d(np.asarray(z_i, dtype=complex))


def reflection_matrix(z_term: np.ndarray, z0: float = DEFAULT_Z0, *,
                      rcond_floor: float = DEFAULT_RCOND_FLOOR) -> np.ndarray:
    """Reflection coefficient matrix (Z + Z0 I)^-1 (Z - Z0 I) of a termination."""
    z_term = np.atleast_2d(as_complex_matrix(z_term, "termination impedance"))
    eye = np.eye(z_term.shape[0])
    return solve_checked(z_term + z0 * eye, z_term - z0 * eye,
                         rcond_floor=rcond_floor, what="Z + Z0*I")


def theta_from_impedance(z_i, z0: float = DEFAULT_Z0, *,
                         rcond_floor: float = DEFAULT_RCOND_FLOOR) -> np.ndarray:
    """Reflection image of the tunable impedance network.

    For a valid (symmetric, purely imaginary) input the result is symmetric
    and unitary.  A :class:`~bdris.architecture.TunableImpedance` is mapped
    block by block, so the output inherits its group sparsity pattern with
    exact zeros outside the blocks.
    """
    if isinstance(z_i, TunableImpedance):
        return assemble_block_diagonal(
            [reflection_matrix(b, z0, rcond_floor=rcond_floor) for b in z_i.blocks()])
    return reflection_matrix(z_i, z0, rcond_floor=rcond_floor)


def _cayley_impedance(theta: np.ndarray, z0: float) -> np.ndarray:
    """Z = Z0 (I + Theta)(I - Theta)^-1 for stacked (..., M, M) inputs, real parts clamped."""
    theta = np.asarray(theta, dtype=complex)
    m = theta.shape[-1]
    eye = np.eye(m)
    z = z0 * np.linalg.solve(
        np.swapaxes(eye - theta, -1, -2), np.swapaxes(eye + theta, -1, -2))
    z = np.swapaxes(z, -1, -2)
    return 1j * z.imag


def impedance_from_theta(theta: np.ndarray, z0: float = DEFAULT_Z0,
                         arch: RisArchitecture | None = None, *,
                         eig_margin: float = 1e-6) -> TunableImpedance:
    """Invert the reflection map back to a tunable impedance matrix.

    Raises :class:`ThetaNearIdentity` when an eigenvalue of theta is within
    ``eig_margin`` of +1, where the impedance diverges.  ``arch`` defaults to
    fully-connected (one group spanning all ports).
    """
    theta = np.atleast_2d(as_complex_matrix(theta, "theta"))
    m = theta.shape[0]
    if theta.shape != (m, m):
        raise DimensionMismatch(f"theta must be square, got {theta.shape}")
    if arch is None:
        arch = RisArchitecture(m, 1)
    eigvals = np.linalg.eigvals(theta)
    closest = np.min(np.abs(eigvals - 1.0))
    if closest < eig_margin:
        raise ThetaNearIdentity(
            f"theta has an eigenvalue within {closest:.3e} of +1; impedance diverges")
    z = _cayley_impedance(theta, z0)
    return TunableImpedance.from_matrix(z, arch, atol=1e-6 * max(1.0, float(np.max(np.abs(z)))))


def s_from_z(z: ImpedanceParams, *, rcond_floor: float = DEFAULT_RCOND_FLOOR) -> ScatteringParams:
    """Full L x L impedance-to-scattering conversion S = (Z + Z0 I)^-1 (Z - Z0 I)."""
    n, m, k = z.dims
    full = z.assemble()
    s_full = reflection_matrix(full, z.z0, rcond_floor=rcond_floor)
    return ScatteringParams.from_full(s_full, n, m, k, z.z0)


def s_blocks_from_z_blocks(z: ImpedanceParams, *,
                           atol: float = DEFAULT_VALIDATION_ATOL,
                           rcond_floor: float = DEFAULT_RCOND_FLOOR) -> ScatteringParams:
    """Closed-form scattering blocks for a matched, unilateral link.

    Requires the structural idealizations Z_TI = Z_TR = Z_IR = 0,
    Z_TT = Z0 I and Z_RR = Z0 I; the surviving blocks are then

        S_II = (Z_II + Z0 I)^-1 (Z_II - Z0 I)
        S_RI = Z_RI (I - S_II) / (2 Z0)
        S_IT = (Z_II + Z0 I)^-1 Z_IT
        S_RT = Z_RT / (2 Z0) - Z_RI S_IT / (2 Z0)

    and every other block of S vanishes.
    """
    n, m, k = z.dims
    z0 = z.z0
    for name, label in (("ti", "Z_TI"), ("tr", "Z_TR"), ("ir", "Z_IR")):
        block = getattr(z, name)
        if block.size and np.max(np.abs(block)) > atol:
            raise AssumptionViolation(f"{label} must vanish for the unilateral model")
    if np.max(np.abs(z.tt - z0 * np.eye(n))) > atol:
        raise AssumptionViolation("Z_TT must equal Z0*I (matched transmitter)")
    if np.max(np.abs(z.rr - z0 * np.eye(k))) > atol:
        raise AssumptionViolation("Z_RR must equal Z0*I (matched receiver)")

    fact = CheckedFactor(z.ii + z0 * np.eye(m), rcond_floor=rcond_floor, what="Z_II + Z0*I")
    s_ii = fact.solve(z.ii - z0 * np.eye(m))
    s_it = fact.solve(z.it)
    s_ri = (z.ri / (2.0 * z0)) @ (np.eye(m) - s_ii)
    s_rt = z.rt / (2.0 * z0) - (z.ri / (2.0 * z0)) @ s_it

    zeros = np.zeros
    return ScatteringParams(zeros((n, n)), zeros((n, m)), zeros((n, k)),
                            s_it, s_ii, zeros((m, k)),
                            s_rt, s_ri, zeros((k, k)), z0)


def channel_general(s: ScatteringParams, gamma_t: np.ndarray, theta: np.ndarray,
                    gamma_r: np.ndarray, *,
                    rcond_floor: float = DEFAULT_RCOND_FLOOR) -> np.ndarray:
    """Full L-port channel from receiver port voltages to transmitter port voltages.

    With Gamma = blkdiag(Gamma_T, Theta, Gamma_R) and T = S (I_L - Gamma S)^-1,

        H = (Gamma_R + I_K)^-1 T_RT (I_N + Gamma_T T_TT + T_TT)^-1 .
    """
    n, m, k = s.dims
    gamma_t = as_complex_matrix(np.atleast_2d(gamma_t), "gamma_t", (n, n))
    theta = as_complex_matrix(np.atleast_2d(theta), "theta", (m, m))
    gamma_r = as_complex_matrix(np.atleast_2d(gamma_r), "gamma_r", (k, k))
    gamma = assemble_block_diagonal([gamma_t, theta, gamma_r])
    s_full = s.assemble()
    length = n + m + k
    t_full = solve_right_checked(s_full, np.eye(length) - gamma @ s_full,
                                 rcond_floor=rcond_floor, what="I - Gamma*S")
    t_tt = t_full[0:n, 0:n]
    t_rt = t_full[n + m:length, 0:n]
    left = solve_checked(gamma_r + np.eye(k), t_rt,
                         rcond_floor=rcond_floor, what="Gamma_R + I")
    return solve_right_checked(left, np.eye(n) + gamma_t @ t_tt + t_tt,
                               rcond_floor=rcond_floor, what="I + Gamma_T*T_TT + T_TT")


def channel_scattering(s: ScatteringParams, theta: np.ndarray, *,
                       rcond_floor: float = DEFAULT_RCOND_FLOOR) -> np.ndarray:
    """Matched-ends channel H = S_RT + S_RI (I - Theta S_II)^-1 Theta S_IT."""
    n, m, k = s.dims
    theta = as_complex_matrix(np.atleast_2d(theta), "theta", (m, m))
    core = solve_checked(np.eye(m) - theta @ s.ii, theta @ s.it,
                         rcond_floor=rcond_floor, what="I - Theta*S_II")
    return s.rt + s.ri @ core


def channel_impedance(terms, z_i, *,
                      rcond_floor: float = DEFAULT_RCOND_FLOOR) -> np.ndarray:
    """Impedance-form channel H = (Z_RT - Z_RI (Z_II + Z_I)^-1 Z_IT) / (2 Z0).

    ``terms`` is either a :class:`ChannelTerms` (SISO, returns a 1x1 array) or
    an :class:`ImpedanceParams` block set (returns K x N).
    """
    z_i = _z_i_matrix(z_i)
    if isinstance(terms, ChannelTerms):
        z_rt = np.array([[terms.z_rt]])
        z_ri = terms.z_ri[np.newaxis, :]
        z_it = terms.z_it[:, np.newaxis]
        z_ii, z0 = terms.z_ii, terms.z0
    else:
        z_rt, z_ri, z_ii, z_it, z0 = terms.rt, terms.ri, terms.ii, terms.it, terms.z0
    core = solve_checked(z_ii + z_i, z_it, rcond_floor=rcond_floor, what="Z_II + Z_I")
    return (z_rt - z_ri @ core) / (2.0 * z0)


def channel_gain(terms: ChannelTerms, z_i, *,
                 rcond_floor: float = DEFAULT_RCOND_FLOOR) -> float:
    """SISO objective |z_rt - z_ri (Z_II + Z_I)^-1 z_it|^2 (the 1/(2 Z0) factor excluded)."""
    z_i = _z_i_matrix(z_i)
    core = solve_checked(terms.z_ii + z_i, terms.z_it,
                         rcond_floor=rcond_floor, what="Z_II + Z_I")
    return float(np.abs(terms.z_rt - terms.z_ri @ core) ** 2)
