"""BD-RIS circuit topologies and their structural constraints.

A surface with M tunable ports is wired as G interconnected groups of
M̄ = M/G ports each.  G = M is the classic diagonal (single-connected)
surface, G = 1 the fully-connected one.  A lossless reciprocal network
makes every group block of the tunable impedance matrix symmetric and
purely imaginary; this module stores only the imaginary parts of the
diagonal-plus-lower-triangle of each block so those constraints cannot
be violated by construction.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidArchitecture

if TYPE_CHECKING:
    from .network import ChannelTerms

DEFAULT_STRUCTURE_ATOL = 1e-12


@dataclass(frozen=True)
class RisArchitecture:
    """Element count M split into G groups of size M̄ = M/G."""

    m: int
    g: int

    def __post_init__(self):
        if self.m < 1 or self.g < 1:
            raise InvalidArchitecture(f"need M >= 1 and G >= 1, got M={self.m}, G={self.g}")
        if self.m % self.g != 0:
            raise InvalidArchitecture(f"G={self.g} does not divide M={self.m}")

    @property
    def group_size(self) -> int:
        return self.m // self.g

    @property
    def is_single_connected(self) -> bool:
        return self.g == self.m

    @property
    def is_fully_connected(self) -> bool:
        return self.g == 1

    @property
    def label(self) -> str:
        if self.is_fully_connected:
            return "FC"
        if self.is_single_connected:
            return "SC"
        return "GC"


def make_architecture(m: int, g: int) -> RisArchitecture:
    """Validated (M, G) topology; raises InvalidArchitecture if G does not divide M."""
    return RisArchitecture(int(m), int(g))


def _packed_size(m_bar: int) -> int:
    return m_bar * (m_bar + 1) // 2


def _tril_rows_cols(m_bar: int) -> tuple[np.ndarray, np.ndarray]:
    # Packed order: row-major over the lower triangle including the diagonal,
    # i.e. entry k = m(m+1)/2 + n holds block entry (m, n) with n <= m (0-based).
    rows, cols = [], []
    for m in range(m_bar):
        for n in range(m + 1):
            rows.append(m)
            cols.append(n)
    return np.asarray(rows), np.asarray(cols)


@dataclass
class TunableImpedance:
    """Block-diagonal, symmetric, purely imaginary tunable impedance matrix.

    ``packed`` holds, per group, the imaginary parts (ohms) of the diagonal
    and lower triangle of that group's block, row-major.  The real parts are
    identically zero and the upper triangle is mirrored on read.
    """

    arch: RisArchitecture
    packed: np.ndarray  # (G, M̄(M̄+1)/2) float

    def __post_init__(self):
        expected = (self.arch.g, _packed_size(self.arch.group_size))
        self.packed = np.asarray(self.packed, dtype=float)
        if self.packed.shape != expected:
            raise DimensionMismatch(
                f"packed storage has shape {self.packed.shape}, expected {expected}")
        if not np.all(np.isfinite(self.packed)):
            raise ValueError("tunable impedance entries must be finite")

    def block(self, g: int) -> np.ndarray:
        """Dense M̄ x M̄ complex block for group ``g``."""
        m_bar = self.arch.group_size
        rows, cols = _tril_rows_cols(m_bar)
        x = np.zeros((m_bar, m_bar))
        x[rows, cols] = self.packed[g]
        x = x + x.T - np.diag(np.diag(x))
        return 1j * x

    def blocks(self) -> list[np.ndarray]:
        return [self.block(g) for g in range(self.arch.g)]

    def matrix(self) -> np.ndarray:
        """Dense M x M matrix with exact zeros outside the group blocks."""
        return assemble_block_diagonal(self.blocks())

    def copy(self) -> "TunableImpedance":
        return TunableImpedance(self.arch, self.packed.copy())

    @classmethod
    def zeros(cls, arch: RisArchitecture) -> "TunableImpedance":
        return cls(arch, np.zeros((arch.g, _packed_size(arch.group_size))))

    @classmethod
    def from_diagonal(cls, reactances: Sequence[float], arch: RisArchitecture) -> "TunableImpedance":
        """Diagonal matrix j*diag(reactances); valid under every architecture."""
        x = np.asarray(reactances, dtype=float)
        if x.shape != (arch.m,):
            raise DimensionMismatch(f"need {arch.m} reactances, got shape {x.shape}")
        m_bar = arch.group_size
        out = cls.zeros(arch)
        diag_idx = np.array([m * (m + 1) // 2 + m for m in range(m_bar)])
        for g in range(arch.g):
            out.packed[g, diag_idx] = x[g * m_bar:(g + 1) * m_bar]
        return out

    @classmethod
    def from_matrix(cls, z: np.ndarray, arch: RisArchitecture,
                    atol: float = DEFAULT_STRUCTURE_ATOL) -> "TunableImpedance":
        """Extract packed storage from a dense matrix, validating its structure first."""
        violation = validate_impedance(z, arch, atol=atol)
        if violation is not None:
            raise ValueError(f"matrix violates the architecture constraints: {violation}")
        z = np.asarray(z, dtype=complex)
        m_bar = arch.group_size
        rows, cols = _tril_rows_cols(m_bar)
        packed = np.empty((arch.g, _packed_size(m_bar)))
        for g in range(arch.g):
            lo = g * m_bar
            block = z[lo:lo + m_bar, lo:lo + m_bar]
            packed[g] = block.imag[rows, cols]
        return cls(arch, packed)

    def to_json(self) -> str:
        return json.dumps({
            "M": self.arch.m,
            "G": self.arch.g,
            "blocks": [list(map(float, row)) for row in self.packed],
        })

    @classmethod
    def from_json(cls, text: str) -> "TunableImpedance":
        data = json.loads(text)
        arch = make_architecture(data["M"], data["G"])
        return cls(arch, np.asarray(data["blocks"], dtype=float))


@dataclass(frozen=True)
class SymmetryMap:
    """Binary map from the packed half-vector of a symmetric block to its column-major vec.

    ``p`` has shape (M̄², M̄(M̄+1)/2) with exactly one 1 per row; a column has
    one hit if it indexes a diagonal entry and two otherwise.
    """

    m_bar: int
    p: np.ndarray = field(repr=False)


@functools.lru_cache(maxsize=None)
def build_symmetry_map(m_bar: int) -> SymmetryMap:
    """Construct the vec-expansion map for symmetric M̄ x M̄ blocks.

    Row M̄(m-1)+n of the map (1-based; column-major vec position of entry
    row n, column m) points at packed index m(m-1)/2+n when n <= m and at
    n(n-1)/2+m when m < n.
    """
    if m_bar < 1:
        raise DimensionMismatch(f"group size must be >= 1, got {m_bar}")
    p = np.zeros((m_bar * m_bar, _packed_size(m_bar)))
    for m in range(1, m_bar + 1):
        for n in range(1, m_bar + 1):
            row = m_bar * (m - 1) + n
            if n <= m:
                k = m * (m - 1) // 2 + n
            else:
                k = n * (n - 1) // 2 + m
            p[row - 1, k - 1] = 1.0
    p.setflags(write=False)
    return SymmetryMap(m_bar, p)


def expand_increment(omega: np.ndarray, sym: SymmetryMap) -> np.ndarray:
    """Unfold a packed increment vector into its symmetric M̄ x M̄ block."""
    omega = np.asarray(omega, dtype=complex)
    if omega.shape != (_packed_size(sym.m_bar),):
        raise DimensionMismatch(
            f"increment has shape {omega.shape}, expected ({_packed_size(sym.m_bar)},)")
    vec = sym.p @ omega
    return vec.reshape((sym.m_bar, sym.m_bar), order="F")


def assemble_block_diagonal(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Place square blocks along the diagonal; off-group entries are exact zeros."""
    if not blocks:
        raise DimensionMismatch("need at least one block")
    sizes = []
    for b in blocks:
        b = np.asarray(b)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise DimensionMismatch(f"blocks must be square, got shape {b.shape}")
        sizes.append(b.shape[0])
    total = sum(sizes)
    out = np.zeros((total, total), dtype=complex)
    offset = 0
    for b, size in zip(blocks, sizes):
        out[offset:offset + size, offset:offset + size] = b
        offset += size
    return out


@dataclass(frozen=True)
class ImpedanceViolation:
    """First structural defect found in a candidate tunable impedance matrix."""

    kind: str  # "shape" | "off_block" | "asymmetric" | "real_part"
    index: tuple[int, int]
    magnitude: float

    def __str__(self):
        i, j = self.index
        return f"{self.kind} at ({i}, {j}), magnitude {self.magnitude:.3e}"


def validate_impedance(z: np.ndarray, arch: RisArchitecture,
                       atol: float = DEFAULT_STRUCTURE_ATOL) -> ImpedanceViolation | None:
    """Check block-diagonal sparsity, per-block symmetry and purely imaginary entries.

    Returns ``None`` when valid, otherwise the first violation in scan order
    (off-block entries row-major, then asymmetric pairs, then real parts).
    """
    z = np.asarray(z, dtype=complex)
    m, m_bar = arch.m, arch.group_size
    if z.shape != (m, m):
        return ImpedanceViolation("shape", (z.shape[0] if z.ndim else 0, 0), float("nan"))
    group_of = np.arange(m) // m_bar
    for i in range(m):
        for j in range(m):
            if group_of[i] != group_of[j] and abs(z[i, j]) > atol:
                return ImpedanceViolation("off_block", (i, j), abs(z[i, j]))
    for g in range(arch.g):
        lo = g * m_bar
        block = z[lo:lo + m_bar, lo:lo + m_bar]
        for i in range(m_bar):
            for j in range(i + 1, m_bar):
                diff = abs(block[i, j] - block[j, i])
                if diff > atol:
                    return ImpedanceViolation("asymmetric", (lo + i, lo + j), diff)
    for g in range(arch.g):
        lo = g * m_bar
        block = z[lo:lo + m_bar, lo:lo + m_bar]
        for i in range(m_bar):
            for j in range(m_bar):
                if abs(block[i, j].real) > atol:
                    return ImpedanceViolation("real_part", (lo + i, lo + j), abs(block[i, j].real))
    return None


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-12, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section maximization of a unimodal scalar function on [lo, hi]."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
    x = 0.5 * (a + b)
    return x, f(x)


def init_no_mc(terms: "ChannelTerms", arch: RisArchitecture) -> TunableImpedance:
    """Diagonal starting point: the exact optimum of the decoupled channel gain.

    With mutual coupling ignored (off-diagonal coupling entries dropped) the
    channel is z_rt minus a sum of independent per-element terms
    u_m / (z_mm + j x_m).  As x_m sweeps the reactance line, each term traces
    a circle through the origin with center -u_m / (2 r_m) and radius
    |u_m| / (2 r_m), r_m = Re(z_mm); the globally optimal tuning aligns every
    circle's farthest point with the common direction of z_rt plus the circle
    centers.  The resulting diagonal is valid under every architecture and the
    construction is exact, closed-form and deterministic.  Elements with a
    vanishing path weight get x_m = 0 (any reactance is optimal; the smallest
    magnitude wins).
    """
    diag = np.diag(terms.z_ii)
    if np.any(diag.real <= 0):
        raise ValueError("decoupled initialization needs positive element resistances")
    u = terms.z_ri * terms.z_it  # per-element path weight, shape (M,)
    centers = -u / (2.0 * diag.real)
    radii = np.abs(u) / (2.0 * diag.real)
    anchor = terms.z_rt + centers.sum()
    direction = np.exp(1j * (np.angle(anchor) if anchor != 0 else 0.0))

    x = np.zeros(arch.m)
    for k in range(arch.m):
        if radii[k] == 0.0:
            continue
        support_point = centers[k] + radii[k] * direction
        x[k] = (-u[k] / support_point - diag[k]).imag
    return TunableImpedance.from_diagonal(x, arch)
