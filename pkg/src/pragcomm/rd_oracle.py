"""Brute-force verification of the minimal-rate bound for collaborative
messages.

On small alphabets every deterministic encoder p(Z | X_s) can be enumerated,
which traces the full achievable rate-distortion set and lets the lower bound

    rate >= I(Y; X_s | X_r) - delta

be checked point by point, together with the two optimality conditions
H(Z | Y) = 0 (the message determines nothing beyond the task target) and
I(Z; X_r) = 0 (the message repeats nothing the receiver already has).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .infotheory import (
    LN2,
    JointTable,
    conditional_entropy,
    conditional_mi,
    extend_with_channel,
    mutual_information,
)
from .bayes_risk import pragmatic_distortion

MAX_SOURCE_ALPHABET = 6


@dataclass(frozen=True)
class EncoderSpec:
    """A message encoder reading only the sender's symbol.

    ``kind="deterministic"``: ``table`` maps each X_s symbol to a Z symbol.
    ``kind="stochastic"``: ``table`` is a row-stochastic matrix p(Z | X_s).
    """

    kind: str
    table: np.ndarray

    def __post_init__(self):
        tbl = np.asarray(self.table)
        if self.kind == "deterministic":
            tbl = tbl.astype(np.int64)
            if tbl.ndim != 1 or np.any(tbl < 0):
                raise ValueError("deterministic map must be a 1-D symbol table")
        elif self.kind == "stochastic":
            tbl = tbl.astype(np.float64)
            if tbl.ndim != 2 or np.any(tbl < 0):
                raise ValueError("stochastic encoder must be a 2-D matrix")
            if np.any(np.abs(tbl.sum(axis=1) - 1.0) > 1e-12):
                raise ValueError("stochastic encoder rows must sum to 1 within 1e-12")
        else:
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        tbl.setflags(write=False)
        object.__setattr__(self, "table", tbl)

    def kernel(self, n_source: int, n_z: int) -> np.ndarray:
        """Row-stochastic p(Z | X_s) regardless of kind."""
        if self.kind == "stochastic":
            if self.table.shape != (n_source, n_z):
                raise ValueError(
                    f"encoder shape {self.table.shape} != ({n_source}, {n_z})"
                )
            return np.asarray(self.table)
        if len(self.table) != n_source or np.any(self.table >= n_z):
            raise ValueError("deterministic map does not fit the alphabets")
        k = np.zeros((n_source, n_z))
        k[np.arange(n_source), self.table] = 1.0
        return k


@dataclass(frozen=True)
class RDPoint:
    """One achievable (rate, distortion) sample plus its condition diagnostics."""

    encoder_id: int
    rate_bits: float
    distortion_nats: float
    cond_h_z_given_y: float  # H(Z | Y), bits
    mi_z_xr: float  # I(Z; X_r), bits
    pareto: bool = False


def attach_encoder(
    source: JointTable, enc: EncoderSpec, z_name: str = "Z", xs: str = "X_s"
) -> JointTable:
    """Composite table p(..., Z) with Z generated from X_s by the encoder."""
    n_source = source.size(xs)
    if enc.kind == "stochastic":
        n_z = enc.table.shape[1]
    else:
        n_z = int(enc.table.max()) + 1
    return extend_with_channel(source, xs, z_name, enc.kernel(n_source, n_z))


def theoretical_bound(
    source: JointTable,
    delta_nats: float,
    y: str = "Y",
    xs: str = "X_s",
    xr: str = "X_r",
) -> float:
    """Lower bound on the rate in bits: max(0, I(Y; X_s | X_r) - delta)."""
    if delta_nats < 0:
        raise ValueError("delta must be >= 0")
    i_bits = conditional_mi(source, y, xs, [xr], "bits").value
    return max(0.0, i_bits - delta_nats / LN2)


def _point_for_kernel(
    source: JointTable, kernel: np.ndarray, encoder_id: int
) -> RDPoint:
    ext = extend_with_channel(source, "X_s", "Z", kernel)
    rate = mutual_information(ext, "X_s", "Z", "bits").value
    dist = pragmatic_distortion(ext, "segmentation")
    h_zy = conditional_entropy(ext, "Z", ["Y"], "bits").value
    i_zxr = mutual_information(ext, "Z", "X_r", "bits").value
    return RDPoint(encoder_id, rate, dist, h_zy, i_zxr)


def enumerate_frontier(
    source: JointTable, z_alphabet_size: int, task: str = "segmentation"
) -> list[RDPoint]:
    """One RDPoint per deterministic encoder X_s -> Z, Pareto subset flagged.

    Guarded to stay within z_alphabet_size ** |X_s| <= 46656 enumerations
    (|X_s| <= 6 and z alphabet no larger than |X_s|).
    """
    if task != "segmentation":
        raise ValueError("the frontier is enumerated for the segmentation distortion")
    n_source = source.size("X_s")
    if n_source > MAX_SOURCE_ALPHABET:
        raise ValueError(
            f"alphabet too large: |X_s|={n_source} exceeds {MAX_SOURCE_ALPHABET}"
        )
    if not 1 <= z_alphabet_size <= n_source:
        raise ValueError(
            f"alphabet too large: need 1 <= |Z|={z_alphabet_size} <= |X_s|={n_source}"
        )
    points = []
    h_xs = conditional_entropy(source, "X_s", [], "bits").value
    for encoder_id, mapping in enumerate(
        itertools.product(range(z_alphabet_size), repeat=n_source)
    ):
        kernel = np.zeros((n_source, z_alphabet_size))
        kernel[np.arange(n_source), mapping] = 1.0
        pt = _point_for_kernel(source, kernel, encoder_id)
        assert pt.rate_bits <= h_xs + 1e-9
        points.append(pt)
    flags = pareto_flags(
        [(p.rate_bits, p.distortion_nats) for p in points]
    )
    return [
        RDPoint(p.encoder_id, p.rate_bits, p.distortion_nats, p.cond_h_z_given_y,
                p.mi_z_xr, pareto=f)
        for p, f in zip(points, flags)
    ]


def pareto_flags(points: list[tuple[float, float]], eps: float = 1e-12) -> list[bool]:
    """Flag the points minimal in both coordinates (smaller is better)."""
    flags = []
    for i, (a1, a2) in enumerate(points):
        dominated = any(
            (b1 <= a1 + eps and b2 <= a2 + eps)
            and (b1 < a1 - eps or b2 < a2 - eps)
            for j, (b1, b2) in enumerate(points)
            if j != i
        )
        flags.append(not dominated)
    return flags


def check_conditions(
    source: JointTable, enc: EncoderSpec
) -> tuple[float, float, float]:
    """(H(Z|Y), I(Z;X_r), rate - bound at the achieved distortion), all bits."""
    ext = attach_encoder(source, enc)
    rate = mutual_information(ext, "X_s", "Z", "bits").value
    dist = pragmatic_distortion(ext, "segmentation")
    h_zy = conditional_entropy(ext, "Z", ["Y"], "bits").value
    i_zxr = mutual_information(ext, "Z", "X_r", "bits").value
    gap = rate - theoretical_bound(source, max(dist, 0.0))
    return h_zy, i_zxr, gap


def make_separable_source(
    p_y: np.ndarray, p_n: np.ndarray, p_xr: np.ndarray
) -> tuple[JointTable, EncoderSpec]:
    """Construct the bound-touching source X_s = (Y, N) with X_r independent.

    X_s enumerates (y, n) pairs as y * |N| + n.  Returns the source table and
    the encoder that extracts the Y component, which attains the bound at
    zero distortion with H(Z|Y) = 0 and I(Z;X_r) = 0.
    """
    p_y = np.asarray(p_y, dtype=np.float64)
    p_n = np.asarray(p_n, dtype=np.float64)
    p_xr = np.asarray(p_xr, dtype=np.float64)
    ny, nn, nr = len(p_y), len(p_n), len(p_xr)
    pmf = np.zeros((ny, ny * nn, nr))
    for y in range(ny):
        for n in range(nn):
            for r in range(nr):
                pmf[y, y * nn + n, r] = p_y[y] * p_n[n] * p_xr[r]
    source = JointTable((("Y", ny), ("X_s", ny * nn), ("X_r", nr)), pmf)
    mapping = np.repeat(np.arange(ny), nn)
    return source, EncoderSpec("deterministic", mapping)
