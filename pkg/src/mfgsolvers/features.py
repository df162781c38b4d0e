"""Fourier feature bases and analytic operator action on features.

Two flavours: deterministic integer-frequency trigonometric bases on the
torus, and orthogonal random Fourier features for the space-time strip.
Every feature is scale * trig(omega . x) with trig in {sin, cos}, so linear
differential operators act by cycling the trig function and multiplying by
frequency components, and the smoothing operator (1 - Lap)^{-2} acts
diagonally since the features are its eigenfunctions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .errors import UnsupportedOperator

SERIES_1D = "periodic_series_1d"
TENSOR_2D = "periodic_tensor_2d"
RANDOM_FOURIER = "random_fourier"

SIN = 0
COS = 1


@dataclass(frozen=True)
class FeatureBasis:
    """A finite trigonometric dictionary.

    frequencies holds the angular frequency vector of each feature (rows,
    shape (count, dim)); the constant feature is cos at zero frequency.
    """

    kind: str
    frequencies: np.ndarray
    phases: np.ndarray  # SIN or COS per feature
    scales: np.ndarray
    periodic: bool

    @property
    def count(self) -> int:
        return self.frequencies.shape[0]

    @property
    def dim(self) -> int:
        return self.frequencies.shape[1]


def build_periodic_1d(N: int) -> FeatureBasis:
    """[1, sin(2 pi x) .. sin(2 pi N x), cos(2 pi x) .. cos(2 pi N x)]."""
    if N < 1:
        raise ValueError("N must be >= 1")
    ks = np.arange(1, N + 1, dtype=float)
    freqs = np.concatenate([[0.0], ks, ks]) * 2.0 * np.pi
    phases = np.concatenate([[COS], np.full(N, SIN), np.full(N, COS)]).astype(int)
    return FeatureBasis(
        kind=SERIES_1D,
        frequencies=freqs[:, None],
        phases=phases,
        scales=np.ones(2 * N + 1),
        periodic=True,
    )


def build_periodic_2d(N: int, full: bool = False) -> FeatureBasis:
    """Constant plus sin/cos of 2 pi (i x1 + j x2).

    The default index set is i, j in 1..N (2 N^2 + 1 features).  It omits
    pure-axis and mixed-sign modes, which rules out many smooth functions;
    ``full=True`` instead takes one representative of every mode pair with
    |i|, |j| <= N, giving (2N+1)^2 features in total.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if full:
        ij = np.array(
            [
                (i, j)
                for i in range(0, N + 1)
                for j in range(-N, N + 1)
                if i > 0 or j > 0
            ],
            dtype=float,
        )
    else:
        ij = np.array([(i, j) for i in range(1, N + 1) for j in range(1, N + 1)], dtype=float)
    n = ij.shape[0]
    freqs = np.vstack([np.zeros((1, 2)), ij, ij]) * 2.0 * np.pi
    phases = np.concatenate([[COS], np.full(n, SIN), np.full(n, COS)]).astype(int)
    return FeatureBasis(
        kind=TENSOR_2D,
        frequencies=freqs,
        phases=phases,
        scales=np.ones(2 * n + 1),
        periodic=True,
    )


@dataclass(frozen=True)
class RandomFeatureSampler:
    """Deterministic source of orthogonal random frequencies W = S Q / varsigma."""

    dimension: int
    varsigma: float
    seed: int

    def sample_w(self, n_pairs: int) -> np.ndarray:
        """Frequency rows; stacks independent orthogonal blocks when n_pairs > d."""
        d = self.dimension
        rng = np.random.default_rng(self.seed)
        blocks = []
        for _ in range((n_pairs + d - 1) // d):
            G = rng.standard_normal((d, d))
            Q, R = np.linalg.qr(G)
            Q = Q * np.sign(np.diag(R))[None, :]  # Haar-fix the sign ambiguity
            s = np.sqrt(rng.chisquare(d, size=d))
            blocks.append((s[:, None] * Q) / self.varsigma)
        return np.vstack(blocks)[:n_pairs]


def sample_orthogonal_features(sampler: RandomFeatureSampler, n_pairs: int) -> FeatureBasis:
    """Paired sin/cos features sharing each frequency row, scaled sqrt(2/N)."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    W = sampler.sample_w(n_pairs)
    n = 2 * n_pairs
    freqs = np.repeat(W, 2, axis=0)
    phases = np.tile([SIN, COS], n_pairs).astype(int)
    return FeatureBasis(
        kind=RANDOM_FOURIER,
        frequencies=freqs,
        phases=phases,
        scales=np.full(n, np.sqrt(2.0 / n)),
        periodic=False,
    )


# ---------------------------------------------------------------------------
# operator action

def _axis_index(basis: FeatureBasis, op: str) -> int:
    # random-fourier bases live on (t, x); periodic 2D on (x1, x2)
    if basis.kind == RANDOM_FOURIER:
        table = {K.DT: 0, K.DX: 1, K.DXX: 1}
    elif basis.kind == TENSOR_2D:
        table = {K.DX: 0, K.DY: 1, K.DXX: 0}
    else:
        table = {K.DX: 0, K.DXX: 0}
    if op not in table:
        raise UnsupportedOperator(f"operator {op!r} unsupported on basis kind {basis.kind!r}")
    return table[op]


def eval_feature_op(basis: FeatureBasis, op: str, X) -> np.ndarray:
    """Row of operator-applied feature values at each point of X.

    Returns an (n_points, count) matrix.  Derivatives cycle the trig pair
    (sin -> cos -> -sin -> -cos); the Laplacian and the smoothing operator
    are diagonal multipliers in the frequency.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != basis.dim:
        raise UnsupportedOperator(
            f"points of dimension {X.shape[1]} on a basis of dimension {basis.dim}"
        )
    theta = X @ basis.frequencies.T  # (n, count)
    sin_sel = basis.phases == SIN

    def trig(shift):
        # value of the feature's trig function advanced by `shift` quarter turns
        out = np.empty_like(theta)
        s, c = np.sin(theta), np.cos(theta)
        cyc = [(s, c), (c, -s), (-s, -c), (-c, s)][shift % 4]
        out[:, sin_sel] = cyc[0][:, sin_sel]
        out[:, ~sin_sel] = cyc[1][:, ~sin_sel]
        return out

    if op == K.ID:
        vals = trig(0)
    elif op in (K.DX, K.DY, K.DT):
        a = _axis_index(basis, op)
        vals = trig(1) * basis.frequencies[:, a][None, :]
    elif op == K.DXX:
        a = _axis_index(basis, op)
        vals = -trig(0) * (basis.frequencies[:, a] ** 2)[None, :]
    elif op == K.LAP:
        w2 = np.sum(basis.frequencies**2, axis=1)
        vals = -trig(0) * w2[None, :]
    elif op == K.J5:
        if not basis.periodic:
            raise UnsupportedOperator("smoothing operator requires a periodic basis")
        w2 = np.sum(basis.frequencies**2, axis=1)
        vals = trig(0) / (1.0 + w2[None, :]) ** 2
    else:
        raise UnsupportedOperator(f"unknown operator tag {op!r}")
    return vals * basis.scales[None, :]
