"""ReLU network data model, forward evaluation, and explicit constructions.

Networks are plain feed-forward ReLU nets: affine layers with ReLU applied
between them (never on the output layer).  Three exact constructions are
provided: the clipping network, the capped put payoff network, and the
averaged composition of a network with a family of affine maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Architecture",
    "Parametrization",
    "ClippedNetwork",
    "realize",
    "evaluate",
    "clip_network",
    "clipped_as_standard",
    "put_payoff_network",
    "compose_average",
    "save_network",
    "load_network",
]


@dataclass(frozen=True)
class Architecture:
    """Layer-width vector (a_0, a_1, ..., a_L)."""

    widths: tuple

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValueError("architecture needs at least one layer (two widths)")
        if any(w < 1 for w in widths):
            raise ValueError(f"all widths must be >= 1, got {widths}")
        object.__setattr__(self, "widths", widths)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def param_count(self) -> int:
        w = self.widths
        return sum(w[l] * w[l - 1] + w[l] for l in range(1, len(w)))

    @property
    def max_width(self) -> int:
        return max(self.widths)

    @property
    def input_width(self) -> int:
        return self.widths[0]

    @property
    def output_width(self) -> int:
        return self.widths[-1]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Parametrization:
    """Per-layer weight matrices and bias vectors of a ReLU network."""

    layers: tuple  # tuple of (W: (a_l, a_{l-1}), B: (a_l,)) pairs

    def __post_init__(self):
        frozen = []
        for l, (W, B) in enumerate(self.layers, start=1):
            W = _freeze(np.atleast_2d(W))
            B = _freeze(np.atleast_1d(B))
            if B.ndim != 1 or W.shape[0] != B.shape[0]:
                raise ValueError(f"layer {l}: weight/bias shape mismatch {W.shape} vs {B.shape}")
            frozen.append((W, B))
        for l in range(1, len(frozen)):
            if frozen[l][0].shape[1] != frozen[l - 1][0].shape[0]:
                raise ValueError(
                    f"layer {l + 1} input width {frozen[l][0].shape[1]} does not match "
                    f"layer {l} output width {frozen[l - 1][0].shape[0]}"
                )
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def architecture(self) -> Architecture:
        widths = (self.layers[0][0].shape[1],) + tuple(W.shape[0] for W, _ in self.layers)
        return Architecture(widths)

    def max_norm(self) -> float:
        return max(
            max(np.abs(W).max(), np.abs(B).max() if B.size else 0.0) for W, B in self.layers
        )

    def is_bounded_by(self, R: float) -> bool:
        return self.max_norm() <= R


def evaluate(params: Parametrization, X: np.ndarray) -> np.ndarray:
    """Batch forward pass: X is (n, a_0), result is (n, a_L)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.architecture.input_width:
        raise ValueError(
            f"input has shape {X.shape}, expected (n, {params.architecture.input_width})"
        )
    h = X
    last = len(params.layers) - 1
    for l, (W, B) in enumerate(params.layers):
        h = h @ W.T + B
        if l != last:
            np.maximum(h, 0.0, out=h)
    return h


def realize(params: Parametrization, x: Sequence[float]) -> np.ndarray:
    """Network realization at a single input vector."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (params.architecture.input_width,):
        raise ValueError(f"input has length {x.shape[0]}, expected {params.architecture.input_width}")
    return evaluate(params, x[None, :])[0]


@dataclass(frozen=True)
class ClippedNetwork:
    """A scalar-output network whose output is clipped to [-D, D]."""

    params: Parametrization
    clip_amplitude: float

    def __post_init__(self):
        if self.clip_amplitude <= 0:
            raise ValueError("clip amplitude must be positive")
        if self.params.architecture.output_width != 1:
            raise ValueError("clipped networks require output width 1")

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """Clipped scalar outputs for a batch X of shape (n, d)."""
        D = self.clip_amplitude
        return np.clip(evaluate(self.params, X)[:, 0], -D, D)


def clip_network(D: float) -> Parametrization:
    """Exact (1,2,2,1) network computing C_D(x) = min{|x|, D} * sgn(x)."""
    if D <= 0:
        raise ValueError("clip amplitude D must be positive")
    return Parametrization(
        (
            (np.array([[1.0], [-1.0]]), np.array([0.0, 0.0])),
            (np.array([[-1.0, 0.0], [0.0, -1.0]]), np.array([D, D])),
            (np.array([[-1.0, 1.0]]), np.array([0.0])),
        )
    )


def clipped_as_standard(params: Parametrization, D: float) -> Parametrization:
    """Standard ReLU network computing C_D applied to a scalar-output network.

    The clipping tail is fused with the final affine layer of ``params`` so
    the result's realization equals the clipped realization exactly and the
    parameter magnitude is max(max_norm(params), D): the fused layer only
    sign-flips existing entries.  The resulting architecture is
    (a_0, ..., a_{L-1}, 2, 2, 1).
    """
    if params.architecture.output_width != 1:
        raise ValueError("clipped_as_standard requires output width 1")
    if D <= 0:
        raise ValueError("clip amplitude D must be positive")
    W_L, B_L = params.layers[-1]
    fused_W = np.vstack([W_L, -W_L])
    fused_B = np.concatenate([B_L, -B_L])
    tail = clip_network(D)
    return Parametrization(
        params.layers[:-1] + ((fused_W, fused_B),) + tail.layers[1:]
    )


def put_payoff_network(c: Sequence[float], D: float) -> Parametrization:
    """Exact (d,1,1,1) network for the capped put payoff.

    Realization is min{max{D - c.x, 0}, D}, built from the identity
    min{z, D} = D - ReLU(D - z).
    """
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    if c.ndim != 1 or c.size < 1:
        raise ValueError("c must be a vector of length d >= 1")
    if D <= 0:
        raise ValueError("cap D must be positive")
    return Parametrization(
        (
            (-c[None, :], np.array([D])),
            (np.array([[-1.0]]), np.array([D])),
            (np.array([[-1.0]]), np.array([D])),
        )
    )


def _map_mn(m):
    """Accept AffineMap-like objects or (M, N) pairs."""
    if hasattr(m, "M") and hasattr(m, "N"):
        return np.asarray(m.M, dtype=np.float64), np.asarray(m.N, dtype=np.float64)
    M, N = m
    return np.asarray(M, dtype=np.float64), np.asarray(N, dtype=np.float64)


def compose_average(eta: Parametrization, maps) -> Parametrization:
    """Single network computing (1/n) * sum_j realize(eta)(M_j x + N_j).

    Block construction: the first layer stacks V_1 M_j rows, middle layers
    are block-diagonal copies of eta's layers, and the last layer averages
    the n branches with weight 1/n.  Resulting architecture is
    (b_0, n*b_1, ..., n*b_{L-1}, b_L) for eta of architecture b.  For a
    single affine layer (L(b) = 1) the construction degenerates to the
    exact averaged affine map.
    """
    maps = [_map_mn(m) for m in maps]
    n = len(maps)
    if n == 0:
        raise ValueError("need at least one affine map")
    d = eta.architecture.input_width
    for M, N in maps:
        if M.shape != (d, d) or N.shape != (d,):
            raise ValueError(f"affine map shapes {M.shape}, {N.shape} do not match d={d}")
    L = eta.architecture.depth
    V1, A1 = eta.layers[0]
    if L == 1:
        W = sum(V1 @ M for M, _ in maps) / n
        B = sum(V1 @ N + A1 for _, N in maps) / n
        return Parametrization(((W, B),))
    W1 = np.vstack([V1 @ M for M, _ in maps])
    B1 = np.concatenate([V1 @ N + A1 for _, N in maps])
    layers = [(W1, B1)]
    for V_l, A_l in eta.layers[1:-1]:
        out_w, in_w = V_l.shape
        W = np.zeros((n * out_w, n * in_w))
        for j in range(n):
            W[j * out_w : (j + 1) * out_w, j * in_w : (j + 1) * in_w] = V_l
        layers.append((W, np.tile(A_l, n)))
    V_L, A_L = eta.layers[-1]
    layers.append((np.tile(V_L / n, (1, n)), A_L))
    return Parametrization(tuple(layers))


def save_network(params: Parametrization, path) -> None:
    """Write a network in the flat text format (17 significant digits)."""
    lines = ["arch: " + " ".join(str(w) for w in params.architecture.widths)]
    for l, (W, B) in enumerate(params.layers, start=1):
        lines.append(f"W{l}")
        for row in W:
            lines.append(" ".join(f"{x:.17g}" for x in row))
        lines.append(f"B{l}")
        lines.append(" ".join(f"{x:.17g}" for x in B))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path) -> Parametrization:
    """Read a network written by save_network."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("arch:"):
        raise ValueError(f"{path}: missing 'arch:' header")
    widths = [int(w) for w in lines[0].split(":", 1)[1].split()]
    arch = Architecture(tuple(widths))
    pos = 1
    layers = []
    for l in range(1, len(widths)):
        if lines[pos] != f"W{l}":
            raise ValueError(f"{path}: expected 'W{l}' at line {pos + 1}")
        pos += 1
        W = np.array(
            [[float(x) for x in lines[pos + r].split()] for r in range(widths[l])]
        )
        pos += widths[l]
        if lines[pos] != f"B{l}":
            raise ValueError(f"{path}: expected 'B{l}'")
        pos += 1
        B = np.array([float(x) for x in lines[pos].split()])
        pos += 1
        layers.append((W, B))
    params = Parametrization(tuple(layers))
    if params.architecture != arch:
        raise ValueError(f"{path}: layer shapes do not match declared architecture")
    return params
