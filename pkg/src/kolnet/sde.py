"""Affine-coefficient SDE simulation and the Feynman-Kac Monte-Carlo oracle.

Drift mu(x) = A x + b and matrix diffusion sigma(x) = C_0 + sum_i x_i C_i
are affine in the state, which makes every Euler step (and the exact
geometric-Brownian terminal map) affine in the initial value.  The terminal
value therefore has a pathwise representation S_T^x = M x + N that
``extract_affine_representation`` recovers by coupling d+1 simulations on
the same Brownian driver.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .nets import ClippedNetwork, Parametrization, put_payoff_network

__all__ = [
    "AffineCoefficients",
    "KolmogorovProblem",
    "AffineMap",
    "BrownianDriver",
    "gbm_coefficients",
    "simulate_terminal",
    "extract_affine_representation",
    "extract_affine_batch",
    "mc_feynman_kac",
    "mc_reference_grid",
    "load_problem",
    "problem_from_text",
    "SimulationError",
]


class SimulationError(RuntimeError):
    """Non-finite state encountered during path simulation."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


@dataclass(frozen=True)
class AffineMap:
    """x -> M x + N."""

    M: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=np.float64)
        N = np.asarray(self.N, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or N.shape != (M.shape[0],):
            raise ValueError(f"bad affine map shapes {M.shape}, {N.shape}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "N", N)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.M @ np.asarray(x, dtype=np.float64) + self.N


@dataclass(frozen=True)
class AffineCoefficients:
    """Affine drift (A, b) and affine matrix diffusion (C_0, C_1..C_d)."""

    A: np.ndarray
    b: np.ndarray
    C: tuple  # (C_0, C_1, ..., C_d), each d x d
    linear_growth_L: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        d = A.shape[0]
        b = np.asarray(self.b, dtype=np.float64)
        C = tuple(np.asarray(Ci, dtype=np.float64) for Ci in self.C)
        if A.shape != (d, d) or b.shape != (d,):
            raise ValueError("drift shapes inconsistent")
        if len(C) != d + 1 or any(Ci.shape != (d, d) for Ci in C):
            raise ValueError(f"need d+1 = {d + 1} diffusion matrices of shape ({d},{d})")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "C", C)
        if self.linear_growth_L <= 0:
            object.__setattr__(self, "linear_growth_L", self._fit_growth_constant())

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def drift(self, X: np.ndarray) -> np.ndarray:
        """mu at a batch of states, shape (n, d)."""
        return X @ self.A.T + self.b

    def diffusion(self, x: np.ndarray) -> np.ndarray:
        """sigma at a single state."""
        S = self.C[0].copy()
        for i in range(self.dim):
            S += x[i] * self.C[i + 1]
        return S

    def _fit_growth_constant(self, samples: int = 1000, radius: float = 10.0) -> float:
        keys = rng.stream_key(0xC0EF)
        X = (rng.uniforms(keys, np.arange(samples * self.dim)) * 2 - 1).reshape(
            samples, self.dim
        ) * radius
        worst = 0.0
        for x in X:
            val = np.linalg.norm(self.diffusion(x)) + np.linalg.norm(
                self.A @ x + self.b
            )
            worst = max(worst, val / (1.0 + np.linalg.norm(x)))
        return 1.001 * worst if worst > 0 else 1.0

    def satisfies_growth_bound(self, points: np.ndarray) -> bool:
        L = self.linear_growth_L
        return all(
            np.linalg.norm(self.diffusion(x)) + np.linalg.norm(self.A @ x + self.b)
            <= L * (1.0 + np.linalg.norm(x)) + 1e-12
            for x in points
        )

    def is_diagonal_gbm(self) -> bool:
        """True when the dynamics are exactly simulable geometric Brownian motion."""
        d = self.dim
        if np.any(self.b != 0) or np.any(self.C[0] != 0):
            return False
        if np.any(self.A != np.diag(np.diag(self.A))):
            return False
        for i, Ci in enumerate(self.C[1:]):
            expected = np.zeros((d, d))
            expected[i, i] = Ci[i, i]
            if np.any(Ci != expected):
                return False
        return True


def gbm_coefficients(d: int, mu_rate, sigma_rate) -> AffineCoefficients:
    """Diagonal geometric Brownian motion: dS_i = mu_i S_i dt + s_i S_i dB_i."""
    mu = np.broadcast_to(np.asarray(mu_rate, dtype=np.float64), (d,)).copy()
    sig = np.broadcast_to(np.asarray(sigma_rate, dtype=np.float64), (d,)).copy()
    C = [np.zeros((d, d))]
    for i in range(d):
        Ci = np.zeros((d, d))
        Ci[i, i] = sig[i]
        C.append(Ci)
    return AffineCoefficients(np.diag(mu), np.zeros(d), tuple(C))


@dataclass(frozen=True)
class BrownianDriver:
    """Seeded source of Brownian increments; same seed, same bits."""

    seed: int
    steps: int
    d: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def key(self) -> np.uint64:
        return rng.stream_key(np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF))

    def normals(self) -> np.ndarray:
        """All standard normals of the stream, shape (steps, d)."""
        z = rng.gaussians(self.key, np.arange(self.steps * self.d))
        return z.reshape(self.steps, self.d)


@dataclass(frozen=True)
class KolmogorovProblem:
    """Terminal-value problem on the hypercube [u, v]^d."""

    coeffs: AffineCoefficients
    horizon: float
    payoff: Parametrization
    clip_amplitude: float
    u: float
    v: float
    steps: int = 128
    gbm_flag: bool = False

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon T must be positive")
        if not self.u < self.v:
            raise ValueError("require u < v")
        if self.clip_amplitude < 1:
            raise ValueError("clip amplitude D must be >= 1")
        if self.payoff.architecture.input_width != self.dim:
            raise ValueError("payoff input width must equal problem dimension")
        if self.gbm_flag and not self.coeffs.is_diagonal_gbm():
            raise ValueError("gbm_flag set but coefficients are not diagonal GBM")

    @property
    def dim(self) -> int:
        return self.coeffs.dim

    @property
    def clipped_payoff(self) -> ClippedNetwork:
        return ClippedNetwork(self.payoff, self.clip_amplitude)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.coeffs.A, self.coeffs.b, *self.coeffs.C):
            h.update(np.ascontiguousarray(arr).tobytes())
        for W, B in self.payoff.layers:
            h.update(np.ascontiguousarray(W).tobytes())
            h.update(np.ascontiguousarray(B).tobytes())
        h.update(
            np.array(
                [self.horizon, self.clip_amplitude, self.u, self.v, self.steps],
                dtype=np.float64,
            ).tobytes()
        )
        return h.hexdigest()[:16]


def _terminal_batch(problem: KolmogorovProblem, X0: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Terminal values for a batch of paths; path i uses stream keys[i].

    X0 is (n, d); keys is (n,) uint64.  Counter layout matches
    BrownianDriver.normals so a single-path driver reproduces batch results.
    """
    co = problem.coeffs
    d, T = problem.dim, problem.horizon
    n = X0.shape[0]
    if problem.gbm_flag:
        mu = np.diag(co.A)
        sig = np.array([co.C[i + 1][i, i] for i in range(d)])
        Z = rng.gaussians(keys[:, None], np.arange(d)[None, :])
        S = X0 * np.exp((mu - 0.5 * sig**2) * T + sig * np.sqrt(T) * Z)
        if not np.all(np.isfinite(S)):
            raise SimulationError(0, "non-finite terminal value (exact GBM)")
        return S
    steps = problem.steps
    dt = T / steps
    sqdt = np.sqrt(dt)
    X = X0.astype(np.float64).copy()
    for k in range(steps):
        counters = np.arange(k * d, (k + 1) * d)
        dB = sqdt * rng.gaussians(keys[:, None], counters[None, :])
        drift = X @ co.A.T + co.b
        diff = dB @ co.C[0].T
        for i in range(d):
            diff += X[:, i : i + 1] * (dB @ co.C[i + 1].T)
        X = X + drift * dt + diff
        if not np.all(np.isfinite(X)):
            raise SimulationError(k, f"non-finite state at Euler step {k}")
    return X


def simulate_terminal(
    problem: KolmogorovProblem, x0: np.ndarray, driver: BrownianDriver
) -> np.ndarray:
    """Terminal value S_T^{x0} under the given driver.

    Exact log-normal draw for the diagonal GBM case, Euler-Maruyama with
    ``driver.steps`` uniform steps otherwise.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.shape != (problem.dim,) or not np.all(np.isfinite(x0)):
        raise ValueError(f"x0 must be a finite vector of length {problem.dim}")
    prob = problem if driver.steps == problem.steps else _with_steps(problem, driver.steps)
    return _terminal_batch(prob, x0[None, :], np.atleast_1d(driver.key))[0]


def _with_steps(problem: KolmogorovProblem, steps: int) -> KolmogorovProblem:
    return KolmogorovProblem(
        coeffs=problem.coeffs,
        horizon=problem.horizon,
        payoff=problem.payoff,
        clip_amplitude=problem.clip_amplitude,
        u=problem.u,
        v=problem.v,
        steps=steps,
        gbm_flag=problem.gbm_flag,
    )


def extract_affine_representation(
    problem: KolmogorovProblem, driver: BrownianDriver
) -> AffineMap:
    """Pathwise affine map with S_T^x = M x + N under this driver.

    Couples d+1 simulations (from 0 and each basis vector) on identical
    Brownian increments; N = S_T^0 and column i of M is S_T^{e_i} - S_T^0.
    """
    d = problem.dim
    X0 = np.vstack([np.zeros(d), np.eye(d)])
    prob = problem if driver.steps == problem.steps else _with_steps(problem, driver.steps)
    S = _terminal_batch(prob, X0, np.full(d + 1, driver.key, dtype=np.uint64))
    N = S[0]
    M = (S[1:] - N).T
    return AffineMap(M, N)


def extract_affine_batch(problem: KolmogorovProblem, seeds: np.ndarray):
    """Affine maps for many independent drivers at once.

    Returns (M, N) arrays of shapes (n, d, d) and (n, d); entry j equals
    extract_affine_representation under BrownianDriver(seeds[j], ...).
    """
    d = problem.dim
    seeds = np.asarray(seeds, dtype=np.uint64)
    n = seeds.shape[0]
    keys = np.repeat(rng.stream_key(seeds), d + 1)
    X0 = np.tile(np.vstack([np.zeros(d), np.eye(d)]), (n, 1))
    S = _terminal_batch(problem, X0, keys).reshape(n, d + 1, d)
    N = S[:, 0, :]
    M = np.swapaxes(S[:, 1:, :] - N[:, None, :], 1, 2)
    return M, N


def mc_feynman_kac(problem: KolmogorovProblem, x, n_paths: int, seed: int):
    """Monte-Carlo estimate of E[payoff(S_T^x)] with its standard error.

    Paths use independent substreams derived from the master seed; the mean
    is reduced with numpy's pairwise summation, so the result is
    reproducible regardless of how path work would be distributed.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    path_seeds = rng.child_seeds(seed, np.arange(n_paths))
    keys = rng.stream_key(path_seeds)
    S = _terminal_batch(problem, np.tile(x, (n_paths, 1)), keys)
    Y = problem.clipped_payoff(S)
    est = float(np.mean(Y))
    se = float(np.std(Y, ddof=1) / np.sqrt(n_paths))
    return est, se


def mc_reference_grid(problem: KolmogorovProblem, points, n_paths: int, seed: int):
    """mc_feynman_kac at each point, with independent derived seeds."""
    points = [np.atleast_1d(np.asarray(p, dtype=np.float64)) for p in points]
    return [
        mc_feynman_kac(problem, p, n_paths, rng.child_seed(seed, i))
        for i, p in enumerate(points)
    ]


def _parse_matrix(rows, d):
    M = np.array([[float(x) for x in row.split()] for row in rows])
    if M.shape != (d, d):
        raise ValueError(f"expected {d}x{d} matrix, got {M.shape}")
    return M


def problem_from_text(text: str, base_dir=".") -> KolmogorovProblem:
    """Parse the flat key-value problem definition format.

    Keys: dim, u, v, T, D, steps, and either ``gbm: mu_rate sigma_rate`` or
    ``drift_matrix``/``drift_vector``/``diffusion<i>`` blocks (one row per
    continuation line).  Payoff: ``payoff: put c_1 ... c_d D`` or
    ``payoff_file: path``.
    """
    entries = {}
    current = None
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line or line.lstrip().startswith("#"):
            continue
        if line[0] in " \t":
            if current is None:
                raise ValueError(f"continuation line without a key: {line!r}")
            entries[current].append(line.strip())
        else:
            key, _, val = line.partition(":")
            current = key.strip()
            entries[current] = [val.strip()] if val.strip() else []
    def scalar(key, cast=float, default=None):
        if key not in entries:
            if default is not None:
                return default
            raise ValueError(f"problem file missing key '{key}'")
        return cast(entries[key][0])

    d = scalar("dim", int)
    u, v, T, D = scalar("u"), scalar("v"), scalar("T"), scalar("D")
    steps = int(scalar("steps", float, 128))
    if "gbm" in entries:
        vals = [float(x) for x in entries["gbm"][0].split()]
        if len(vals) == 2:
            mu_rate, sigma_rate = vals[0], vals[1]
        else:
            mu_rate, sigma_rate = vals[:d], vals[d:]
        coeffs = gbm_coefficients(d, mu_rate, sigma_rate)
        gbm_flag = True
    else:
        A = _parse_matrix(entries["drift_matrix"], d)
        b = np.array([float(x) for x in entries["drift_vector"][0].split()])
        C = [_parse_matrix(entries[f"diffusion{i}"], d) for i in range(d + 1)]
        coeffs = AffineCoefficients(A, b, tuple(C))
        gbm_flag = coeffs.is_diagonal_gbm()
    if "payoff" in entries:
        toks = entries["payoff"][0].split()
        if toks[0] != "put":
            raise ValueError(f"unknown payoff spec '{toks[0]}'")
        c = np.array([float(x) for x in toks[1 : 1 + d]])
        cap = float(toks[1 + d])
        payoff = put_payoff_network(c, cap)
    elif "payoff_file" in entries:
        from pathlib import Path

        from .nets import load_network

        payoff = load_network(Path(base_dir) / entries["payoff_file"][0])
    else:
        raise ValueError("problem file needs 'payoff' or 'payoff_file'")
    return KolmogorovProblem(
        coeffs=coeffs,
        horizon=T,
        payoff=payoff,
        clip_amplitude=D,
        u=u,
        v=v,
        steps=steps,
        gbm_flag=gbm_flag,
    )


def load_problem(path) -> KolmogorovProblem:
    from pathlib import Path

    p = Path(path)
    return problem_from_text(p.read_text(), base_dir=p.parent)
