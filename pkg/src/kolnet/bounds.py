"""Closed-form certificate calculators for the clipped ReLU hypothesis class.

Everything here is a pure formula: the Lipschitz constant of the
parameters-to-realization map, covering-number bounds, the Hoeffding-based
generalization failure probability, the sample-complexity function, and the
dimension-scaling certificate assembled from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nets import Architecture

__all__ = [
    "ClassSpec",
    "ApproximationFamily",
    "Certificate",
    "lipschitz_bound",
    "lipschitz_bound_sharp",
    "ball_covering_log",
    "network_covering_log",
    "generalization_failure_log",
    "sample_complexity_h",
    "required_samples",
    "kolmogorov_certificate",
    "scaling_audit",
    "put_family",
]


@dataclass(frozen=True)
class ClassSpec:
    """Hypothesis class of clipped networks: architecture, bound R, clip D, domain."""

    architecture: Architecture
    R: float
    D: float
    u: float
    v: float

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("parameter bound R must be >= 1")
        if self.D < 1:
            raise ValueError("clip amplitude D must be >= 1")
        if not self.u < self.v:
            raise ValueError("require u < v")

    @property
    def domain_scale(self) -> float:
        return max(1.0, abs(self.u), abs(self.v))


def lipschitz_bound(spec: ClassSpec) -> float:
    """Lipschitz constant of theta -> realization on [u,v]^d, sup norms both sides.

    Value: 2 * max{1,|u|,|v|} * L^2 * R^(L-1) * ||a||_inf^L.
    """
    L = spec.architecture.depth
    w = spec.architecture.max_width
    return 2.0 * spec.domain_scale * L**2 * spec.R ** (L - 1) * float(w) ** L


def lipschitz_bound_sharp(spec: ClassSpec) -> float:
    """Sharper per-layer form: m*L*R^(L-1)*||a||^L + sum_l l*(R*||a||)^(l-1)."""
    L = spec.architecture.depth
    w = float(spec.architecture.max_width)
    m = spec.domain_scale
    return m * L * spec.R ** (L - 1) * w**L + sum(
        l * (spec.R * w) ** (l - 1) for l in range(1, L + 1)
    )


def ball_covering_log(n: int, R: float, r: float) -> float:
    """log covering number of the sup-norm ball of radius R in R^n: n*ln(ceil(R/r))."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if R < 1:
        raise ValueError("R must be >= 1")
    if not 0 < r < 1:
        raise ValueError("radius r must be in (0, 1)")
    return n * math.log(math.ceil(R / r))


def network_covering_log(spec: ClassSpec, r: float) -> float:
    """log covering number bound for the (clipped) network class at radius r.

    P(a) * [ ln(4 L^2 max{1,|u|,|v|} / r) + L ln(R ||a||_inf) ].  Clipping is
    non-expansive, so the clipped class satisfies the same bound.
    """
    if not 0 < r < 1:
        raise ValueError("radius r must be in (0, 1)")
    a = spec.architecture
    L = a.depth
    return a.param_count * (
        math.log(4.0 * L**2 * spec.domain_scale / r)
        + L * math.log(spec.R * a.max_width)
    )


def generalization_failure_log(ln_cov: float, m: int, eps: float, D: float) -> float:
    """log of the uniform-deviation failure bound: ln 2 + ln_cov - m eps^2 / (128 D^4).

    The caller exponentiates and clamps at 1 to obtain the probability bound.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < eps <= 1:
        raise ValueError("eps must be in (0, 1]")
    if D < 1:
        raise ValueError("D must be >= 1")
    return math.log(2.0) + ln_cov - m * eps**2 / (128.0 * D**4)


def sample_complexity_h(x1, x2, x3, x4, x5, D, u, v) -> float:
    """Sample-count formula.

    h(x) = 128 D^4 x1^2 [ ln 2 + x2 + x3 x4 x5
                          + x4 ln(128 D max{1,|u|,|v|} x1 x5^2) ].
    """
    if min(x1, x2, x3, x4, x5) < 0 or x1 <= 0 or x5 <= 0:
        raise ValueError("arguments must be positive (x2, x3, x4 may be zero)")
    scale = max(1.0, abs(u), abs(v))
    return (
        128.0
        * D**4
        * x1**2
        * (math.log(2.0) + x2 + x3 * x4 * x5 + x4 * math.log(128.0 * D * scale * x1 * x5**2))
    )


def required_samples(eps: float, rho: float, spec: ClassSpec, approximation_form: bool = True) -> int:
    """Smallest integer m certified by the sample-complexity formula.

    With ``approximation_form`` the first argument is 2/eps (the variant used
    when an eps/2 approximator is known); otherwise 1/eps.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    if not 0 < rho < 1:
        raise ValueError("rho must be in (0, 1)")
    a = spec.architecture
    x1 = (2.0 if approximation_form else 1.0) / eps
    h = sample_complexity_h(
        x1,
        math.log(1.0 / rho),
        math.log(spec.R * a.max_width),
        a.param_count,
        a.depth,
        spec.D,
        spec.u,
        spec.v,
    )
    m = math.ceil(h)
    if m > np.iinfo(np.int64).max:
        raise OverflowError(f"required sample count {h:.3e} exceeds 64-bit range")
    return int(m)


@dataclass(frozen=True)
class ApproximationFamily:
    """Rates at which payoff networks approximate the initial values.

    Constants (c, nu, alpha, beta, gamma, kappa, lmbda) with c >= 1 and
    nu >= 1/2; tau = nu + 2*alpha is derived.
    """

    c: float
    nu: float
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    kappa: float = 0.0
    lmbda: float = 0.0

    def __post_init__(self):
        if self.c < 1:
            raise ValueError("c must be >= 1")
        if self.nu < 0.5:
            raise ValueError("nu must be >= 1/2")
        if min(self.alpha, self.beta, self.gamma, self.kappa, self.lmbda) < 0:
            raise ValueError("exponents must be nonnegative")

    @property
    def tau(self) -> float:
        return self.nu + 2.0 * self.alpha


def put_family() -> ApproximationFamily:
    """Exact-representation family of the capped basket put payoff."""
    return ApproximationFamily(c=6.0, nu=0.5, alpha=0.0, beta=0.0, gamma=1.0, kappa=0.0, lmbda=0.0)


@dataclass(frozen=True)
class Certificate:
    """Numeric caps certified for a requested (eps, rho, d), with provenance."""

    d: int
    eps: float
    rho: float
    samples: int
    param_cap: float
    R_cap: float
    depth: int
    width_cap: float
    provenance: dict  # quantity -> formula string

    def rows(self):
        return [
            ("m", self.samples, self.provenance["m"]),
            ("P(a)", self.param_cap, self.provenance["P(a)"]),
            ("R", self.R_cap, self.provenance["R"]),
            ("depth", self.depth, self.provenance["depth"]),
            ("max_width", self.width_cap, self.provenance["max_width"]),
        ]


def kolmogorov_certificate(
    d: int,
    eps: float,
    rho: float,
    fam: ApproximationFamily,
    payoff_arch_of_delta,
    C: float,
    D: float = 1.0,
    u: float = 0.0,
    v: float = 1.0,
) -> Certificate:
    """Assemble the size/sample certificate for a d-dimensional problem.

    ``payoff_arch_of_delta`` maps an accuracy delta to (Architecture b,
    payoff parameter max-norm).  The scale constant C is user-supplied (the
    underlying results only assert its existence); exponents in d and 1/eps
    are recorded separately in the provenance so scaling audits are
    constant-free.  The companion accuracy is delta = (4C)^-1 d^(-tau/2)
    eps^(1/2).
    """
    if C is None or C <= 0:
        raise ValueError("scale constant C must be supplied and positive")
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    if not 0 < rho < 1:
        raise ValueError("rho must be in (0, 1)")
    if d < 1:
        raise ValueError("d must be a positive integer")
    tau = fam.tau
    delta = min(1.0 - 1e-12, (1.0 / (4.0 * C)) * d ** (-tau / 2.0) * eps**0.5)
    b_arch, _eta_norm = payoff_arch_of_delta(delta)
    p_exp_d = tau * (fam.lmbda / 2.0 + 2.0) + fam.gamma
    p_exp_e = fam.lmbda / 2.0 + 2.0
    r_exp_d = tau * (fam.kappa / 2.0 + 1.0) + fam.beta + 1.5
    r_exp_e = fam.kappa / 2.0 + 1.0
    param_cap = C * d**p_exp_d * eps ** (-p_exp_e)
    R_cap = max(1.0, C * d**r_exp_d * eps ** (-r_exp_e))
    depth = b_arch.depth
    width_cap = C * d**tau * eps ** (-1.0) * b_arch.max_width
    h = sample_complexity_h(
        2.0 / eps,
        math.log(1.0 / rho),
        math.log(max(R_cap * width_cap, 1.0)),
        param_cap,
        float(depth),
        D,
        u,
        v,
    )
    m = math.ceil(h)
    if m > np.iinfo(np.int64).max:
        raise OverflowError(f"certified sample count {h:.3e} exceeds 64-bit range")
    provenance = {
        "P(a)": f"C*d^{p_exp_d:g}*eps^-{p_exp_e:g}",
        "R": f"C*d^{r_exp_d:g}*eps^-{r_exp_e:g}",
        "depth": f"depth of payoff architecture at delta={delta:g}",
        "max_width": f"C*d^{tau:g}*eps^-1*max_width(b)",
        "m": "ceil(h(2/eps, ln(1/rho), ln(R*width), P(a), depth))",
    }
    return Certificate(
        d=d,
        eps=eps,
        rho=rho,
        samples=int(m),
        param_cap=param_cap,
        R_cap=R_cap,
        depth=depth,
        width_cap=width_cap,
        provenance=provenance,
    )


@dataclass(frozen=True)
class ScalingAudit:
    slope: float
    intercept: float
    r_squared: float
    residuals: tuple
    threshold: float

    @property
    def passed(self) -> bool:
        return self.slope <= self.threshold


def scaling_audit(results, threshold: float = 3.0) -> ScalingAudit:
    """OLS fit of ln(quantity) against ln(d); PASS when slope <= threshold.

    ``results`` is a sequence of (d, quantity) pairs at fixed accuracy.
    Polynomial growth of degree k shows slope ~ k; exponential growth shows
    a slope increasing with the d-range and fails a polynomial threshold.
    """
    results = list(results)
    ds = np.array([float(r[0]) for r in results])
    qs = np.array([float(r[1]) for r in results])
    if len(set(ds.tolist())) < 3:
        raise ValueError("scaling audit needs at least 3 distinct d values")
    if np.any(qs <= 0) or np.any(ds <= 0):
        raise ValueError("quantities and dimensions must be positive")
    x = np.log(ds)
    y = np.log(qs)
    A = np.column_stack([x, np.ones_like(x)])
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fitted = A @ coef
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ScalingAudit(
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        residuals=tuple((y - fitted).tolist()),
        threshold=threshold,
    )
