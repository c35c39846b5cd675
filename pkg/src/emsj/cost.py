"""Closed-form I/O estimates for the join algorithms.

All counts are block transfers in the external-memory model. ``practical``
mode drops the logarithmic factors hidden by the asymptotic bounds;
``theorem`` mode keeps them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

COST_MODES = ("practical", "theorem")

SORT_CONSTANT = 8.0
LOWER_BOUND_CONSTANT = 2.0
PAIR_CONSTANT = 2.0


@dataclass(frozen=True)
class CostInputs:
    """Instance summary. ``near``/``cnear`` count pairs within ``r``/``cr``.

    ``p1`` and ``p2`` are only needed by :func:`osim_cost_bound`.
    """

    N: float
    near: float
    cnear: float
    M: float
    B: float
    rho: float
    p1: float | None = None
    p2: float | None = None
    mode: str = "practical"

    def __post_init__(self):
        if self.mode not in COST_MODES:
            raise ValueError(f"mode must be one of {COST_MODES}")
        if not (self.N > 0 and self.M > 0 and self.B > 0):
            raise ValueError("N, M and B must be positive")
        if self.B > self.M or self.M > self.N:
            raise ValueError("need B <= M <= N")
        if not 0 <= self.near <= self.cnear <= self.N ** 2:
            raise ValueError("need 0 <= near <= cnear <= N^2")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.p1 is not None and not 0 < (self.p2 or 0) < self.p1 <= 1:
            raise ValueError("need 0 < p2 < p1 <= 1")

    @property
    def fit_level(self) -> int:
        """Recursion level below which subproblems fit in memory."""
        if self.p2 is None:
            raise ValueError("fit_level needs p2")
        return max(0, math.ceil(math.log(self.N / self.M) / math.log(1.0 / self.p2)))

    @property
    def max_depth(self) -> int:
        if self.p2 is None:
            raise ValueError("max_depth needs p2")
        return max(1, math.ceil(math.log(self.N) / math.log(1.0 / self.p2)))


def nested_loop_cost(x: CostInputs) -> float:
    return 2 * x.N + x.N ** 2 / (x.M * x.B)


def standard_lsh_lower_bound(x: CostInputs, constant: float = LOWER_BOUND_CONSTANT) -> float:
    """One read and one write of ``N ** (1 + rho)`` items."""
    return constant * x.N ** (1 + x.rho) / x.B


def asim_cost_estimate(x: CostInputs, a: float = SORT_CONSTANT, pair: float = PAIR_CONSTANT) -> float:
    """Cache-aware join: bucket scans plus amortized pair work.

    ``a`` is the per-point partitioning cost (sorting ``N`` items costs at
    most ``8 N`` when ``M = N/1000``) and ``pair`` the amortized cost of a
    compared pair in units of ``1/(MB)``.
    """
    N, M, B = x.N, x.M, x.B
    rep = (N / M) ** x.rho
    if x.mode == "practical":
        return rep * (a * N / B + pair * x.near / (M * B)) + pair * x.cnear / (M * B)
    log_n = math.log2(N)
    L = 2 * rep
    scans = 3 * log_n * L * a * N / B
    near = pair * 3 * L * log_n * x.near / (M * B)
    cnear = pair * 6 * log_n * x.cnear / (M * B)
    far = pair * 24 * N * L * M * log_n / (M * B)
    return scans + near + cnear + far


def osim_cost_bound(x: CostInputs) -> float:
    """Recursive join: expected cost with per-level collision expectations.

    Levels up to ``fit_level`` pay a replicated scan plus their near and c-near
    pairs; deeper levels pay for surviving far collisions, split by the size
    of the smaller input. The last size class (inputs of at least ``M``
    points) is charged for all ``N^2`` far pairs.
    """
    if x.p1 is None or x.p2 is None:
        raise ValueError("the recursive bound needs p1 and p2")
    N, M, B = x.N, x.M, x.B
    L = 1.0 / x.p1
    fit_level, depth = x.fit_level, x.max_depth
    total = N * L ** fit_level / B
    for i in range(fit_level + 1):
        total += (x.near * L ** i + x.cnear) / (M * B)
    k_top = int(math.floor(math.log2(M)))
    decay = x.p2 / x.p1
    for i in range(fit_level, depth):
        small = sum(N * 2 ** (k + 1) * L / (B * 2 ** k) for k in range(k_top))
        large = N ** 2 * L / (B * M)
        total += decay ** i * (small + large)
    return total


ESTIMATORS = {
    "nested-loop": nested_loop_cost,
    "standard-lsh": standard_lsh_lower_bound,
    "asim": asim_cost_estimate,
    "osim": osim_cost_bound,
}


def invert_nested_loop(cost: float, M_ratio: float = 1000.0, B: float = 1.0) -> float:
    """N such that ``2N + N^2/(M B) = cost`` with ``M = N / M_ratio``."""
    return cost / (2 + M_ratio / B)


@dataclass(frozen=True)
class PublishedRow:
    dataset: str
    metric: str
    r: float
    cr: float
    rho: float
    near_per_n: float
    cnear_per_n: float
    standard_lsh: float
    nested_loop: float
    asim: float

    def inputs(self, N: float | None = None, mode: str = "practical") -> CostInputs:
        if N is None:
            N = invert_nested_loop(self.nested_loop)
        return CostInputs(N=N, near=self.near_per_n * N, cnear=self.cnear_per_n * N,
                          M=N / 1000, B=1, rho=self.rho, mode=mode)


# Published comparison table (I/O counts; the standard-LSH column is a lower bound).
PUBLISHED_ROWS = (
    PublishedRow("Enron", "jaccard", 0.5, 0.1, 0.30, 1.8e3, 16e3, 7.5e9, 8e9, 3.2e9),
    PublishedRow("Enron", "cosine", 0.7, 0.2, 0.51, 1.6e3, 16e3, 212e9, 8e9, 6.6e9),
    PublishedRow("MNIST", "l1", 3000, 6000, 0.50, 1.8, 42, 29e6, 60e6, 12e6),
)
MNIST_N = 60_000


def estimate_table(x: CostInputs, label: str = "") -> str:
    """Aligned text table with one row per estimator."""
    head = f"{'estimator':<14}{'N':>12}{'M':>10}{'B':>6}{'rho':>7}{'near':>12}{'cnear':>12}{'mode':>11}{'I/Os':>14}"
    lines = [f"# {label}"] if label else []
    lines.append(head)
    for name, fn in ESTIMATORS.items():
        if name == "osim" and x.p1 is None:
            value = "n/a"
        else:
            value = f"{fn(x):.4g}"
        lines.append(f"{name:<14}{x.N:>12.6g}{x.M:>10.6g}{x.B:>6.6g}{x.rho:>7.3g}"
                     f"{x.near:>12.6g}{x.cnear:>12.6g}{x.mode:>11}{value:>14}")
    return "\n".join(lines) + "\n"
