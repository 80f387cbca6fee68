"""Iterative tree projection solvers.

Generic iteration: x <- P_k(x + alpha * A^T (b - A x)) from x = 0.  Two
stepsize schemes: constant alpha (ITP), and exact linesearch on the current
support with shrinkage backtracking when the support moves (NITP).  Each run
ends with a stable-point certificate: zero support-restricted gradient, the
pseudoinverse identity on the final support, and no profitable support swap
at the certified stepsize over the tested collection of supports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import theory
from .projection import project
from .sampling import (ProblemInstance, pinv_apply, sample_support,
                       _generator, STREAM_SUPPORT)
from .trees import (TreeSupport, list_supports, validate_support,
                    within_enum_budget)

TERM_GRADIENT = "gradient_stationary"
TERM_SUPPORT = "support_stable"
TERM_MAX_ITERS = "max_iters"

SUPPORT_STREAK = 3           # unchanged-support iterations required to stop
MAX_SHRINKS = 10000


class ConfigError(ValueError):
    pass


@dataclass
class SolverConfig:
    variant: str = "itp"                 # itp | nitp
    k: int | None = None                 # defaults to the instance sparsity
    alpha: float | str | None = None     # itp stepsize; None/"optimal" uses theory
    c: float = 0.05
    kappa: float = 1.1
    max_iters: int = 2000
    tol_gradient: float = 1e-10
    tol_residual_change: float = 1e-12
    stable_slack: float = 1e-8
    omega_budget: int = 64
    check_stable_point: bool = True

    def __post_init__(self):
        if self.variant not in ("itp", "nitp"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.variant == "nitp":
            if not 0.0 < self.c < 1.0:
                raise ConfigError("nitp requires c in (0, 1)")
            if self.kappa * (1.0 - self.c) <= 1.0:
                raise ConfigError(
                    f"nitp requires kappa (1 - c) > 1, got kappa={self.kappa}, c={self.c}")
        if isinstance(self.alpha, (int, float)) and self.alpha <= 0:
            raise ConfigError("itp stepsize must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")


@dataclass
class StablePointCheck:
    gradient_on_support_norm: float
    alpha_lower: float
    swap_margin: float
    omegas_tested: int
    exhaustive: bool
    pinv_residual: float     # || x_bar_G - A_G^+ b ||

    def passes(self, grad_tol: float, slack: float) -> bool:
        return (self.gradient_on_support_norm <= grad_tol
                and self.swap_margin >= -slack)


@dataclass
class SolverReport:
    x_hat: np.ndarray
    iterations: int
    objective_trace: list[float]
    stepsize_trace: list[float]
    support_changes: int
    termination: str
    stable_point_check: StablePointCheck | None
    final_support: TreeSupport
    nitp_trace: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        spc = None
        if self.stable_point_check is not None:
            c = self.stable_point_check
            spc = {"gradient_on_support_norm": c.gradient_on_support_norm,
                   "alpha_lower": c.alpha_lower, "swap_margin": c.swap_margin,
                   "omegas_tested": c.omegas_tested, "exhaustive": c.exhaustive,
                   "pinv_residual": c.pinv_residual}
        return {"iterations": self.iterations,
                "objective_trace": self.objective_trace,
                "stepsize_trace": self.stepsize_trace,
                "support_changes": self.support_changes,
                "termination": self.termination,
                "final_support": list(self.final_support.indices),
                "stable_point_check": spc,
                "nitp_trace": self.nitp_trace,
                "x_hat": self.x_hat.tolist()}


def itp_step(topology, matrix_a: np.ndarray, b: np.ndarray, x_m: np.ndarray,
             alpha_m: float, k: int) -> np.ndarray:
    """One generic iteration: project the gradient step onto tree supports."""
    if alpha_m <= 0:
        raise ValueError("stepsize must be positive")
    y = x_m + alpha_m * (matrix_a.T @ (b - matrix_a @ x_m))
    return project(topology, y, k).projected


def _support_of(x: np.ndarray) -> frozenset[int]:
    return frozenset(np.flatnonzero(x).tolist())


def _resolve_alpha(config: SolverConfig, instance: ProblemInstance) -> float:
    if isinstance(config.alpha, (int, float)):
        return float(config.alpha)
    k = config.k or instance.k
    rho = k / instance.n
    if rho < 1.0 / 3.0:
        return theory.optimal_alpha(instance.topology.order_d, rho)
    return 1.0    # optimal stepsize of the prior analysis; theory domain ends


def _solve(instance: ProblemInstance, config: SolverConfig) -> SolverReport:
    a = instance.matrix_a
    b = instance.b
    topo = instance.topology
    k = config.k or instance.k
    if k > topo.n_nodes:
        raise ConfigError(f"sparsity {k} exceeds signal dimension {topo.n_nodes}")
    norm_b = float(np.linalg.norm(b))
    nitp = config.variant == "nitp"
    alpha_const = None if nitp else _resolve_alpha(config, instance)

    x = np.zeros(topo.n_nodes)
    r = b.copy()
    psi_trace = [0.5 * float(r @ r)]
    step_trace: list[float] = []
    nitp_trace: list[dict[str, Any]] = []
    support_changes = 0
    streak = 0
    supp = _support_of(x)
    final_support: TreeSupport | None = None
    termination = TERM_MAX_ITERS
    iterations = 0

    for m in range(config.max_iters):
        g = a.T @ r
        if m > 0 and streak >= SUPPORT_STREAK:
            supp_idx = np.asarray(sorted(supp), dtype=np.int64)
            grad_supp = float(np.linalg.norm(g[supp_idx])) if supp_idx.size else 0.0
            if grad_supp <= config.tol_gradient * norm_b:
                termination = TERM_GRADIENT
                break
            # rounding-level objective stagnation: an ulp limit cycle on a
            # fixed support that never reaches an exact fixed point
            stall = config.tol_residual_change * np.finfo(float).eps \
                * max(1.0, psi_trace[0])
            if len(psi_trace) > SUPPORT_STREAK and all(
                    abs(psi_trace[-i - 1] - psi_trace[-i - 2]) <= stall
                    for i in range(SUPPORT_STREAK)):
                termination = TERM_SUPPORT
                break

        if nitp:
            gamma = supp if supp else _support_of(project(topo, g, k).projected)
            gamma_idx = np.asarray(sorted(gamma), dtype=np.int64)
            gs = g[gamma_idx]
            num = float(gs @ gs)
            w = a[:, gamma_idx] @ gs
            den = float(w @ w)
            if den < 1e-300 or num == 0.0:
                termination = TERM_GRADIENT
                break
            alpha_ls = num / den
            alpha_m = alpha_ls
            proj = project(topo, x + alpha_m * g, k)
            xt = proj.projected
            changed_branch = _support_of(xt) != supp
            shrinks = 0
            exit_ratio = float("inf")
            if changed_branch:
                while True:
                    dx = xt - x
                    adx = a @ dx
                    den2 = float(adx @ adx)
                    exit_ratio = ((1.0 - config.c) * float(dx @ dx) / den2
                                  if den2 > 0.0 else float("inf"))
                    if not alpha_m >= exit_ratio:
                        break
                    alpha_m /= config.kappa * (1.0 - config.c)
                    proj = project(topo, x + alpha_m * g, k)
                    xt = proj.projected
                    shrinks += 1
                    if shrinks > MAX_SHRINKS:
                        raise RuntimeError("nitp backtracking failed to terminate")
            nitp_trace.append({"iteration": m, "alpha_linesearch": alpha_ls,
                               "alpha_accepted": alpha_m,
                               "support_changed": changed_branch,
                               "shrinks": shrinks, "exit_ratio": exit_ratio})
            x_new = xt
        else:
            alpha_m = alpha_const
            proj = project(topo, x + alpha_m * g, k)
            x_new = proj.projected

        step_trace.append(float(alpha_m))
        iterations = m + 1
        final_support = proj.support
        new_supp = _support_of(x_new)
        if new_supp != supp:
            support_changes += 1
            streak = 0
        else:
            streak += 1
        fixed_point = bool(np.array_equal(x_new, x))
        x = x_new
        supp = new_supp
        r = b - a @ x
        psi_trace.append(0.5 * float(r @ r))
        if fixed_point:
            termination = TERM_GRADIENT
            break

    if final_support is None:
        # nitp can declare stationarity before its first step (zero gradient
        # on an empty support); certify on the projection of the iterate
        final_support = project(topo, x, k).support

    check = None
    if config.check_stable_point:
        if nitp:
            alpha_lower = min(step_trace) if step_trace else 0.0
        else:
            alpha_lower = alpha_const
        check = verify_stable_point(instance, x, alpha_lower,
                                    config.omega_budget, instance.seed,
                                    support=final_support, k=k)
    return SolverReport(x, iterations, psi_trace, step_trace, support_changes,
                        termination, check, final_support, nitp_trace)


def solve_itp(instance: ProblemInstance, config: SolverConfig | None = None) -> SolverReport:
    """Constant-stepsize ITP; alpha resolved from theory when not given."""
    config = config or SolverConfig(variant="itp")
    if config.variant != "itp":
        raise ConfigError("solve_itp requires variant='itp'")
    return _solve(instance, config)


def solve_nitp(instance: ProblemInstance, config: SolverConfig | None = None) -> SolverReport:
    """Normalised ITP: exact linesearch plus shrinkage backtracking."""
    config = config or SolverConfig(variant="nitp")
    if config.variant != "nitp":
        raise ConfigError("solve_nitp requires variant='nitp'")
    return _solve(instance, config)


def _leaf_swap_neighbors(topology, gamma: frozenset[int]) -> list[tuple[int, ...]]:
    kids = topology.children
    removable = [u for u in gamma
                 if u != topology.root and not any(c in gamma for c in kids[u])]
    out = []
    for u in removable:
        rest = gamma - {u}
        addable = {c for v in rest for c in kids[v] if c not in gamma}
        for v in addable:
            out.append(tuple(sorted(rest | {v})))
    return sorted(set(out))


def verify_stable_point(instance: ProblemInstance, x_bar: np.ndarray,
                        alpha_lower: float, omega_budget: int = 64,
                        seed: int = 0, *, support: TreeSupport | None = None,
                        k: int | None = None) -> StablePointCheck:
    """Evidence that x_bar is an alpha_lower-stable point.

    Checks the support-restricted gradient, the minimum-norm identity
    x_bar_G = A_G^+ b, and the no-profitable-swap inequality over either all
    supports of cardinality k (when enumerable) or a seeded sample plus every
    single-leaf swap of the current support.
    """
    topo = instance.topology
    if support is None:
        support = validate_support(topo, np.flatnonzero(x_bar).tolist())
    gamma = frozenset(support.indices)
    k = k or support.cardinality
    a = instance.matrix_a
    r = instance.b - a @ x_bar
    g_idx = support.as_array()
    grad_norm = float(np.linalg.norm(a[:, g_idx].T @ r))
    pinv_res = float(np.linalg.norm(x_bar[g_idx] - pinv_apply(a[:, g_idx], instance.b)))

    omegas: list[tuple[int, ...]]
    if within_enum_budget(topo.order_d, k):
        omegas = list_supports(topo, k)
        exhaustive = True
    else:
        gen = _generator(seed, STREAM_SUPPORT)
        sampled = {sample_support(topo, k, seed, gen=gen).indices
                   for _ in range(omega_budget)}
        sampled.update(_leaf_swap_neighbors(topo, gamma))
        omegas = sorted(sampled)
        exhaustive = False

    margin = float("inf")
    for om in omegas:
        om_set = frozenset(om)
        keep = np.asarray(sorted(gamma - om_set), dtype=np.int64)
        gain = np.asarray(sorted(om_set - gamma), dtype=np.int64)
        lhs = float(np.linalg.norm(x_bar[keep])) if keep.size else 0.0
        rhs = float(np.linalg.norm(a[:, gain].T @ r)) if gain.size else 0.0
        margin = min(margin, lhs - alpha_lower * rhs)
    return StablePointCheck(grad_norm, alpha_lower, margin, len(omegas),
                            exhaustive, pinv_res)


def recovery_error(report: SolverReport, instance: ProblemInstance) -> float:
    """Relative recovery error; for a zero signal, the absolute error."""
    scale = float(np.linalg.norm(instance.x_star))
    err = float(np.linalg.norm(report.x_hat - instance.x_star))
    return err / scale if scale > 0 else err
