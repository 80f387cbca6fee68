"""Asymptotic recovery theory for tree-sparse signals and Gaussian matrices.

Everything here is a deterministic scalar computation in the oversampling
ratio ``rho`` (the limit of k/n) and the tree order ``d``.  Two families of
quantities are provided:

* worst-case bounds on tree-restricted isometry constants, ``TU(rho)`` and
  ``TL(rho)``, defined implicitly through the exponential decay rates of the
  extreme eigenvalues of Gaussian Gram matrices, together with the
  convergence factor ``mu``, stability factor ``xi``, the optimal constant
  stepsize ``alpha_hat`` and the oversampling threshold ``rho_hat`` where
  ``mu = 1``;

* average-case (signal independent of matrix) tail levels ``TIU``, ``TIL``
  (chi-square) and ``TIF`` (F distribution), the stable-point oversampling
  thresholds built from them, and the associated stability factors.

All implicitly defined quantities are solved by plain bisection; on their
stated domains every defining function is strictly monotone, so brackets are
either fixed or found by doubling an upper endpoint.  Roots are refined until
the bracket collapses to adjacent floating-point numbers, which leaves
defining-equation residuals at roundoff level (far below 1e-10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

SQRT3 = math.sqrt(3.0)

# Recovery targets of the prior symmetric-RIP analysis (binary trees):
# ITP needs TR_{3k} < 1/sqrt(3), NITP (kappa = 1.1) needs
# TR_{3k} < (11 - sqrt(3)) / (11 + 21 sqrt(3)) ~= 0.1956.
PRIOR_TARGET_ITP = 1.0 / SQRT3
PRIOR_TARGET_NITP = (11.0 - SQRT3) / (11.0 + 21.0 * SQRT3)


class NoSolutionError(ValueError):
    """An implicit equation has no root on its admissible interval."""


class DenominatorNonpositiveError(ValueError):
    """Stability factor requested at or beyond its divergence point."""


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def _bisect(f: Callable[[float], float], lo: float, hi: float,
            flo: float | None = None, fhi: float | None = None) -> float:
    """Bisection on [lo, hi]; runs until the bracket cannot shrink further."""
    if flo is None:
        flo = f(lo)
    if fhi is None:
        fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo < 0.0) == (fhi < 0.0):
        raise NoSolutionError(f"no sign change on [{lo!r}, {hi!r}]")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)


def _expand_upper(f: Callable[[float], float], flo: float, hi: float,
                  cap: int = 1000) -> tuple[float, float]:
    """Double ``hi`` until ``f`` changes sign relative to ``flo``."""
    fhi = f(hi)
    for _ in range(cap):
        if (fhi < 0.0) != (flo < 0.0) or fhi == 0.0:
            return hi, fhi
        hi *= 2.0
        fhi = f(hi)
    raise NoSolutionError("upper bracket expansion failed")


# ---------------------------------------------------------------------------
# entropy and tree-union exponent
# ---------------------------------------------------------------------------

def shannon_entropy(p: float) -> float:
    """Base-e Shannon entropy -p ln p - (1-p) ln(1-p), for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"entropy argument must lie in (0, 1), got {p}")
    return -p * math.log(p) - (1.0 - p) * math.log1p(-p)


@lru_cache(maxsize=None)
def union_exponent(d: int) -> float:
    """Exponential growth rate d*H(1/d) of the rooted d-ary tree count."""
    if d < 2:
        raise ValueError("tree order must be >= 2")
    return d * shannon_entropy(1.0 / d)


# ---------------------------------------------------------------------------
# tree-RIP bounds TU / TL
# ---------------------------------------------------------------------------

def _psi_max(lam: float, rho: float) -> float:
    return 0.5 * ((1.0 + rho) * math.log(lam) + 1.0 + rho
                  - rho * math.log(rho) - lam)


def _psi_min_logdomain(t: float, rho: float) -> float:
    # psi_min evaluated at lam = exp(t); working in t avoids underflow of
    # lam for rho close to 1, where the root sits at astronomically small lam.
    lam = math.exp(t)
    return (shannon_entropy(rho)
            + 0.5 * ((1.0 - rho) * t + 1.0 - rho + rho * math.log(rho) - lam))


def _check_d(d: int) -> None:
    if not isinstance(d, int) or d < 2:
        raise ValueError(f"tree order must be an integer >= 2, got {d}")


@lru_cache(maxsize=None)
def rip_bound_upper(d: int, rho: float) -> float:
    """TU(rho): upper tree-RIP bound, root of psi_max(1 + TU) + d rho H(1/d) = 0."""
    _check_d(d)
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    e = d * rho * shannon_entropy(1.0 / d)

    def f(lam: float) -> float:
        return _psi_max(lam, rho) + e

    lo = 1.0 + rho
    flo = f(lo)               # > 0: psi_max(1 + rho) > 0 and e > 0
    hi, fhi = _expand_upper(f, flo, 2.0 * lo)
    return _bisect(f, lo, hi, flo, fhi) - 1.0


@lru_cache(maxsize=None)
def rip_bound_lower(d: int, rho: float) -> float:
    """TL(rho): lower tree-RIP bound, root of psi_min(1 - TL) + d rho H(1/d) = 0."""
    _check_d(d)
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    e = d * rho * shannon_entropy(1.0 / d)

    def f(t: float) -> float:
        return _psi_min_logdomain(t, rho) + e

    hi = math.log1p(-rho)     # t = ln(1 - rho); psi_min > 0 there
    # The root goes like -2(e + H(rho)) / (1 - rho) as rho -> 1; overshoot it.
    lo = -(2.0 * (e + shannon_entropy(rho)) + 4.0) / (1.0 - rho) - 4.0
    t = _bisect(f, lo, hi)
    return -math.expm1(t)     # 1 - lam, accurate for both tiny and large TL


def prior_bound_tr(rho: float) -> float:
    """TR(rho): prior symmetric tree-RIP bound for binary trees.

    Smallest positive root of r^2 (9 - r) = 1296 rho [1 + ln(72 / r)];
    the equation loses its solution for rho above roughly 0.02407.
    """
    if rho <= 0.0:
        raise ValueError(f"rho must be positive, got {rho}")

    def f(r: float) -> float:
        return r * r * (9.0 - r) - 1296.0 * rho * (1.0 + math.log(72.0 / r))

    # f < 0 as r -> 0+; scan a log grid for the first sign change, which
    # brackets the smallest root (the bound must vanish as rho -> 0).
    grid_lo, grid_hi, npts = 1e-6, 9.0, 800
    step = (grid_hi / grid_lo) ** (1.0 / (npts - 1))
    r_prev = grid_lo
    f_prev = f(r_prev)
    for i in range(1, npts):
        r = grid_lo * step ** i
        fr = f(r)
        if fr == 0.0:
            return r
        if (fr < 0.0) != (f_prev < 0.0):
            return _bisect(f, r_prev, r, f_prev, fr)
        r_prev, f_prev = r, fr
    raise NoSolutionError(
        f"symmetric tree-RIP bound undefined at rho={rho} (needs rho < ~0.02407)")


# ---------------------------------------------------------------------------
# chi-square and F tail levels
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def tail_bound_tiu(d: int, rho: float, lam: float) -> float:
    """TIU(rho, lam): root of nu - ln(1 + nu) = 2 d rho H(1/d) / lam on nu > 0."""
    _check_d(d)
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    rhs = 2.0 * union_exponent(d) * rho / lam

    def f(nu: float) -> float:
        return nu - math.log1p(nu) - rhs

    hi, fhi = _expand_upper(f, -rhs, 1.0)
    return _bisect(f, 0.0, hi, -rhs, fhi)


@lru_cache(maxsize=None)
def tail_bound_til(d: int, rho: float, lam: float) -> float:
    """TIL(rho, lam): root of -nu - ln(1 - nu) = 2 d rho H(1/d) / lam on (0, 1)."""
    _check_d(d)
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    rhs = 2.0 * union_exponent(d) * rho / lam

    # substitute nu = 1 - exp(u): -nu - ln(1-nu) becomes exp(u) - 1 - u, and
    # the bracket stays clear of nu = 1 even for large right-hand sides
    def f(u: float) -> float:
        return math.expm1(u) - u - rhs

    lo = -(rhs + 2.0)          # f(lo) = 2 + exp(lo) - ... > 0
    u = _bisect(f, lo, -1e-300)
    return -math.expm1(u)


@lru_cache(maxsize=None)
def tail_bound_tif(d: int, rho: float) -> float:
    """TIF(rho): root of ln(1+f) - rho ln f = 2 d rho H(1/d) + H(rho), f > rho/(1-rho)."""
    _check_d(d)
    if not 0.0 < rho <= 0.5:
        raise ValueError(f"rho must lie in (0, 1/2], got {rho}")
    rhs = 2.0 * union_exponent(d) * rho + shannon_entropy(rho)

    def f(x: float) -> float:
        return math.log1p(x) - rho * math.log(x) - rhs

    lo = rho / (1.0 - rho)
    flo = f(lo)               # equals -2 d rho H(1/d) < 0 up to roundoff
    if flo >= 0.0:
        lo *= 1.0 + 1e-12
        flo = f(lo)
    hi, fhi = _expand_upper(f, flo, max(1.0, 2.0 * lo))
    return _bisect(f, lo, hi, flo, fhi)


# ---------------------------------------------------------------------------
# convergence / stability factors and optimal stepsize (RIP analysis)
# ---------------------------------------------------------------------------

def optimal_alpha(d: int, rho: float) -> float:
    """Stepsize 2 / [2 + TU(3 rho) - TL(3 rho)] equalizing the two mu branches."""
    if not 0.0 < rho < 1.0 / 3.0:
        raise ValueError(f"rho must lie in (0, 1/3), got {rho}")
    return 2.0 / (2.0 + rip_bound_upper(d, 3.0 * rho) - rip_bound_lower(d, 3.0 * rho))


def rip_factors(d: int, rho: float, variant: str, *,
                alpha: float | str | None = None,
                kappa: float | None = None) -> tuple[float, float]:
    """Worst-case convergence factor mu and stability factor xi at ratio rho.

    For ``variant="itp"`` pass a stepsize ``alpha`` (or "optimal"); for
    ``variant="nitp"`` pass the shrinkage parameter ``kappa``.
    """
    if not 0.0 < rho < 1.0 / 3.0:
        raise ValueError(f"rho must lie in (0, 1/3), got {rho}")
    tu3 = rip_bound_upper(d, 3.0 * rho)
    tl3 = rip_bound_lower(d, 3.0 * rho)
    tu2 = rip_bound_upper(d, 2.0 * rho)
    if variant == "itp":
        if alpha is None or alpha == "optimal":
            alpha = optimal_alpha(d, rho)
        if alpha <= 0.0:
            raise ValueError("itp stepsize must be positive")
        mu = SQRT3 * max(alpha * (1.0 + tu3) - 1.0, 1.0 - alpha * (1.0 - tl3))
        xi = alpha * math.sqrt(3.0 * (1.0 + tu2))
        return mu, xi
    if variant == "nitp":
        if kappa is None or kappa <= 1.0:
            raise ValueError("nitp requires kappa > 1")
        tl1 = rip_bound_lower(d, rho)
        mu = SQRT3 * max((1.0 + tu3) / (1.0 - tl1) - 1.0,
                         1.0 - (1.0 - tl3) / (kappa * (1.0 + tu2)))
        xi = math.sqrt(3.0 * (1.0 + tu2)) / (1.0 - tl1)
        return mu, xi
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# oversampling thresholds
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def threshold_rip(d: int, variant: str, kappa: float | None = None) -> float:
    """rho_hat from the tree-RIP analysis: unique root of mu(rho) = 1.

    For ITP the optimal stepsize is recomputed at every trial rho, so the
    threshold is the fixed point of the rho-dependent optimally-stepped mu.
    """
    def f(rho: float) -> float:
        mu, _ = rip_factors(d, rho, variant, alpha="optimal", kappa=kappa)
        return mu - 1.0

    return _bisect(f, 1e-9, (1.0 / 3.0) * (1.0 - 1e-9))


def sp_threshold_lhs(d: int, rho: float) -> float:
    """sqrt(TIF(rho)) / [(1 - rho) (1 - TIL(rho, 1 - rho))]."""
    return (math.sqrt(tail_bound_tif(d, rho))
            / ((1.0 - rho) * (1.0 - tail_bound_til(d, rho, 1.0 - rho))))


@lru_cache(maxsize=None)
def threshold_stable_point(d: int, variant: str, kappa: float | None = None) -> float:
    """rho_hat from the stable-point analysis (alpha-free for ITP).

    Solves  sqrt(TIF) / [(1-rho)(1-TIL(rho,1-rho))] = 1 / (c [1 + TU(2 rho)])
    on (0, 1/2], with c = 1 for ITP and c = kappa for NITP.
    """
    if variant == "itp":
        c = 1.0
    elif variant == "nitp":
        if kappa is None or kappa <= 1.0:
            raise ValueError("nitp requires kappa > 1")
        c = kappa
    else:
        raise ValueError(f"unknown variant {variant!r}")

    def f(rho: float) -> float:
        return sp_threshold_lhs(d, rho) - 1.0 / (c * (1.0 + rip_bound_upper(d, 2.0 * rho)))

    return _bisect(f, 1e-9, 0.5)


@lru_cache(maxsize=None)
def threshold_prior(variant: str) -> float:
    """rho_hat from the prior symmetric analysis (binary trees only).

    Inverts TR(3 rho) = 1/sqrt(3) for ITP and TR(3 rho) ~= 0.1956 for NITP
    with kappa = 1.1.
    """
    if variant == "itp":
        target = PRIOR_TARGET_ITP
    elif variant == "nitp":
        target = PRIOR_TARGET_NITP
    else:
        raise ValueError(f"unknown variant {variant!r}")

    def f(rho: float) -> float:
        return prior_bound_tr(3.0 * rho) - target

    return _bisect(f, 1e-12, 0.024 / 3.0)


def oversampling_reciprocal(rho_hat: float) -> int:
    """Measurements-per-sparsity guarantee: smallest integer C with 1/C <= rho_hat."""
    return math.ceil(1.0 / rho_hat - 1e-9)


def alpha_window_sp(d: int, rho: float) -> tuple[float, float]:
    """Admissible constant-stepsize window of the stable-point analysis."""
    return sp_threshold_lhs(d, rho), 1.0 / (1.0 + rip_bound_upper(d, 2.0 * rho))


def stability_factor_sp(d: int, rho: float, variant: str, *,
                        alpha: float | None = None,
                        kappa: float | None = None) -> tuple[float, float]:
    """Average-case stability pair (a(rho), xi_SP(rho)).

    For ITP, ``alpha`` defaults to the upper end of the admissible window,
    1 / (1 + TU(2 rho)), which is the choice under which xi_SP diverges
    exactly at the stable-point threshold.  For NITP the effective stepsize
    1 / (kappa [1 + TU(2 rho)]) is built in.
    """
    if not 0.0 < rho <= 0.5:
        raise ValueError(f"rho must lie in (0, 1/2], got {rho}")
    tif = tail_bound_tif(d, rho)
    til = tail_bound_til(d, rho, 1.0 - rho)
    tiu_hi = tail_bound_tiu(d, rho, 1.0 - rho)
    tiu_lo = tail_bound_tiu(d, rho, rho)
    cross = math.sqrt(rho * (1.0 - rho) * (1.0 + tiu_hi) * (1.0 + tiu_lo))

    if variant == "itp":
        if alpha is None:
            alpha = 1.0 / (1.0 + rip_bound_upper(d, 2.0 * rho))
        if alpha <= 0.0:
            raise ValueError("itp stepsize must be positive")
        den = alpha * (1.0 - rho) * (1.0 - til) - math.sqrt(tif)
        num = math.sqrt(tif) + alpha * cross
    elif variant == "nitp":
        if kappa is None or kappa <= 1.0:
            raise ValueError("nitp requires kappa > 1")
        ab = 1.0 / (kappa * (1.0 + rip_bound_upper(d, 2.0 * rho)))
        den = (1.0 - rho) * ab * (1.0 - til) - math.sqrt(tif)
        num = math.sqrt(tif) + ab * cross
    else:
        raise ValueError(f"unknown variant {variant!r}")

    if den <= 0.0:
        raise DenominatorNonpositiveError(
            f"stability factor undefined at rho={rho} (at or beyond threshold)")
    a = num / den
    xi = math.sqrt(tif * (1.0 + a) ** 2 + a * a)
    return a, xi


# ---------------------------------------------------------------------------
# tabulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoryQuery:
    """Evaluation request: tree order, NITP kappa, ITP alpha, analysis kind.

    ``rho`` is the point of interest for single-value queries; table
    evaluation takes an explicit grid and ignores it.
    """
    order_d: int = 2
    rho: float | None = None
    kappa: float = 1.1
    alpha: float | str = "optimal"
    analysis: str = "rip"       # rip | sp | prior


@dataclass(frozen=True)
class TheoryResult:
    """One table row; ``None`` marks a quantity outside its domain."""
    rho: float
    tu: float | None
    tl: float | None
    tr: float | None
    tiu: float | None
    til: float | None
    tif: float | None
    mu_itp: float | None
    xi_itp: float | None
    mu_nitp: float | None
    xi_nitp: float | None
    alpha_hat: float | None


CSV_FIELDS = ("rho", "tu", "tl", "tr", "tiu", "til", "tif",
              "mu_itp", "xi_itp", "mu_nitp", "xi_nitp", "alpha_hat")


def theory_table(query: TheoryQuery, rho_grid: Sequence[float]) -> list[TheoryResult]:
    """Evaluate every in-domain quantity on a rho grid (row per rho).

    The chi-square columns are reported at the lambda argument that enters
    the stable-point threshold, lam = 1 - rho.
    """
    d = query.order_d
    rows = []
    for rho in rho_grid:
        if not 0.0 < rho < 1.0:
            raise ValueError(f"grid rho must lie in (0, 1), got {rho}")
        tu = rip_bound_upper(d, rho)
        tl = rip_bound_lower(d, rho)
        tr = None
        if d == 2:
            try:
                tr = prior_bound_tr(rho)
            except NoSolutionError:
                tr = None
        tiu = tail_bound_tiu(d, rho, 1.0 - rho)
        til = tail_bound_til(d, rho, 1.0 - rho)
        tif = tail_bound_tif(d, rho) if rho <= 0.5 else None
        mu_i = xi_i = mu_n = xi_n = a_hat = None
        if rho < 1.0 / 3.0:
            a_hat = optimal_alpha(d, rho)
            mu_i, xi_i = rip_factors(d, rho, "itp", alpha=query.alpha)
            mu_n, xi_n = rip_factors(d, rho, "nitp", kappa=query.kappa)
        rows.append(TheoryResult(rho, tu, tl, tr, tiu, til, tif,
                                 mu_i, xi_i, mu_n, xi_n, a_hat))
    return rows
