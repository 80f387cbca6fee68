"""Measurement ensembles, tree-sparse signals, noise, and empirical tree-RIP.

Randomness comes from the Philox counter-based generator, with normal draws
produced by the Box-Muller transform; every sampler is a pure function of
(seed, stream), so experiments replay bit-identically.  Stream ids separate
the matrix, signal, noise and support draws of one instance.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from .trees import (TreeTopology, TreeSupport, build_complete_tree,
                    list_supports, within_enum_budget, topology_to_json,
                    topology_from_json)

STREAM_MATRIX = 0
STREAM_SIGNAL = 1
STREAM_NOISE = 2
STREAM_SUPPORT = 3

COEFF_LAWS = ("unit_gaussian", "rademacher", "flat_ones")


class RankDeficientError(np.linalg.LinAlgError):
    """Submatrix of A lost full column rank (violates general position)."""


def _generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


def _box_muller(gen: np.random.Generator, size: int) -> np.ndarray:
    m = (size + 1) // 2
    u1 = 1.0 - gen.random(m)          # (0, 1]: keeps log finite
    u2 = gen.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:size]


def sample_gaussian_matrix(n: int, n_signal: int, seed: int) -> np.ndarray:
    """n x N matrix with i.i.d. N(0, 1/n) entries; bitwise-reproducible per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n_signal < n:
        raise ValueError(f"need n <= N, got n={n}, N={n_signal}")
    gen = _generator(seed, STREAM_MATRIX)
    a = _box_muller(gen, n * n_signal).reshape(n, n_signal)
    a /= np.sqrt(n)
    return a


def sample_noise(n: int, sigma: float, seed: int) -> np.ndarray:
    """Noise with i.i.d. N(0, sigma^2/n) entries, so E||e||^2 = sigma^2."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return np.zeros(n)
    gen = _generator(seed, STREAM_NOISE)
    return _box_muller(gen, n) * (sigma / np.sqrt(n))


def sample_support(topology: TreeTopology, k: int, seed: int,
                   gen: np.random.Generator | None = None) -> TreeSupport:
    """Random rooted subtree of cardinality k.

    Uniform over all supports when the enumeration budget allows; otherwise
    uniform random boundary growth from the root, which is reproducible but
    not uniform over supports (a known, documented bias).
    """
    if k < 1 or k > topology.n_nodes:
        raise ValueError(f"infeasible support cardinality {k}")
    if gen is None:
        gen = _generator(seed, STREAM_SUPPORT)
    if within_enum_budget(topology.order_d, k):
        supports = list_supports(topology, k)
        if not supports:
            raise ValueError(f"topology admits no support of cardinality {k}")
        return TreeSupport(supports[int(gen.integers(len(supports)))], k)
    selected = [topology.root]
    member = {topology.root}
    boundary = list(topology.children[topology.root])
    while len(selected) < k:
        if not boundary:
            raise ValueError(f"topology admits no support of cardinality {k}")
        pick = int(gen.integers(len(boundary)))
        v = boundary.pop(pick)
        selected.append(v)
        member.add(v)
        boundary.extend(c for c in topology.children[v] if c not in member)
    return TreeSupport(tuple(sorted(selected)), k)


def sample_tree_sparse_signal(topology: TreeTopology, k: int,
                              coeff_law: str = "unit_gaussian",
                              seed: int = 0) -> np.ndarray:
    """k-tree-sparse vector: random support, nonzeros drawn per coeff_law."""
    if coeff_law not in COEFF_LAWS:
        raise ValueError(f"unknown coefficient law {coeff_law!r}")
    gen = _generator(seed, STREAM_SIGNAL)
    support = sample_support(topology, k, seed, gen=gen)
    x = np.zeros(topology.n_nodes)
    idx = support.as_array()            # ascending: fixed draw order
    if coeff_law == "unit_gaussian":
        x[idx] = _box_muller(gen, k)
    elif coeff_law == "rademacher":
        x[idx] = 2.0 * (gen.random(k) < 0.5) - 1.0
    else:
        x[idx] = 1.0
    return x


# ---------------------------------------------------------------------------
# problem instances
# ---------------------------------------------------------------------------

@dataclass
class ProblemInstance:
    """One recovery run: b = A x* + e with a k-tree-sparse x*."""
    matrix_a: np.ndarray
    x_star: np.ndarray
    noise_e: np.ndarray
    b: np.ndarray
    sigma: float
    topology: TreeTopology
    k: int
    seed: int = 0

    @property
    def n(self) -> int:
        return self.matrix_a.shape[0]

    @property
    def n_signal(self) -> int:
        return self.matrix_a.shape[1]


def default_signal_dim(n: int, k: int) -> int:
    """Smallest 2^m - 1 at least max(20 k, n): deep enough for tree reach,
    wide enough that the matrix keeps n <= N."""
    target = max(20 * k, n + 1)
    m = 1
    while (1 << m) - 1 < target:
        m += 1
    return (1 << m) - 1


def make_instance(n: int, k: int, order_d: int = 2, sigma: float = 0.0,
                  seed: int = 0, n_signal: int | None = None,
                  coeff_law: str = "unit_gaussian",
                  topology: TreeTopology | None = None) -> ProblemInstance:
    if topology is None:
        if n_signal is None:
            n_signal = default_signal_dim(n, k)
        topology = build_complete_tree(n_signal, order_d)
    n_signal = topology.n_nodes
    a = sample_gaussian_matrix(n, n_signal, seed)
    x_star = sample_tree_sparse_signal(topology, k, coeff_law, seed)
    e = sample_noise(n, sigma, seed)
    b = a @ x_star + e
    return ProblemInstance(a, x_star, e, b, sigma, topology, k, seed)


def save_instance(instance: ProblemInstance, path: str) -> None:
    obj = {
        "n": instance.n,
        "N": instance.n_signal,
        "k": instance.k,
        "d": instance.topology.order_d,
        "sigma": instance.sigma,
        "seed": instance.seed,
        "topology": json.loads(topology_to_json(instance.topology)),
        "a": instance.matrix_a.ravel().tolist(),
        "x_star": instance.x_star.tolist(),
        "e": instance.noise_e.tolist(),
        "b": instance.b.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_instance(path: str) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    topology = topology_from_json(json.dumps(obj["topology"]))
    n, n_sig = obj["n"], obj["N"]
    a = np.asarray(obj["a"], dtype=np.float64).reshape(n, n_sig)
    return ProblemInstance(a,
                           np.asarray(obj["x_star"], dtype=np.float64),
                           np.asarray(obj["e"], dtype=np.float64),
                           np.asarray(obj["b"], dtype=np.float64),
                           float(obj["sigma"]), topology, int(obj["k"]),
                           int(obj["seed"]))


# ---------------------------------------------------------------------------
# pseudoinverse helpers (QR with pivoting, explicit rank check)
# ---------------------------------------------------------------------------

def pinv_apply(a_sub: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Apply the Moore-Penrose pseudoinverse of a full-rank a_sub to y."""
    q, r, piv = qr(a_sub, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= 1e-12 * diag.max():
        raise RankDeficientError("submatrix is numerically rank deficient")
    z = solve_triangular(r, q.T @ y, lower=False)
    out = np.empty_like(z)
    out[piv] = z
    return out


def residual_projector_apply(a_sub: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(I - A_G A_G^+) y for a full-column-rank A_G."""
    return y - a_sub @ pinv_apply(a_sub, y)


# ---------------------------------------------------------------------------
# empirical tree-RIP
# ---------------------------------------------------------------------------

@dataclass
class RipEstimate:
    order_s: int
    lower_hat: float          # max over sampled supports of 1 - lambda_min
    upper_hat: float          # max over sampled supports of lambda_max - 1
    n_supports_sampled: int


def estimate_tree_rip(matrix_a: np.ndarray, topology: TreeTopology, s: int,
                      n_samples: int, seed: int) -> RipEstimate:
    """Monte Carlo lower bounds on the tree-RIP constants of order s.

    Samples supports, takes extreme eigenvalues of each Gram matrix, and
    keeps running maxima; maxima can only grow with more samples.  Repeated
    supports are served from a cache, so sampling a small support space to
    high counts costs nothing extra.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if s > matrix_a.shape[0]:
        warnings.warn("RIP order exceeds n: sampled Gram matrices are singular",
                      stacklevel=2)
    gen = _generator(seed, STREAM_SUPPORT)
    enumerable = within_enum_budget(topology.order_d, s)
    pool = list_supports(topology, s) if enumerable else None
    lower = 0.0
    upper = 0.0
    cache: dict[tuple[int, ...], tuple[float, float]] = {}
    for _ in range(n_samples):
        if pool is not None:
            key = pool[int(gen.integers(len(pool)))]
        else:
            key = sample_support(topology, s, seed, gen=gen).indices
        if key not in cache:
            sub = matrix_a[:, np.asarray(key, dtype=np.int64)]
            eigs = np.linalg.eigvalsh(sub.T @ sub)
            cache[key] = (float(eigs[0]), float(eigs[-1]))
        lo, hi = cache[key]
        lower = max(lower, 1.0 - lo)
        upper = max(upper, hi - 1.0)
    return RipEstimate(s, lower, upper, n_samples)


def stable_point_condition_terms(instance: ProblemInstance,
                                 gamma: TreeSupport) -> tuple[float, float, float, float]:
    """The four norms of the necessary stable-point condition on support gamma.

    Returns (||A_G^+ A_L x*_L||, ||A_G^+ e||,
             ||A_L^T (I - A_G A_G^+) A_L x*_L||, ||A_L^T (I - A_G A_G^+) e||)
    where L is the part of the signal support missed by gamma.
    """
    lam = set(np.flatnonzero(instance.x_star).tolist())
    gam = set(gamma.indices)
    if gam == lam:
        raise ValueError("gamma equals the signal support; condition is void")
    missed = np.asarray(sorted(lam - gam), dtype=np.int64)
    a_g = instance.matrix_a[:, np.asarray(sorted(gam), dtype=np.int64)]
    if missed.size == 0:
        y = np.zeros(instance.n)
    else:
        a_l = instance.matrix_a[:, missed]
        y = a_l @ instance.x_star[missed]
    term1 = float(np.linalg.norm(pinv_apply(a_g, y)))
    term2 = float(np.linalg.norm(pinv_apply(a_g, instance.noise_e)))
    res_y = residual_projector_apply(a_g, y)
    res_e = residual_projector_apply(a_g, instance.noise_e)
    if missed.size == 0:
        term3 = term4 = 0.0
    else:
        a_l = instance.matrix_a[:, missed]
        term3 = float(np.linalg.norm(a_l.T @ res_y))
        term4 = float(np.linalg.norm(a_l.T @ res_e))
    return term1, term2, term3, term4
