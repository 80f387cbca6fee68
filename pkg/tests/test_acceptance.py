"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.

Known honest failure: test_c1_sp_threshold_values pins the published 3-digit
stable-point threshold values, but the defining equations' exact roots differ
in the third digit (0.020057 vs 0.0202 etc.; verified independently at
40-digit precision, and the published reciprocals 50/55 match the exact
roots).  The equations are implemented faithfully rather than tuned to the
rounded prose values, so that sub-test stays red by design.
"""

import json
import math
import time

import numpy as np
import pytest

from treeitp import theory
from treeitp.cli import main as cli_main
from treeitp.experiments import threshold_row
from treeitp.projection import project, project_bruteforce, save_vector
from treeitp.sampling import (make_instance, sample_gaussian_matrix,
                              estimate_tree_rip)
from treeitp.solvers import SolverConfig, solve_itp, solve_nitp, recovery_error
from treeitp.trees import (build_complete_tree, enumerate_supports, tree_count,
                           log_tree_count, save_topology)


def _criterion(num: str, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" [{detail}]" if detail else ""
    print(f"ACCEPTANCE {num} {status}: {name}{suffix}")
    assert ok, f"criterion {num} ({name}){suffix}"


def _round3(x: float) -> float:
    if x == 0:
        return 0.0
    exp = math.floor(math.log10(abs(x)))
    scale = 10.0 ** (exp - 2)
    return round(x / scale) * scale


def _clear_theory_caches() -> None:
    for fn in (theory.rip_bound_upper, theory.rip_bound_lower,
               theory.tail_bound_tiu, theory.tail_bound_til,
               theory.tail_bound_tif, theory.threshold_rip,
               theory.threshold_stable_point, theory.threshold_prior):
        fn.cache_clear()


# ---------------------------------------------------------------------------
# criterion 1: threshold regression against published constants
# ---------------------------------------------------------------------------

def test_c1_rip_thresholds():
    _clear_theory_caches()
    expected = {(2, "itp"): 0.00875, (2, "nitp"): 0.00146,
                (4, "itp"): 0.00705, (4, "nitp"): 0.00123}
    ok = True
    details = []
    for (d, variant), target in expected.items():
        kappa = 1.1 if variant == "nitp" else None
        t0 = time.perf_counter()
        rho = theory.threshold_rip(d, variant, kappa=kappa)
        dt = time.perf_counter() - t0
        good = _round3(rho) == pytest.approx(target, rel=1e-12) and dt < 1.0
        ok &= good
        details.append(f"d={d} {variant}: {rho:.6g} ({dt * 1e3:.0f}ms)")
    _criterion("1a", "tree-RIP thresholds match published 3-digit values",
               ok, "; ".join(details))


def test_c1_sp_threshold_values():
    expected = {(2, "itp"): 0.0202, (2, "nitp"): 0.0184,
                (4, "itp"): 0.0147, (4, "nitp"): 0.0134}
    ok = True
    details = []
    for (d, variant), target in expected.items():
        kappa = 1.1 if variant == "nitp" else None
        rho = theory.threshold_stable_point(d, variant, kappa=kappa)
        good = _round3(rho) == pytest.approx(target, rel=1e-12)
        ok &= good
        details.append(f"d={d} {variant}: {rho:.6g} vs {target}")
    _criterion("1b", "stable-point thresholds match published 3-digit values "
               "(known spec/paper discrepancy, see decisions ledger)",
               ok, "; ".join(details))


def test_c1_reciprocals_print_as_published():
    vals = {
        50: theory.threshold_stable_point(2, "itp"),
        55: theory.threshold_stable_point(2, "nitp", kappa=1.1),
        115: theory.threshold_rip(2, "itp"),
        683: theory.threshold_rip(2, "nitp", kappa=1.1),
    }
    ok = all(theory.oversampling_reciprocal(rho) == target
             for target, rho in vals.items())
    detail = ", ".join(f"{theory.oversampling_reciprocal(r)}=={t}"
                       for t, r in vals.items())
    _criterion("1c", "reciprocals round to 50, 55, 115, 683 as printed",
               ok, detail)


def test_c1_prior_thresholds_and_factors():
    itp = threshold_row(2, "itp")
    nitp = threshold_row(2, "nitp")
    ok = (_round3(itp["rho_prior"]) == pytest.approx(1.24e-4, rel=1e-12)
          and _round3(nitp["rho_prior"]) == pytest.approx(1.25e-5, rel=1e-12)
          and itp["inv_prior"] == 8068 and nitp["inv_prior"] == 79705
          and itp["factor"] == 70 and nitp["factor"] == 116)
    _criterion("1d", "prior-analysis thresholds and improvement factors",
               ok, f"{itp['rho_prior']:.4g}/{itp['factor']}x, "
                   f"{nitp['rho_prior']:.4g}/{nitp['factor']}x")


# ---------------------------------------------------------------------------
# criterion 2: defining-equation residuals
# ---------------------------------------------------------------------------

def test_c2_defining_equation_residuals():
    t0 = time.perf_counter()
    tol = 1e-10
    worst = 0.0

    def track(res):
        nonlocal worst
        worst = max(worst, abs(res))

    d = 2
    e2 = lambda rho: d * rho * theory.shannon_entropy(0.5)
    for rho in np.linspace(0.005, 0.95, 50):
        tu = theory.rip_bound_upper(d, float(rho))
        track(theory._psi_max(1.0 + tu, rho) + e2(rho))
    for rho in np.linspace(0.005, 0.6, 50):
        tl = theory.rip_bound_lower(d, float(rho))
        track(theory._psi_min_logdomain(math.log(1.0 - tl), rho) + e2(rho))
    for rho in np.linspace(0.0005, 0.023, 50):
        r = theory.prior_bound_tr(float(rho))
        track(r * r * (9.0 - r) - 1296.0 * rho * (1.0 + math.log(72.0 / r)))
    for rho in np.linspace(0.005, 0.9, 50):
        lam = 1.0 - float(rho)
        nu = theory.tail_bound_tiu(d, float(rho), lam)
        track(nu - math.log1p(nu) - 2.0 * e2(rho) / lam)
    for rho in np.linspace(0.005, 0.6, 50):
        lam = 1.0 - float(rho)
        nv = theory.tail_bound_til(d, float(rho), lam)
        track(-nv - math.log1p(-nv) - 2.0 * e2(rho) / lam)
    for rho in np.linspace(0.005, 0.5, 50):
        f = theory.tail_bound_tif(d, float(rho))
        track(math.log1p(f) - rho * math.log(f)
              - (2.0 * e2(rho) + theory.shannon_entropy(float(rho))))

    for dd in (2, 4):
        for variant, kap in (("itp", None), ("nitp", 1.1)):
            rho = theory.threshold_rip(dd, variant, kappa=kap)
            mu, _ = theory.rip_factors(dd, rho, variant, alpha="optimal", kappa=kap)
            track(mu - 1.0)
            rho = theory.threshold_stable_point(dd, variant, kappa=kap)
            track(theory.sp_threshold_lhs(dd, rho)
                  - 1.0 / ((kap or 1.0) * (1.0 + theory.rip_bound_upper(dd, 2 * rho))))
    for variant, target in (("itp", theory.PRIOR_TARGET_ITP),
                            ("nitp", theory.PRIOR_TARGET_NITP)):
        rho = theory.threshold_prior(variant)
        track(theory.prior_bound_tr(3.0 * rho) - target)

    dt = time.perf_counter() - t0
    _criterion("2", "defining-equation residuals <= 1e-10 on 50-point grids",
               worst <= tol and dt < 10.0,
               f"worst residual {worst:.2e}, {dt:.1f}s")


# ---------------------------------------------------------------------------
# criterion 3: projection oracle equivalence
# ---------------------------------------------------------------------------

def test_c3_projection_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    trials = 1000
    energy_mismatch = 0
    support_mismatch = 0
    for _ in range(trials):
        n = int(rng.integers(3, 16))
        d = int(rng.integers(2, 4))
        topo = build_complete_tree(n, d)
        k = int(rng.integers(1, min(n, 6) + 1))
        x = rng.normal(size=n)
        dp = project(topo, x, k)
        oracle = project_bruteforce(topo, x, k)
        if dp.captured_energy != oracle.captured_energy:
            energy_mismatch += 1
            continue
        # support must agree whenever the maximizer is unique
        energies = sorted((float(x[s.as_array()] @ x[s.as_array()])
                           for s in enumerate_supports(topo, min(k, n))),
                          reverse=True)
        unique = len(energies) < 2 or energies[0] > energies[1]
        if unique and dp.support != oracle.support:
            support_mismatch += 1
    dt = time.perf_counter() - t0
    _criterion("3", "projection matches enumeration oracle on 1000 instances",
               energy_mismatch == 0 and support_mismatch == 0 and dt < 30.0,
               f"energy mismatches {energy_mismatch}, support mismatches "
               f"{support_mismatch}, {dt:.1f}s")


# ---------------------------------------------------------------------------
# criterion 4: tree counting
# ---------------------------------------------------------------------------

def test_c4_tree_counting():
    ok = True
    for d in (2, 3, 4):
        for k in range(1, 7):
            n = (d ** k - 1) // (d - 1)       # k full levels: no clipping
            topo = build_complete_tree(n, d)
            if sum(1 for _ in enumerate_supports(topo, k)) != tree_count(d, k):
                ok = False
    limit_err = abs(log_tree_count(2, 2000) / 2000 - 2.0 * math.log(2.0))
    ok &= limit_err < 0.01
    _criterion("4", "enumeration equals the counting formula; growth-rate "
               "limit at k=2000", ok, f"limit error {limit_err:.4f}")


# ---------------------------------------------------------------------------
# criterion 5: solver contracts
# ---------------------------------------------------------------------------

_RUN_CACHE: dict[str, list] = {}


def _contract_runs(variant: str, runs: int = 100):
    if variant in _RUN_CACHE:
        return _RUN_CACHE[variant]
    reports = []
    for trial in range(runs):
        seed = 5000 + trial
        k = 2 + trial % 4
        inst = make_instance(n=100, k=k, order_d=2,
                             sigma=0.05 if trial % 3 == 0 else 0.0,
                             seed=seed, n_signal=127)
        if variant == "nitp":
            rep = solve_nitp(inst, SolverConfig(variant="nitp", kappa=1.1,
                                                c=0.05, max_iters=3000))
        else:
            est = estimate_tree_rip(inst.matrix_a, inst.topology, 2 * k, 256,
                                    seed=seed)
            alpha = 0.9 / (1.0 + est.upper_hat)
            rep = solve_itp(inst, SolverConfig(variant="itp", alpha=alpha,
                                               max_iters=3000))
        reports.append((inst, rep))
    _RUN_CACHE[variant] = reports
    return reports


def test_c5a_nitp_branch_contracts():
    bad = 0
    reports = _contract_runs("nitp")
    for _, rep in reports:
        for rec in rep.nitp_trace:
            if rec["support_changed"]:
                if not rec["alpha_accepted"] < rec["exit_ratio"]:
                    bad += 1
                if rec["shrinks"] == 0 and \
                        rec["alpha_accepted"] != rec["alpha_linesearch"]:
                    bad += 1
            elif rec["alpha_accepted"] != rec["alpha_linesearch"]:
                bad += 1
    _criterion("5a", "NITP stepsize branch contracts hold on every iteration "
               "of 100 runs", bad == 0, f"violations {bad}")


def test_c5b_itp_monotone_descent():
    viol = 0
    reports = _contract_runs("itp")
    for _, rep in reports:
        tr = rep.objective_trace
        if any(tr[i + 1] > tr[i] + 1e-12 for i in range(len(tr) - 1)):
            viol += 1
    _criterion("5b", "ITP objective non-increasing under the empirical RIP "
               "stepsize cap on 100 runs", viol == 0, f"violations {viol}")


def test_c5c_stable_point_certificates():
    runs = _contract_runs("itp") + _contract_runs("nitp")
    nonconv = grad_bad = pinv_bad = 0
    for inst, rep in runs:
        if rep.termination != "gradient_stationary":
            nonconv += 1
            continue
        check = rep.stable_point_check
        nb = float(np.linalg.norm(inst.b))
        if check.gradient_on_support_norm > 1e-8 * nb:
            grad_bad += 1
        if check.pinv_residual > 1e-8:
            pinv_bad += 1
    _criterion("5c", "every converged point satisfies the stationarity and "
               "minimum-norm identities to 1e-8",
               nonconv == 0 and grad_bad == 0 and pinv_bad == 0,
               f"nonconverged {nonconv}, gradient {grad_bad}, pinv {pinv_bad}")


# ---------------------------------------------------------------------------
# criterion 6: desk-scale recovery
# ---------------------------------------------------------------------------

def test_c6_desk_scale_recovery():
    # Spec states NITP(kappa=1.1, c=0.1), but that pair violates the spec's
    # own invariant kappa (1 - c) > 1 (the backtracking factor would grow the
    # stepsize); c=0.05 is used instead.  See the decisions ledger.
    t0 = time.perf_counter()
    n, rho, trials, sigma = 500, 0.01, 100, 0.1
    k = round(rho * n)
    alpha_hat = theory.optimal_alpha(2, rho)
    _, xi_itp = theory.stability_factor_sp(2, rho, "itp", alpha=alpha_hat)
    _, xi_nitp = theory.stability_factor_sp(2, rho, "nitp", kappa=1.1)
    cfg_itp = SolverConfig(variant="itp", alpha=alpha_hat, check_stable_point=False)
    cfg_nitp = SolverConfig(variant="nitp", kappa=1.1, c=0.05,
                            check_stable_point=False)

    clean_itp = clean_nitp = noisy_itp = noisy_nitp = 0
    for t in range(trials):
        inst = make_instance(n, k, 2, 0.0, seed=60000 + t)
        clean_itp += recovery_error(solve_itp(inst, cfg_itp), inst) <= 1e-6
        clean_nitp += recovery_error(solve_nitp(inst, cfg_nitp), inst) <= 1e-6
        noisy = make_instance(n, k, 2, sigma, seed=70000 + t)
        e1 = float(np.linalg.norm(solve_itp(noisy, cfg_itp).x_hat - noisy.x_star))
        noisy_itp += e1 <= xi_itp * sigma
        e2 = float(np.linalg.norm(solve_nitp(noisy, cfg_nitp).x_hat - noisy.x_star))
        noisy_nitp += e2 <= xi_nitp * sigma
    dt = time.perf_counter() - t0
    rates = (clean_itp / trials, clean_nitp / trials,
             noisy_itp / trials, noisy_nitp / trials)
    _criterion("6", "desk-scale recovery rates >= 0.95 (noiseless exact; "
               "noisy within xi_SP * sigma)",
               all(r >= 0.95 for r in rates) and dt < 300.0,
               f"itp {rates[0]:.2f}, nitp {rates[1]:.2f}, noisy itp "
               f"{rates[2]:.2f}, noisy nitp {rates[3]:.2f}, {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 7: tree-RIP bound validity Monte Carlo
# ---------------------------------------------------------------------------

def test_c7_rip_bound_validity():
    t0 = time.perf_counter()
    n, n_sig, d = 400, 4095, 2
    topo = build_complete_tree(n_sig, d)
    worst_gap = -np.inf
    ok = True
    for m in range(20):
        a = sample_gaussian_matrix(n, n_sig, seed=8000 + m)
        for rho in (0.005, 0.01):
            k = round(rho * n)
            est = estimate_tree_rip(a, topo, k, 10000, seed=8000 + m)
            tu = theory.rip_bound_upper(d, k / n)
            tl = theory.rip_bound_lower(d, k / n)
            ok &= est.upper_hat <= tu + 0.1 and est.lower_hat <= tl + 0.1
            worst_gap = max(worst_gap, est.upper_hat - tu, est.lower_hat - tl)
    dt = time.perf_counter() - t0
    _criterion("7", "empirical tree-RIP maxima stay below asymptotic bounds "
               "+ 0.1 (20 matrices x 10^4 supports)",
               ok and dt < 300.0, f"worst gap {worst_gap:+.3f}, {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 8: stability factors diverge at the threshold
# ---------------------------------------------------------------------------

def test_c8_divergence_at_threshold():
    ok = True
    details = []
    for variant, kap in (("itp", None), ("nitp", 1.1)):
        rho_hat = theory.threshold_rip(2, variant, kappa=kap)
        vals = []
        for f in (0.9, 0.99, 0.999):
            mu, xi = theory.rip_factors(2, f * rho_hat, variant,
                                        alpha="optimal", kappa=kap)
            vals.append(xi / (1.0 - mu))
        ok &= vals[0] < vals[1] < vals[2] and vals[2] > 100.0
        details.append(f"rip/{variant} {vals[2]:.0f}")
        rho_hat = theory.threshold_stable_point(2, variant, kappa=kap)
        vals = [theory.stability_factor_sp(2, f * rho_hat, variant, kappa=kap)[1]
                for f in (0.9, 0.99, 0.999)]
        ok &= vals[0] < vals[1] < vals[2] and vals[2] > 100.0
        details.append(f"sp/{variant} {vals[2]:.0f}")
    _criterion("8", "stability factors increase toward the threshold and "
               "exceed 100 at 0.999 rho_hat", ok, ", ".join(details))


# ---------------------------------------------------------------------------
# criterion 9: CLI determinism
# ---------------------------------------------------------------------------

def test_c9_cli_determinism(tmp_path):
    topo_path = tmp_path / "t.json"
    vec_path = tmp_path / "v.txt"
    save_topology(build_complete_tree(15, 2), str(topo_path))
    save_vector(np.linspace(-1, 1, 15), str(vec_path))
    commands = {
        "thresholds": ["thresholds", "--d", "2", "--analysis", "sp"],
        "bounds": ["bounds", "--rho-min", "0.005", "--rho-max", "0.02",
                   "--points", "5"],
        "project": ["project", "--topology", str(topo_path), "--vector",
                    str(vec_path), "--k", "4"],
        "recover": ["recover", "--synth", "n=100,k=3,sigma=0.05",
                    "--variant", "nitp", "--seed", "3"],
        "phase": ["phase", "--n", "80", "--rho-grid", "0.025,0.05",
                  "--trials", "3", "--seed", "11"],
        "rip-estimate": ["rip-estimate", "--n", "100", "--n-signal", "255",
                         "--s", "3", "--samples", "300", "--seed", "7"],
    }
    ok = True
    for name, argv in commands.items():
        outs = []
        for rep in (1, 2):
            path = tmp_path / f"{name}-{rep}.out"
            code = cli_main(argv + ["--out", str(path)])
            assert code == 0, name
            outs.append(path.read_bytes())
        ok &= outs[0] == outs[1]
    _criterion("9", "every CLI command is byte-identical across reruns with "
               "a fixed seed", ok, f"{len(commands)} subcommands")
