"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s``.

Three assertions are expected to fail on physical grounds and are kept
faithful rather than weakened; the printed diagnostics carry the measured
values.  In short: a thermally responsive chain pins the field to below
k_B T in a single round (the measured first-round error satisfies
delta_h_1 = k_B T / sqrt(2 nu M) with M >= 1 thermally active modes), so
every later round operates below the thermal floor where the sensitivity
saturates and scales linearly in N.  The super-extensive recursion
(criteria 5 and 6) therefore has no reachable parameter regime, and the
floor behavior asserted alongside it (shot-noise slope after the floor)
is confirmed instead.  Criterion 8's high-temperature ordering reversal
needs rings of at least 12 spins; at the pinned 10 it fails near the
crossover.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from spinchain_metrology import oracle, thermo
from spinchain_metrology.cli import main as cli_main
from spinchain_metrology.estimators import EstimatorSpec, estimator_sensitivity
from spinchain_metrology.model import ChainSpec
from spinchain_metrology.protocol import (
    ProtocolConfig,
    run_ensemble,
    run_protocol,
    scaling_exponent,
)
from spinchain_metrology.validate import (
    random_xx_specs,
    regression_specs,
    run_validation,
    susceptibility_identity_residual,
)


def _verdict(num: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} -- {detail}")


# ---------------------------------------------------------------------------
# 1. oracle equivalence on the 30-point grid
# ---------------------------------------------------------------------------
def test_criterion_1_oracle_equivalence():
    t0 = time.time()
    worst = {"logZ": 0.0, "m": 0.0, "F_h_XX": 0.0, "F_h_XY": 0.0, "F_J": 0.0}
    specs = regression_specs()
    assert len(specs) == 30
    for spec in specs:
        state = oracle.thermal_state(spec)
        worst["logZ"] = max(
            worst["logZ"],
            abs(thermo.log_partition(spec) - state.log_z) / abs(state.log_z),
        )
        m_or = oracle.observable_moments(state, oracle.total_sz(spec.n), 1)[0]
        worst["m"] = max(
            worst["m"], abs(thermo.magnetization_z(spec) - m_or) / abs(m_or)
        )
        f_or = oracle.qfi_spectral(spec, "h")
        key = "F_h_XX" if spec.model == "XX" else "F_h_XY"
        worst[key] = max(worst[key], abs(thermo.qfi_h(spec).value - f_or) / abs(f_or))
        if spec.model == "XX":
            fj_or = oracle.qfi_spectral(spec, "J")
            worst["F_J"] = max(
                worst["F_J"], abs(thermo.qfi_j(spec).value - fj_or) / abs(fj_or)
            )
    elapsed = time.time() - t0
    ok = (
        worst["logZ"] < 1e-8
        and worst["m"] < 1e-8
        and worst["F_h_XX"] < 1e-8
        and worst["F_J"] < 1e-8
        and worst["F_h_XY"] < 1e-6
        and elapsed < 120.0
    )
    _verdict(
        "1",
        ok,
        f"worst residuals {', '.join(f'{k}={v:.1e}' for k, v in worst.items())}; "
        f"runtime {elapsed:.0f}s (< 120s)",
    )
    assert worst["logZ"] < 1e-8
    assert worst["m"] < 1e-8
    assert worst["F_h_XX"] < 1e-8
    assert worst["F_J"] < 1e-8
    assert worst["F_h_XY"] < 1e-6
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# 2. thermodynamic identity, three routes
# ---------------------------------------------------------------------------
def test_criterion_2_thermodynamic_identity():
    t0 = time.time()
    worst = max(susceptibility_identity_residual(s) for s in random_xx_specs(20))
    elapsed = time.time() - t0
    ok = worst < 1e-6
    _verdict("2", ok, f"worst three-route residual {worst:.2e} (tol 1e-6), {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 3. window constant
# ---------------------------------------------------------------------------
def test_criterion_3_window_constant():
    t0 = time.time()
    res = thermo.fit_c(
        betas=[100.0, 200.0],
        ns=[10_000, 100_000],
        h_over_j=[0.1 * k for k in range(10)],
    )
    elapsed = time.time() - t0
    ok = abs(res.c - 0.64) <= 0.05 and res.subset_spread < 0.02 and elapsed < 60.0
    _verdict(
        "3",
        ok,
        f"C = {res.c:.4f} (0.64 +- 0.05), subset spread {res.subset_spread:.1e} "
        f"(< 0.02), runtime {elapsed:.0f}s (< 60s)",
    )
    assert abs(res.c - 0.64) <= 0.05
    assert res.subset_spread < 0.02
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 4. extensivity
# ---------------------------------------------------------------------------
def test_criterion_4_extensivity():
    vals = [
        thermo.qfi_h(ChainSpec("XX", n, 1.0, 0.5, 100.0)).per_spin
        for n in (1000, 10_000, 100_000)
    ]
    spread = (max(vals) - min(vals)) / max(vals)
    ok = spread < 1e-3
    _verdict("4", ok, f"per-spin spread over three decades {spread:.2e} (tol 1e-3)")
    assert ok


# ---------------------------------------------------------------------------
# 5. adaptive scaling (shared ensemble; the -2/3 half cannot hold, see ledger)
# ---------------------------------------------------------------------------
@pytest.fixture(scope="module")
def protocol_ensemble():
    base = ProtocolConfig(
        h_true=0.01,
        h_min=0.0,
        h_max=0.02,
        beta=1000.0,
        n=1000,
        nu=50,
        k_max=4,
        retune_margin=3.0,
        floor_policy="run_to_kmax",
        seed=20260809,
    )
    t0 = time.time()
    traces = run_ensemble(base, [1000, 3000, 10_000, 30_000, 100_000], 100)
    return traces, time.time() - t0


def test_criterion_5_control_single_round(protocol_ensemble):
    traces, elapsed = protocol_ensemble
    res = scaling_exponent(traces, k=1)
    ok = abs(res.slope + 0.5) <= 0.05
    _verdict(
        "5 (control)",
        ok,
        f"single-round slope {res.slope:.3f} (target -1/2 +- 0.05); "
        f"ensemble runtime {elapsed:.0f}s (< 900s)",
    )
    assert ok
    assert elapsed < 900.0


def test_criterion_5_floor_behavior(protocol_ensemble):
    # the spec's companion invariant: once the error bar is below k_B T,
    # deeper rounds improve no faster than shot noise
    traces, _ = protocol_ensemble
    floor = 1.0 / 1000.0
    assert all(t.iterations[0].delta_h < floor for t in traces)
    res = scaling_exponent(traces, k=4)
    ok = abs(res.slope + 0.5) <= 0.1
    _verdict(
        "5 (floor invariant)",
        ok,
        f"depth-4 slope below the thermal floor {res.slope:.3f} (-1/2 +- 0.1)",
    )
    assert ok


def test_criterion_5_super_extensive_scaling(protocol_ensemble):
    traces, _ = protocol_ensemble
    res = scaling_exponent(traces, k=4)
    ok = abs(res.slope + 2.0 / 3.0) <= 0.1
    _verdict(
        "5",
        ok,
        f"depth-4 slope {res.slope:.3f} +- {res.stderr:.3f} against -2/3 +- 0.1; "
        f"medians {[f'{m:.2e}' for m in res.medians]}; the first-round error "
        f"{traces[0].iterations[0].delta_h:.1e} already sits below k_B T = 1e-3, "
        "so every deeper round is floor-saturated (see decisions ledger)",
    )
    assert ok, (
        "super-extensive scaling is unreachable: delta_h_1 = "
        "k_B T / sqrt(2 nu M) <= k_B T / 2 for any thermally responsive ring, "
        f"measured depth-4 slope {res.slope:.3f}"
    )


# ---------------------------------------------------------------------------
# 6. recursion check (cannot hold for the same reason; kept faithful)
# ---------------------------------------------------------------------------
def test_criterion_6_second_round_recursion():
    beta, n, nu, h_true, h_max = 200.0, 10_000, 50, 0.5, 1.0
    base = ProtocolConfig(
        h_true=h_true,
        h_min=0.0,
        h_max=h_max,
        beta=beta,
        n=n,
        nu=nu,
        k_max=2,
        retune_margin=1.0,  # the recursion is stated for J_2 = h + delta_h_1
        floor_policy="run_to_kmax",
        seed=4242,
    )
    ratios = []
    for s in range(100):
        tr = run_protocol(replace(base, seed=s))
        if len(tr.iterations) < 2:
            continue
        f1 = tr.iterations[0].f_empirical
        f2 = tr.iterations[1].f_empirical
        if f1 and f2:
            ratios.append(f2 / (nu * n * f1 ** 0.25))
    b_pred = 0.64 * beta / math.sqrt(2.0 * h_true)
    b_emp = float(np.median(ratios))
    ok = abs(b_emp - b_pred) <= 0.25 * b_pred
    _verdict(
        "6",
        ok,
        f"median F_2/(nu N F_1^(1/4)) = {b_emp:.2f} vs C beta/sqrt(2 h) = "
        f"{b_pred:.2f} (+- 25%); the first-round error "
        f"(~{1.0/math.sqrt(nu*thermo.qfi_h(ChainSpec('XX', n, h_max, h_true, beta)).value):.1e}) "
        f"is already below k_B T = {1/beta:.0e}, so the second round works at "
        "the saturated peak instead of the window form (see decisions ledger)",
    )
    assert ok, f"second-round recursion constant off: {b_emp:.2f} vs {b_pred:.2f}"


# ---------------------------------------------------------------------------
# 7. Cramer-Rao dominance and exact saturation
# ---------------------------------------------------------------------------
def test_criterion_7_dominance_and_saturation():
    worst_excess = 0.0
    worst_sat = 0.0
    rng = np.random.default_rng(12)
    for _ in range(25):
        spec = ChainSpec(
            "XX",
            2 * int(rng.integers(2, 500)),
            float(rng.uniform(0.5, 2.0)),
            float(rng.uniform(-1.5, 1.5)),
            float(rng.uniform(0.2, 50.0)),
        )
        fh = thermo.qfi_h(spec).value
        fj = thermo.qfi_j(spec).value
        for est, bound in [
            (EstimatorSpec("Jz", "h"), fh),
            (EstimatorSpec("OJ", "J"), fj),
            (EstimatorSpec("Jz", "J"), fj),
            (EstimatorSpec("OJ", "h"), fh),
        ]:
            val = estimator_sensitivity(spec, est).value
            if bound > 0:
                worst_excess = max(worst_excess, (val - bound) / bound)
        if fh > 0:
            sat_h = estimator_sensitivity(spec, EstimatorSpec("Jz", "h")).value
            worst_sat = max(worst_sat, abs(sat_h - fh) / fh)
        if fj > 0:
            sat_j = estimator_sensitivity(spec, EstimatorSpec("OJ", "J")).value
            worst_sat = max(worst_sat, abs(sat_j - fj) / fj)
    # oracle-route pairs
    for spec in [
        ChainSpec("XY", 8, 1.0, 0.9, 20.0, gamma=1.0),
        ChainSpec("XY", 10, 1.0, 1.05, 2.0, gamma=0.5),
    ]:
        fh = thermo.qfi_h(spec).value
        for obs in ("Jz", "JxSquared"):
            val = estimator_sensitivity(spec, EstimatorSpec(obs, "h")).value
            worst_excess = max(worst_excess, (val - fh) / fh)
    ok = worst_excess <= 1e-9 and worst_sat <= 1e-10
    _verdict(
        "7",
        ok,
        f"worst bound excess {worst_excess:.1e} (tol 1e-9), worst saturation "
        f"defect {worst_sat:.1e} (tol 1e-10)",
    )
    assert worst_excess <= 1e-9
    assert worst_sat <= 1e-10


# ---------------------------------------------------------------------------
# 8. qualitative estimator behaviors at n = 10, gamma = 1
# ---------------------------------------------------------------------------
def _ising_scan(beta: float, ratios):
    jz, jx2 = [], []
    for r in ratios:
        spec = ChainSpec("XY", 10, 1.0, float(r), beta, gamma=1.0)
        jz.append(estimator_sensitivity(spec, EstimatorSpec("Jz", "h")).value)
        jx2.append(estimator_sensitivity(spec, EstimatorSpec("JxSquared", "h")).value)
    return np.array(jz), np.array(jx2)


def test_criterion_8a_low_temperature_crossover_advantage():
    ratios = np.linspace(0.9, 1.1, 5)
    jz, jx2 = _ising_scan(100.0, ratios)
    ok = bool(np.any(jx2 > jz))
    _verdict(
        "8a",
        ok,
        "transverse-fluctuation estimator beats magnetization near the "
        f"crossover at beta=100: max advantage {float(np.max(jx2/jz)):.2f}x",
    )
    assert ok


def test_criterion_8b_high_temperature_reversal():
    ratios = np.linspace(0.5, 1.5, 11)
    jz, jx2 = _ising_scan(2.0, ratios)
    holds = jz >= jx2
    ok = bool(np.all(holds))
    failing = [f"{r:.2f}" for r, h in zip(ratios, holds) if not h]
    _verdict(
        "8b",
        ok,
        f"beta=2 ordering F(Jz) >= F(Jx^2) holds at {int(holds.sum())}/11 grid "
        f"points; fails near the crossover at h/J in {{{', '.join(failing)}}} "
        "(the reversal sets in only from n = 12 upward, see decisions ledger)",
    )
    assert ok, (
        "the full-grid ordering reversal does not hold at n = 10; "
        f"failing points h/J = {failing}"
    )


# ---------------------------------------------------------------------------
# 9. determinism and clean validation
# ---------------------------------------------------------------------------
def test_criterion_9_determinism_and_validation(tmp_path, capsys):
    args = [
        "protocol", "--n", "200,400", "--seeds", "3", "--beta", "200",
        "--nu", "8", "--kmax", "2", "--h-true", "0.05", "--h-min", "0",
        "--h-max", "0.1", "--seed", "7", "--out", str(tmp_path / "p"),
    ]
    assert cli_main(args) == 0
    first = (tmp_path / "p.traces.jsonl").read_bytes()
    assert cli_main(args) == 0
    identical = (tmp_path / "p.traces.jsonl").read_bytes() == first

    checks, clean = run_validation(quick=False)
    capsys.readouterr()
    ok = identical and clean
    worst = max(checks, key=lambda c: c.residual / c.tol)
    _verdict(
        "9",
        ok,
        f"trace files byte-identical: {identical}; full validation clean: "
        f"{clean} (worst check {worst.name} at {worst.residual:.1e}/{worst.tol:.0e})",
    )
    assert identical
    assert clean
