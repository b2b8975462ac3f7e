from __future__ import annotations

import logging
import math
import time
from collections import Counter

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from mcdm.app.analysis import (
    DivergenceEstimate,
    _draw_values,
    _sample_weights,
    EnumerationBudgetExceeded,
    actual_weight_histogram,
    analyze_row,
    binary_divergence,
    divergence_actual_exact,
    divergence_actual_mc,
    divergence_base,
    divergence_decomposition_check,
    entropy,
    optimize_m,
    required_samples,
    shortest_length,
    sweep,
)
from mcdm.app.codebook import make_2c, make_cc, make_range, make_weight_set, mirror
from mcdm.app.coder import actual_codebook, encode_value
from mcdm.app.schemas import DmKind, McConfig, Objective

P1 = 0.422


@pytest.fixture(scope="module")
def mc_config() -> McConfig:
    return McConfig(samples=2000, seed=11, workers=2, budget=16)


def test_entropy_of_target():
    assert entropy(P1) == pytest.approx(0.98237, abs=1e-4)
    assert entropy(0.5) == 1.0
    assert entropy(0.0) == 0.0


def test_binary_divergence_conventions():
    assert binary_divergence(0.3, 0.3) == 0.0
    assert binary_divergence(0.0, 0.5) == 1.0
    assert binary_divergence(0.5, 0.0) == math.inf


def test_base_divergence_examples():
    assert divergence_base(make_range(4, 0, 4), 0.5) == pytest.approx(0.0, abs=1e-15)
    assert divergence_base(make_cc(4, 2), 0.5) == pytest.approx((4 - math.log2(6)) / 4)
    assert divergence_base(make_cc(4, 0), 0.5) == pytest.approx(1.0)
    assert divergence_base(make_cc(4, 1), 0.0) == math.inf
    assert divergence_base(make_cc(4, 0), 0.0) == pytest.approx(0.0, abs=1e-15)


def test_exact_actual_divergence_examples():
    estimate = divergence_actual_exact(make_cc(4, 2), 0.5)
    assert estimate.div == pytest.approx(0.5)
    assert estimate.pc1 == pytest.approx(0.5)
    cube = divergence_actual_exact(make_range(8, 0, 8), 0.5)
    assert cube.div == pytest.approx(0.0, abs=1e-12)
    assert cube.pc1 == pytest.approx(0.5)
    assert divergence_actual_exact(make_cc(12, 5), P1).pc1 == pytest.approx(5 / 12)


@pytest.mark.parametrize(
    "spec",
    [make_2c(10, 4), make_range(12, 0, 5), make_range(11, 3, 8), make_weight_set(12, (1, 6, 7, 12))],
    ids=lambda spec: spec.label(),
)
def test_histogram_matches_actual_codebook(spec):
    expected = Counter(word.weight for word in actual_codebook(spec))
    assert actual_weight_histogram(spec) == expected


def test_enumeration_budget_is_enforced():
    with pytest.raises(EnumerationBudgetExceeded):
        divergence_actual_exact(make_range(30, 0, 15), P1, budget=20)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_divergence_decomposition_holds(data):
    n = data.draw(st.integers(min_value=1, max_value=12), label="n")
    weights = data.draw(st.sets(st.integers(min_value=0, max_value=n), min_size=1), label="weights")
    p1 = data.draw(st.floats(min_value=0.05, max_value=0.95), label="p1")
    check = divergence_decomposition_check(make_weight_set(n, weights), p1)
    assert check.codebook_term >= -1e-9
    assert check.lhs == pytest.approx(check.rhs, abs=1e-9)


def test_monte_carlo_agrees_with_enumeration():
    spec = make_range(16, 0, 7)
    exact = divergence_actual_exact(spec, P1)
    estimate = divergence_actual_mc(spec, P1, samples=5000, seed=3)
    assert estimate.method == "monte-carlo"
    assert abs(estimate.div - exact.div) <= 0.03 * exact.div, f"exact={exact.div} mc={estimate.div}"
    assert estimate.pc1 == pytest.approx(exact.pc1, rel=0.03)


def test_monte_carlo_is_reproducible():
    spec = make_2c(40, 17)
    first = divergence_actual_mc(spec, P1, samples=300, seed=5, workers=3)
    second = divergence_actual_mc(spec, P1, samples=300, seed=5, workers=3)
    assert first == second
    assert (first.samples, first.seed, first.workers) == (300, 5, 3)


def test_monte_carlo_constant_composition_is_exact():
    spec = make_cc(40, 17)
    estimate = divergence_actual_mc(spec, P1, samples=50, seed=1)
    assert estimate.div == pytest.approx(divergence_base(spec, P1) + (math.log2(spec.size) - spec.k) / spec.n)
    assert estimate.stderr == pytest.approx(0.0, abs=1e-12)


def test_required_samples():
    estimate = DivergenceEstimate(div=0.1, pc1=0.4, stderr=0.001, method="monte-carlo", samples=10_000, seed=1, workers=1)
    assert required_samples(estimate, rel_error=0.03, confidence=0.9) == 3007
    flat = DivergenceEstimate(div=0.0, pc1=0.4, stderr=0.001, method="monte-carlo", samples=100, seed=1, workers=1)
    assert required_samples(flat) is None


def test_optimize_simple_examples():
    assert optimize_m(DmKind.CC, 4, 0.5).m_star == 2
    # [1,2] and [2,3] tie at p1 = 1/2; the smaller m wins
    assert optimize_m(DmKind.TWO_C, 4, 0.5).m_star == 2
    assert optimize_m(DmKind.TWO_C, 4, 0.5, Objective.BASE).m_star == 2


@pytest.mark.parametrize("n", [10, 20, 30])
def test_full_cube_is_optimal_for_short_lengths(n):
    result = optimize_m(DmKind.OPT, n, P1)
    assert result.m_star == n
    assert result.spec.k == n


def test_base_objective_trades_input_bits_for_divergence():
    result = optimize_m(DmKind.OPT, 10, P1, Objective.BASE)
    assert result.m_star == 8
    assert result.spec.k == 9
    assert result.div_base < divergence_base(make_range(10, 0, 10), P1)


def test_optimize_rejects_bad_arguments():
    with pytest.raises(ValueError):
        optimize_m(DmKind.CC, 10, 0.0)
    with pytest.raises(ValueError):
        optimize_m(DmKind.RANGE, 10, P1)
    with pytest.raises(ValueError):
        optimize_m(DmKind.CC, 0, P1)


def test_optimize_mirrors_targets_above_one_half():
    high = optimize_m(DmKind.TWO_C, 15, 0.7)
    low = optimize_m(DmKind.TWO_C, 15, 0.3)
    assert high.mirrored and not low.mirrored
    assert high.m_star == low.m_star
    assert high.spec == mirror(low.spec)
    assert high.div_base == pytest.approx(low.div_base)


def test_multi_composition_rate_gain_at_length_110():
    cc = optimize_m(DmKind.CC, 110, P1)
    opt = optimize_m(DmKind.OPT, 110, P1)
    assert cc.m_star == 46
    assert cc.spec.k == 104
    assert opt.spec.k < 110
    gain = opt.spec.k / cc.spec.k - 1
    assert 0.02 <= gain <= 0.045, f"rate gain {gain:.4f}"


def test_rates_are_ordered_across_lengths():
    failures = []
    for n in range(10, 201, 10):
        k_cc, k_2c, k_opt = (optimize_m(kind, n, P1).spec.k for kind in (DmKind.CC, DmKind.TWO_C, DmKind.OPT))
        if not k_cc <= k_2c <= k_opt:
            failures.append((n, k_cc, k_2c, k_opt))
    assert not failures, f"rate ordering broken at {failures}"


@pytest.mark.parametrize("n", [10, 15, 20])
def test_actual_divergences_are_ordered(n):
    div = {
        kind: divergence_actual_exact(optimize_m(kind, n, P1).spec, P1).div
        for kind in (DmKind.CC, DmKind.TWO_C, DmKind.OPT)
    }
    assert div[DmKind.OPT] <= div[DmKind.TWO_C] <= div[DmKind.CC], div


def test_analyze_row_enumerates_small_codebooks(mc_config):
    row = analyze_row(10, DmKind.OPT, P1, mc_config)
    assert row.method == "exact"
    assert (row.m_star, row.k) == (10, 10)
    assert row.rate == 1.0
    assert row.div_actual == pytest.approx(row.div_base)
    assert row.samples is None


def test_analyze_row_samples_large_codebooks(mc_config):
    row = analyze_row(30, DmKind.CC, P1, mc_config)
    assert row.k > mc_config.budget
    assert row.method == "monte-carlo"
    assert (row.samples, row.seed, row.workers) == (2000, 11, 2)
    assert row.pc1 == pytest.approx(row.m_star / 30)


def test_sweep_orders_rows_by_length(mc_config):
    rows = sweep(["cc", "opt"], [4, 6], P1, mc_config)
    assert [(row.n, row.kind) for row in rows] == [
        (4, DmKind.CC),
        (4, DmKind.OPT),
        (6, DmKind.CC),
        (6, DmKind.OPT),
    ]
    with pytest.raises(ValueError):
        sweep(["range"], [4], P1, mc_config)


def test_shortest_length():
    result = shortest_length(DmKind.CC, P1, 0.05, 500)
    assert result is not None
    assert result.div_base <= 0.05
    assert optimize_m(DmKind.CC, result.spec.n - 1, P1).div_base > 0.05
    assert shortest_length(DmKind.CC, P1, -1.0, 20) is None


def test_monte_carlo_calibration_on_two_of_four():
    estimate = divergence_actual_mc(make_cc(4, 2), 0.5, samples=100_000, seed=11)
    assert abs(estimate.div - 0.5) / 0.5 <= 0.03, f"div_mc={estimate.div}"


def test_monte_carlo_grand_mean_over_seeds():
    spec = make_cc(4, 2)
    estimates = [divergence_actual_mc(spec, 0.5, samples=10_000, seed=seed).div for seed in range(20)]
    grand_mean = sum(estimates) / len(estimates)
    assert abs(grand_mean - 0.5) / 0.5 <= 0.01, f"grand mean {grand_mean} from {estimates}"


@pytest.mark.parametrize(
    "spec",
    [make_range(40, 0, 17), make_2c(64, 27), make_weight_set(30, (3, 11, 12, 13, 25))],
    ids=lambda spec: spec.label(),
)
def test_batched_sampling_matches_single_encodes(spec):
    values = _draw_values(spec, 400, 9, 2)
    expected = sorted(sum(encode_value(spec, value)) for value in values)
    assert sorted(_sample_weights(spec, 400, 9, 2).tolist()) == expected


def test_monte_carlo_on_a_single_codeword_codebook():
    estimate = divergence_actual_mc(make_cc(5, 0), 0.2, samples=10, seed=0)
    assert estimate.pc1 == 0.0
    assert estimate.div == pytest.approx(-math.log2(0.8))


def test_analyze_row_warns_when_falling_back_to_monte_carlo(caplog, monkeypatch):
    # setup_logging detaches the package logger from the root handlers
    monkeypatch.setattr(logging.getLogger("mcdm"), "propagate", True)
    with caplog.at_level(logging.WARNING, logger="mcdm.app.analysis"):
        row = analyze_row(30, DmKind.CC, P1, McConfig(samples=200, seed=1, budget=4))
    assert row.method == "monte-carlo"
    assert any(
        record.levelno == logging.WARNING and "exceeds the enumeration budget" in record.getMessage()
        for record in caplog.records
    )


def test_full_length_sweep_finishes_quickly():
    # a tenth of the default samples, so the ten minute allowance becomes one minute
    config = McConfig(samples=10_000, seed=7, workers=1, budget=24)
    started = time.perf_counter()
    rows = sweep(["cc", "2c", "opt"], range(10, 201, 10), P1, config)
    elapsed = time.perf_counter() - started
    assert len(rows) == 60
    assert elapsed < 60.0, f"sweep took {elapsed:.1f} s"
    by_length: dict[int, dict[DmKind, float]] = {}
    for row in rows:
        by_length.setdefault(row.n, {})[row.kind] = row.rate
    assert all(rates[DmKind.CC] <= rates[DmKind.TWO_C] <= rates[DmKind.OPT] for rates in by_length.values())
