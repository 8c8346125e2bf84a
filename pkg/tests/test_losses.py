"""Loss families: values, timeout charges, parsing, monotonicity."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from survsel.losses import (
    CAPPED_LOG_ALPHA_RANGE,
    CAPPED_LOG_BETA_RANGE,
    POLY_ALPHA_RANGE,
    LossSpec,
    capped_log,
    evaluate,
    evaluate_grid,
    identity,
    par10,
    parse_loss,
    polynomial,
    timeout_value,
)

C = 100.0


def test_identity_values():
    spec = identity()
    assert evaluate(spec, 37.5, C) == 37.5
    assert evaluate(spec, 0.0, C) == 0.0
    assert timeout_value(spec, C) == C


def test_par10_finished_runs_cost_their_runtime():
    spec = par10()
    assert evaluate(spec, 37.5, C) == 37.5
    assert timeout_value(spec, C) == 10 * C


def test_polynomial_normalizes_by_cutoff():
    spec = polynomial(2.0)
    assert evaluate(spec, 50.0, C) == pytest.approx(0.25)
    assert evaluate(spec, C, C) == pytest.approx(1.0)
    assert timeout_value(spec, C) == 1.0


def test_polynomial_alpha_one_is_linear():
    spec = polynomial(1.0)
    assert evaluate(spec, 30.0, C) == pytest.approx(0.3)


def test_capped_log_value_and_cap():
    spec = capped_log(alpha=0.5, beta=4.0)
    u = 0.4
    assert evaluate(spec, u * C, C) == pytest.approx(-0.5 * math.log1p(-u))
    # near the cutoff the raw log exceeds the cap and is clipped
    assert evaluate(spec, 0.999999 * C, C) <= 4.0
    assert evaluate(spec, C, C) == 4.0
    assert timeout_value(spec, C) == 4.0


def test_out_of_range_runtime_rejected():
    with pytest.raises(ValueError):
        evaluate(identity(), -1.0, C)
    with pytest.raises(ValueError):
        evaluate(identity(), C + 1.0, C)
    with pytest.raises(ValueError):
        evaluate(identity(), 1.0, 0.0)


def test_timed_out_flag_overrides_runtime():
    assert evaluate(par10(), 3.0, C, timed_out=True) == 10 * C
    assert evaluate(identity(), 3.0, C, timed_out=True) == C


def test_spec_validation():
    with pytest.raises(ValueError):
        LossSpec("nope")
    with pytest.raises(ValueError):
        LossSpec("poly")
    with pytest.raises(ValueError):
        LossSpec("poly", alpha=-1.0)
    with pytest.raises(ValueError):
        LossSpec("log", alpha=2.0, beta=1.0)
    with pytest.raises(ValueError):
        LossSpec("log", alpha=0.5)
    with pytest.raises(ValueError):
        LossSpec("identity", alpha=1.0)


def test_parse_round_trip():
    for spec in (identity(), par10(), polynomial(3.5), capped_log(0.2, 7.0)):
        assert parse_loss(str(spec)) == spec


def test_parse_aliases_and_errors():
    assert parse_loss("exp") == identity()
    assert parse_loss("polynomial:alpha=2") == polynomial(2.0)
    assert parse_loss("cappedlog:alpha=0.1,beta=3") == capped_log(0.1, 3.0)
    with pytest.raises(ValueError):
        parse_loss("banana")
    with pytest.raises(ValueError):
        parse_loss("poly:alpha=x")
    with pytest.raises(ValueError):
        parse_loss("par10:alpha=1")


def test_evaluate_grid_matches_scalar():
    ts = np.linspace(0.0, C, 31)
    for spec in (identity(), par10(), polynomial(4.0), capped_log(0.3, 2.0)):
        np.testing.assert_allclose(
            evaluate_grid(spec, ts, C), [evaluate(spec, t, C) for t in ts]
        )


@given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
def test_losses_nondecreasing(u1, u2):
    lo, hi = sorted((u1, u2))
    for spec in (identity(), par10(), polynomial(3.0), capped_log(0.4, 5.0)):
        assert evaluate(spec, lo * C, C) <= evaluate(spec, hi * C, C) + 1e-12


@given(
    st.floats(min_value=POLY_ALPHA_RANGE[0], max_value=POLY_ALPHA_RANGE[1]),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_poly_bounded_by_timeout_value(alpha, u):
    spec = polynomial(alpha)
    assert evaluate(spec, u * C, C) <= timeout_value(spec, C)


@given(
    st.floats(min_value=CAPPED_LOG_ALPHA_RANGE[0], max_value=CAPPED_LOG_ALPHA_RANGE[1]),
    st.floats(min_value=CAPPED_LOG_BETA_RANGE[0], max_value=CAPPED_LOG_BETA_RANGE[1]),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_capped_log_bounded_by_beta(alpha, beta, u):
    spec = capped_log(alpha, beta)
    assert evaluate(spec, u * C, C) <= beta + 1e-12
