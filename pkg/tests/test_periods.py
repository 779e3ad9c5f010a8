import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from critrace.periods import exact_rational, find_periods, pseudo_resonant, rational_approx, resonance_module
from critrace.symbol import CriticalData


def test_example1_period_is_total(example1):
    _, _, period = example1
    assert period.T == pytest.approx(2 * math.pi)
    assert period.is_total and period.d_T == 2
    assert period.cls == "indefinite"
    assert period.sgn_qT == 0 and period.det_qT == 1.0
    assert period.flags.get("empty_complement")


def test_siegel_moser_periods(siegel_moser):
    _, _, periods = siegel_moser
    assert [round(r.T, 12) for r in periods] == [round(math.pi, 12), round(2 * math.pi, 12)]
    first, second = periods
    assert first.d_T == 1 and first.cls == "negative-definite" and first.blocks == (1,)
    assert first.det_qT == pytest.approx(1.0) and first.sgn_qT == 2
    assert second.is_total and second.cls == "indefinite"


def test_hyperbolic_blocks_never_return():
    cd = CriticalData(np.zeros(4), 0.0, np.array([1.0, 2.0]), np.array([1, -1]))
    recs = find_periods(cd, 0.1, 13.0)
    assert all(r.blocks == (0,) for r in recs)
    assert len(recs) == 2


def test_incommensurate_frequencies_no_common_period():
    cd = CriticalData(np.zeros(4), 0.0, np.array([1.0, math.sqrt(2)]), np.array([1, 1]))
    assert all(r.d_T == 1 for r in find_periods(cd, 0.1, 20.0))


def test_rational_reconstruction():
    assert rational_approx(0.75) == Fraction(3, 4)
    assert exact_rational(1 / 3) == Fraction(1, 3)
    assert exact_rational(math.sqrt(2)) is None


@given(st.lists(st.floats(0.1, 5.0), min_size=1, max_size=4), st.integers(1, 4))
def test_pseudo_resonance_parity_law(w, half):
    flag, witness = pseudo_resonant(w, 2 * half)
    assert flag
    assert len(witness) == 2 * half
    assert abs(sum(s * w[i] for i, s in witness)) <= 1e-9 * max(1.0, max(w))


def test_parity_law_over_random_vectors():
    rng = np.random.default_rng(7)
    for _ in range(100):
        w = rng.uniform(-3, 3, size=rng.integers(1, 5))
        w[w == 0] = 1.0
        assert pseudo_resonant(w, 2)[0] and pseudo_resonant(w, 4)[0]


def test_irrational_triple_not_pseudo_resonant_at_order_three():
    s2, s3 = math.sqrt(2), math.sqrt(3)
    flag, witness = pseudo_resonant([s2 + s3, s2 - s3, s2], 3)
    assert not flag and witness is None


def test_pseudo_resonance_order_three_witness():
    flag, witness = pseudo_resonant([1.0, -2.0], 3)
    assert flag
    assert sum(s * [1.0, -2.0][i] for i, s in witness) == 0


def test_resonance_module_siegel_moser():
    rs = resonance_module([1.0, -2.0], 3)
    assert rs.exact
    assert rs.contains([2, 1, 0, 0]) and rs.contains([1, 1, 1, 0])
    assert not rs.contains([1, 0, 0, 0])
    assert len(rs) == 12


def test_resonance_bound():
    with pytest.raises(ValueError):
        resonance_module([1.0], 7)
