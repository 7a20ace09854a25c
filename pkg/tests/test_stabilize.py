import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluidlevel.errors import NonFiniteInput
from fluidlevel.stabilize import Stabilizer, StabilizerConfig

ABS1 = StabilizerConfig(window=10, sigma_threshold=1.0, relative=False)


def run(stab, values):
    out = []
    for i, v in enumerate(values):
        r = stab.push(v, timestamp=float(i))
        if r is not None:
            out.append((i + 1, r))
    return out


def disturbance(center, n, amp):
    return [center + amp * (1 if i % 2 else -1) for i in range(n)]


class TestExamples:
    def test_constant_stream(self):
        out = run(Stabilizer(ABS1), [100.0] * 10)
        assert len(out) == 1
        push, r = out[0]
        assert push == 10
        assert r.value == 100.0 and r.sigma == 0.0
        assert (r.window_start, r.window_end) == (0.0, 9.0)

    def test_alternating_never_emits(self):
        stab = Stabilizer(ABS1)
        assert run(stab, [90.0, 110.0] * 50) == []
        assert stab.last_sigma == pytest.approx(math.sqrt(100 * 10 / 9))

    def test_plateau_disturbance_plateau(self):
        seq = [100.0] * 15 + disturbance(125, 8, 30) + [150.0] * 15
        out = run(Stabilizer(ABS1), seq)
        assert [r.value for _, r in out] == [100.0, 150.0]

    def test_plateau_persists_single_emission(self):
        assert len(run(Stabilizer(ABS1), [5.0] * 200)) == 1


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(window=1), dict(sigma_threshold=0), dict(rearm_factor=1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            StabilizerConfig(**kw)

    def test_relative_threshold(self):
        stab = Stabilizer(StabilizerConfig(window=4, sigma_threshold=0.01))
        assert stab.threshold(200.0) == pytest.approx(2.0)
        # sigma of [199, 201, 199, 201] is 1.155 < 2
        assert len(run(stab, [199.0, 201.0, 199.0, 201.0])) == 1

    def test_non_finite(self):
        stab = Stabilizer(ABS1)
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(NonFiniteInput):
                stab.push(bad)

    def test_reset(self):
        stab = Stabilizer(ABS1)
        run(stab, [1.0] * 10)
        stab.reset()
        assert stab.armed and stab.last_sigma is None
        assert len(run(stab, [1.0] * 10)) == 1


streams = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=120)


class TestProperties:
    @given(streams, st.integers(2, 12))
    def test_no_emission_before_full(self, values, n):
        stab = Stabilizer(StabilizerConfig(window=n, sigma_threshold=1.0, relative=False))
        out = run(stab, values)
        assert all(push >= n for push, _ in out)

    @settings(max_examples=200)
    @given(st.lists(st.sampled_from([0.0, 0.2, 5.0, 40.0]), min_size=1, max_size=200),
           st.integers(2, 8))
    def test_emission_window_mean_and_rearm(self, values, n):
        cfg = StabilizerConfig(window=n, sigma_threshold=1.0, relative=False, rearm_factor=3.0)
        stab = Stabilizer(cfg)
        rearmed_since = True
        for i, v in enumerate(values):
            r = stab.push(v)
            if stab.last_sigma is not None and stab.last_sigma > 3.0:
                rearmed_since = True
            if r is not None:
                window = values[i + 1 - n:i + 1]
                assert r.value == pytest.approx(math.fsum(window) / n, rel=1e-12, abs=1e-300)
                assert r.sigma == pytest.approx(statistics.stdev(window), rel=1e-12, abs=1e-12)
                assert r.sigma < 1.0
                assert rearmed_since
                rearmed_since = False

    @settings(max_examples=100)
    @given(plateaus=st.lists(st.floats(1, 1000), min_size=1, max_size=6),
           lengths=st.lists(st.integers(10, 30), min_size=6, max_size=6),
           gap=st.integers(3, 8), seed=st.integers(0, 2**32 - 1))
    def test_time_reversal(self, plateaus, lengths, gap, seed):
        rng = np.random.default_rng(seed)
        seq = []
        for i, (p, n) in enumerate(zip(plateaus, lengths)):
            if i:
                # far from every plateau so no transition window can settle
                seq += list(rng.choice([0.0, 3 * max(plateaus)], gap))
            seq += [p] * n
        cfg = StabilizerConfig(window=10)
        fwd = [r.value for _, r in run(Stabilizer(cfg), seq)]
        bwd = [r.value for _, r in run(Stabilizer(cfg), seq[::-1])]
        assert sorted(fwd) == pytest.approx(sorted(bwd), rel=1e-12)
        assert sorted(fwd) == pytest.approx(sorted(plateaus), rel=1e-12)
