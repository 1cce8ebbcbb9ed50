"""Spectral-flow accounting: ladders, crossing tracking, adaptive refinement.

Synthetic eigenvalue families are built from explicit curve lists, so the
expected flow of every family is known by construction.  The three-ramp
family used for the headline regression keeps each branch parked at a level
inside the sample window but outside the tracker's near-zero band, and lets
it transit in its own disjoint time slot.  Branch intersections therefore
happen only at |lambda| >= 1.2, where the near-zero consistency checks do
not apply, and the three zero crossings (down at 0.30, down at 0.47, up at
0.70) are distinct and sit off the dyadic bisection grid.  A crossing at an
exactly-sampled t would produce no sign flip between samples, which is why
none of the crossing times is a multiple of a power of two.

The steep ramps (|slope| up to 17.4) also document why samplers must ship a
Lipschitz hint: on a coarse grid the measured-slope heuristic can match a
transiting branch to a parked one and certify an interval the branch dove
through.  With the true hint the certificate fails and refinement kicks in.
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diracflow.domain import build_annulus
from diracflow.eigen import SpectrumSample
from diracflow.errors import LadderError, RefinementRequest
from diracflow.flow import (
    GammaLadder,
    build_ladder,
    choose_base_level,
    endpoint_isospectrality_defect,
    run_flow,
    run_flow_adaptive,
    spectral_flow,
    track_crossings,
)
from diracflow.gauge import GaugeSpec

WINDOW = 1.5


def make_sample(t, vals, count_below=0):
    return SpectrumSample(
        t=float(t),
        eigenvalues=np.sort(np.asarray(vals, dtype=float)),
        count_below=count_below,
        metadata={"window": WINDOW},
    )


def ramp(t, t_on, t_off, lo, hi):
    if t <= t_on:
        return lo
    if t >= t_off:
        return hi
    return lo + (hi - lo) * (t - t_on) / (t_off - t_on)


THREE_RAMP_CURVES = (
    lambda t: ramp(t, 0.225, 0.375, 1.2, -1.2),
    lambda t: ramp(t, 0.395, 0.545, 1.25, -1.25),
    lambda t: ramp(t, 0.625, 0.775, -1.3, 1.3),
    lambda t: -2.0,
    lambda t: 2.0,
)
THREE_RAMP_HINT = 18.0
THREE_RAMP_CROSSINGS = ((0.30, -1), (0.47, -1), (0.70, +1))
THREE_RAMP_SF = -1


def curve_sampler(curves, window=WINDOW):
    def sampler(t):
        vals = np.sort(np.array([c(t) for c in curves], dtype=float))
        inside = vals[np.abs(vals) <= window]
        return SpectrumSample(
            t=float(t),
            eigenvalues=inside,
            count_below=int(np.count_nonzero(vals < -window)),
            metadata={"window": window},
        )

    return sampler


def grid_samples(curves, n):
    sampler = curve_sampler(curves)
    return [sampler(k / (n - 1)) for k in range(n)]


def single_crossing(t_star=0.47, slope=1.0):
    return (lambda t: slope * (t - t_star), lambda t: -1.2, lambda t: 1.2)


class TestGammaLadder:
    def test_level_count_mismatch(self):
        with pytest.raises(LadderError):
            GammaLadder((0.0, 1.0), (0.0, 0.0))

    def test_endpoints_required(self):
        with pytest.raises(LadderError):
            GammaLadder((0.1, 1.0), (0.0,))
        with pytest.raises(LadderError):
            GammaLadder((0.0, 0.9), (0.0,))

    def test_points_must_increase(self):
        with pytest.raises(LadderError):
            GammaLadder((0.0, 0.6, 0.4, 1.0), (0.0, -0.3, 0.0))

    def test_must_close_at_base(self):
        with pytest.raises(LadderError):
            GammaLadder((0.0, 0.5, 1.0), (0.0, -0.2))

    def test_base_not_positive(self):
        with pytest.raises(LadderError):
            GammaLadder((0.0, 1.0), (0.1,))

    def test_valid_flat_ladders(self):
        assert GammaLadder((0.0, 1.0), (0.0,)).base_level == 0.0
        assert GammaLadder((0.0, 1.0), (-0.3,)).base_level == -0.3
        lad = GammaLadder((0.0, 0.25, 0.75, 1.0), (0.0, -0.35, 0.0))
        assert lad.levels == (0.0, -0.35, 0.0)


class TestChooseBaseLevel:
    def test_clean_gap_keeps_zero(self):
        s = make_sample(0.0, [-1.0, 1.0])
        assert choose_base_level(s, s, 1e-3, WINDOW) == (0.0, 0.0)

    def test_positive_offender_shifts_down(self):
        # eigenvalue at +5e-4 sits inside the margin; base drops to half
        # the largest negative endpoint eigenvalue
        s = make_sample(0.0, [-0.5, 0.0005, 1.0])
        gamma1, eps = choose_base_level(s, s, 1e-3, WINDOW)
        assert gamma1 == pytest.approx(-0.25, abs=1e-15)
        assert eps == pytest.approx(0.25, abs=1e-15)

    def test_negative_offender_rejected(self):
        s = make_sample(0.0, [-0.0005, -1.0, 1.0])
        with pytest.raises(LadderError, match="just below zero"):
            choose_base_level(s, s, 1e-3, WINDOW)

    def test_crowded_below_zero_rejected(self):
        s = make_sample(0.0, [-0.0015, 0.0005, 1.0])
        with pytest.raises(LadderError, match="too crowded"):
            choose_base_level(s, s, 1e-3, WINDOW)


class TestBuildLadder:
    def test_constant_gapped_family_trivial_ladder(self):
        samples = [make_sample(k / 8, [-1.0, 1.0]) for k in range(9)]
        ladder, eps = build_ladder(samples, 1e-3, WINDOW)
        assert ladder.t_points == (0.0, 1.0)
        assert ladder.levels == (0.0,)
        assert eps == 0.0
        assert spectral_flow(samples, ladder) == 0

    def test_three_ramp_family_counts_minus_one(self):
        samples = grid_samples(THREE_RAMP_CURVES, 1025)
        ladder, eps = build_ladder(samples, 0.05, WINDOW)
        assert eps == 0.0
        assert spectral_flow(samples, ladder) == THREE_RAMP_SF

    def test_no_certified_gap_requests_refinement(self):
        # a comb of spacing 0.05 at the t = 0.5 sample leaves no level with
        # 2 * gap_margin clearance anywhere inside the half-window
        def family(t):
            if abs(t - 0.5) < 1e-9:
                return np.linspace(-1.4, 1.4, 57)
            return np.array([-1.2, -0.3, 0.3, 1.2])

        samples = [make_sample(k / 8, family(k / 8)) for k in range(9)]
        with pytest.raises(RefinementRequest, match="no certified spectral gap") as exc:
            build_ladder(samples, 0.05, WINDOW)
        assert (exc.value.t_lo, exc.value.t_hi) == (0.375, 0.5)

    def test_uncertified_first_interval_requests_refinement(self):
        samples = [
            make_sample(0.0, [-0.9, 1.2]),
            make_sample(0.5, [0.0, 1.2]),
            make_sample(1.0, [0.9, 1.2]),
        ]
        with pytest.raises(RefinementRequest, match="first interval") as exc:
            build_ladder(samples, 1e-3, WINDOW)
        assert (exc.value.t_lo, exc.value.t_hi) == (0.0, 0.5)

    def test_unclosable_ladder_requests_refinement(self):
        # one branch climbs to -5e-4, hugs zero until t = 7/8, then dives;
        # the ladder must leave the base but can never certify a return
        def hover(t):
            if t <= 0.25:
                lam = -0.9
            elif t <= 0.5:
                lam = -0.9 + (t - 0.25) * (0.8995 / 0.25)
            elif t <= 0.875:
                lam = -0.0005
            else:
                lam = -0.0005 - (t - 0.875) * (0.8995 / 0.125)
            return [lam, -1.4, 1.4]

        samples = [make_sample(k / 8, hover(k / 8)) for k in range(9)]
        with pytest.raises(RefinementRequest, match="cannot close") as exc:
            build_ladder(samples, 1e-3, WINDOW)
        assert (exc.value.t_lo, exc.value.t_hi) == (0.875, 1.0)


class TestSpectralFlow:
    def test_ladder_independence_single_crossing(self):
        # the automatically built ladder and a hand-written valid ladder
        # must count the same flow
        samples = grid_samples(single_crossing(), 65)
        auto, _ = build_ladder(samples, 0.05, WINDOW)
        manual = GammaLadder((0.0, 0.25, 0.75, 1.0), (0.0, -0.35, 0.0))
        assert spectral_flow(samples, auto) == 1
        assert spectral_flow(samples, manual) == 1

    def test_downward_crossing_counts_minus_one(self):
        samples = grid_samples(single_crossing(slope=-1.0), 65)
        manual = GammaLadder((0.0, 0.25, 0.75, 1.0), (0.0, -0.35, 0.0))
        assert spectral_flow(samples, manual) == -1

    def test_partition_point_must_be_sampled(self):
        samples = grid_samples(single_crossing(), 65)
        ladder = GammaLadder((0.0, 0.3, 1.0), (0.0, 0.0))
        with pytest.raises(LadderError, match="not a sample"):
            spectral_flow(samples, ladder)

    def test_eigenvalue_on_level_requests_refinement(self):
        vals = [-0.5, 5e-7, 0.5]
        samples = [make_sample(t, vals) for t in (0.0, 0.5, 1.0)]
        ladder = GammaLadder((0.0, 0.5, 1.0), (0.0, 0.0))
        with pytest.raises(RefinementRequest, match="tol_mult") as exc:
            spectral_flow(samples, ladder)
        assert (exc.value.t_lo, exc.value.t_hi) == (0.0, 1.0)


class TestTrackCrossings:
    def test_upward_crossing_time_and_direction(self):
        samples = grid_samples(single_crossing(), 65)
        crossings = track_crossings(samples, 0.05, WINDOW)
        assert len(crossings) == 1
        t_star, direction = crossings[0]
        assert direction == 1
        assert t_star == pytest.approx(0.47, abs=1e-9)

    def test_downward_crossing(self):
        samples = grid_samples(single_crossing(slope=-1.0), 65)
        crossings = track_crossings(samples, 0.05, WINDOW)
        assert crossings == ((pytest.approx(0.47, abs=1e-9), -1),)

    def test_reference_level_shifts_the_crossing_target(self):
        curves = (lambda t: (t - 0.47) + 0.2, lambda t: -1.2, lambda t: 1.2)
        samples = grid_samples(curves, 65)
        crossings = track_crossings(samples, 0.05, WINDOW, ref_level=0.2)
        assert len(crossings) == 1
        assert crossings[0][0] == pytest.approx(0.47, abs=1e-9)
        assert crossings[0][1] == 1

    def test_quiet_family_has_no_crossings(self):
        samples = [make_sample(t, [-1.0, 1.0]) for t in (0.0, 1.0)]
        assert track_crossings(samples, 0.05, WINDOW) == ()

    def test_near_zero_eigenvalue_lost(self):
        samples = [make_sample(0.0, [0.1]), make_sample(1.0, [])]
        with pytest.raises(RefinementRequest, match="lost between samples"):
            track_crossings(samples, 0.05, WINDOW)

    def test_near_zero_eigenvalue_appeared(self):
        samples = [make_sample(0.0, []), make_sample(1.0, [0.1])]
        with pytest.raises(RefinementRequest, match="appeared between samples"):
            track_crossings(samples, 0.05, WINDOW)

    def test_ambiguous_match(self):
        samples = [make_sample(0.0, [0.30]), make_sample(1.0, [0.24, 0.36])]
        with pytest.raises(RefinementRequest, match="ambiguous match"):
            track_crossings(samples, 0.2, WINDOW)

    def test_non_mutual_nearest_match(self):
        samples = [make_sample(0.0, [0.0]), make_sample(1.0, [-0.25, 0.2])]
        with pytest.raises(RefinementRequest, match="non-mutual nearest"):
            track_crossings(samples, 0.02, WINDOW)

    def test_two_sources_one_target(self):
        samples = [make_sample(0.0, [-0.01, 0.01]), make_sample(1.0, [0.0, 1.2])]
        with pytest.raises(RefinementRequest, match="same target"):
            track_crossings(samples, 0.2, WINDOW)

    def test_coarse_crossing_step_rejected(self):
        samples = [make_sample(0.0, [-0.3]), make_sample(1.0, [0.3])]
        with pytest.raises(RefinementRequest, match="crossing step exceeds"):
            track_crossings(samples, 0.2, WINDOW)


class TestEndpointDefect:
    def test_equal_spectra(self):
        s = make_sample(0.0, [-1.0, 1.0])
        assert endpoint_isospectrality_defect(s, s) == 0.0

    def test_shifted_spectra(self):
        a = make_sample(0.0, [-1.0, 1.0])
        b = make_sample(1.0, [-1.0, 1.3])
        assert endpoint_isospectrality_defect(a, b) == pytest.approx(0.3)

    def test_size_mismatch_is_infinite(self):
        a = make_sample(0.0, [-1.0, 1.0])
        b = make_sample(1.0, [-1.0])
        assert endpoint_isospectrality_defect(a, b) == np.inf

    def test_empty_windows_agree(self):
        a = make_sample(0.0, [])
        b = make_sample(1.0, [])
        assert endpoint_isospectrality_defect(a, b) == 0.0


class TestRunFlowAdaptive:
    def test_three_ramp_family_both_routes(self):
        result = run_flow_adaptive(
            curve_sampler(THREE_RAMP_CURVES),
            predicted=THREE_RAMP_SF,
            gap_margin=0.05,
            c_hint=THREE_RAMP_HINT,
            check_endpoints=False,
        )
        assert result.status == "ok"
        assert result.sf == THREE_RAMP_SF
        assert result.agreement is True
        assert result.diagnostics["tracker_sum"] == THREE_RAMP_SF
        assert len(result.crossings) == len(THREE_RAMP_CROSSINGS)
        for (t_star, direction), (t_ref, d_ref) in zip(
            result.crossings, THREE_RAMP_CROSSINGS
        ):
            assert direction == d_ref
            assert t_star == pytest.approx(t_ref, abs=1e-6)

    def test_single_crossing_defaults(self):
        result = run_flow_adaptive(
            curve_sampler(single_crossing()), predicted=1, check_endpoints=False
        )
        assert result.status == "ok"
        assert result.sf == 1
        assert result.agreement is True
        assert result.crossings[0][0] == pytest.approx(0.47, abs=1e-6)

    def test_prediction_mismatch_flags_disagreement(self):
        result = run_flow_adaptive(
            curve_sampler(single_crossing()), predicted=0, check_endpoints=False
        )
        assert result.status == "ok"
        assert result.sf == 1
        assert result.agreement is False

    def test_endpoint_shift_recorded(self):
        # constant eigenvalue at +5e-4 forces the base level off zero
        sampler = curve_sampler((lambda t: 0.0005, lambda t: -1.0, lambda t: 1.0))
        result = run_flow_adaptive(sampler)
        assert result.status == "ok"
        assert result.sf == 0
        assert result.epsilon_shift == pytest.approx(0.5)
        assert result.ladder.base_level == pytest.approx(-0.5)
        assert result.crossings == ()

    def test_sample_budget_exhaustion_is_inconclusive(self):
        result = run_flow_adaptive(
            curve_sampler(single_crossing()),
            check_endpoints=False,
            max_samples=12,
        )
        assert result.status == "inconclusive"
        assert result.sf is None
        assert result.diagnostics["reason"] == "sample budget exceeded (12)"

    def test_depth_limit_is_inconclusive_and_names_interval(self):
        result = run_flow_adaptive(
            curve_sampler(single_crossing()),
            check_endpoints=False,
            max_depth=2,
        )
        assert result.status == "inconclusive"
        assert result.sf is None
        assert result.diagnostics["reason"].startswith("max refinement depth")
        t_lo, t_hi = result.diagnostics["blocked_interval"]
        assert 0.0 <= t_lo < 0.47 < t_hi <= 1.0

    def test_endpoint_mismatch_is_inconclusive(self):
        result = run_flow_adaptive(curve_sampler(single_crossing()))
        assert result.status == "inconclusive"
        assert result.sf is None
        assert "endpoint spectra differ" in result.diagnostics["reason"]
        assert result.diagnostics["endpoint_isospectrality_defect"] == pytest.approx(
            1.0
        )

    def test_needs_two_initial_samples(self):
        with pytest.raises(ValueError):
            run_flow_adaptive(curve_sampler(single_crossing()), t_samples_init=1)

    def test_samples_and_diagnostics_shape(self):
        result = run_flow_adaptive(
            curve_sampler(single_crossing()), check_endpoints=False
        )
        ts = [s.t for s in result.samples]
        assert ts == sorted(ts)
        assert ts[0] == 0.0 and ts[-1] == 1.0
        assert result.diagnostics["n_samples"] == len(result.samples)
        assert result.diagnostics["runtime_s"] >= 0.0

    @given(
        numerator=st.integers(min_value=2001, max_value=7999),
        slope=st.sampled_from([0.6, 1.0, 1.7, -0.6, -1.0, -1.7]),
    )
    def test_single_linear_crossing_property(self, numerator, slope):
        # crossing times p/10007 never coincide with a dyadic sample
        t_star = numerator / 10007.0
        result = run_flow_adaptive(
            curve_sampler(single_crossing(t_star=t_star, slope=slope)),
            check_endpoints=False,
            c_hint=2.0,
        )
        assert result.status == "ok"
        assert result.sf == (1 if slope > 0 else -1)
        assert len(result.crossings) == 1
        assert result.crossings[0][0] == pytest.approx(t_star, abs=1e-6)


class TestDisjointUnion:
    def test_flow_adds_over_disjoint_components(self):
        # the operator of a disjoint union is the direct sum, its window
        # spectrum the merged union, and the flow must add.  A direct sum has
        # no level repulsion, so the component geometries are chosen to keep
        # the crossing branches apart: with slopes 0.69 and 1.21 and zeros at
        # 0.5 vs 0.25/0.75 the linear branches stay >= 0.04 apart everywhere
        # in [0, 1], far above the ambiguity threshold.  The window 0.3 keeps
        # every other curve of either component out of sight
        from diracflow.radial import make_sampler as radial_sampler

        win = 0.3
        da = build_annulus(1.0, 2.0, -1.0, 1.0)
        db = build_annulus(1.2, 2.2, -1.0, 1.0)
        sa = radial_sampler(da, GaugeSpec(windings=(1,)), N=48, lam=win)
        sb = radial_sampler(db, GaugeSpec(windings=(2,)), N=48, lam=win)

        def merged(t):
            a, b = sa(t), sb(t)
            vals = np.sort(np.concatenate([a.eigenvalues, b.eigenvalues]))
            below = (a.count_below or 0) + (b.count_below or 0)
            return SpectrumSample(
                t=float(t), eigenvalues=vals, count_below=below,
                metadata={"window": win},
            )

        ra = run_flow_adaptive(sa, c_hint=2.0, window=win)
        rb = run_flow_adaptive(sb, c_hint=2.0, window=win)
        rm = run_flow_adaptive(merged, c_hint=2.0, window=win)
        assert (ra.status, rb.status, rm.status) == ("ok", "ok", "ok")
        assert ra.sf == 1 and rb.sf == 2
        assert rm.sf == ra.sf + rb.sf
        assert [d for _, d in rm.crossings] == [1, 1, 1]


class TestRunFlowRadial:
    @pytest.mark.parametrize(
        "b_in,b_out,w,expected,t_stars",
        [
            (-1.0, 1.0, 1, 1, (0.5,)),
            (-1.0, 1.0, 2, 2, (0.25, 0.75)),
            (1.0, 1.0, 1, 0, ()),
        ],
    )
    def test_annulus_flux_families(self, b_in, b_out, w, expected, t_stars):
        d = build_annulus(1.0, 2.0, b_in, b_out)
        g = GaugeSpec(windings=(w,))
        result = run_flow(d, g, backend="radial", resolution=48)
        assert result.status == "ok"
        assert result.sf == expected
        assert result.predicted == expected
        assert result.agreement is True
        assert result.epsilon_shift == 0.0
        assert result.diagnostics["endpoint_isospectrality_defect"] <= 1e-9
        assert len(result.crossings) == len(t_stars)
        for (t_star, direction), t_ref in zip(result.crossings, t_stars):
            assert direction == 1
            assert t_star == pytest.approx(t_ref, abs=5e-3)
