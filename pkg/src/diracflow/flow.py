"""Spectral flow of a sampled operator family.

Two independent counting routes over the same spectrum samples:

* the level-ladder route: a partition 0 = t_0 < ... < t_{n+1} = 1 and levels
  gamma_1 .. gamma_{n+1} (gamma_1 = gamma_{n+1} <= 0), each level staying a
  safe margin away from every sampled eigenvalue on its subinterval; the flow
  is sum_j m_j sign(gamma_j - gamma_{j+1}) with m_j the number of eigenvalues
  of the sample at t_j strictly between the two levels;

* the crossing tracker: nearest-value matching of near-zero eigenvalues
  between consecutive samples, a crossing being a matched sign flip, with the
  flow as the sum of crossing directions.

Both routes request refinement (new samples, bisection) when the data cannot
certify a count; an accepted run requires both to complete and agree.

Levels are additionally certified *between* samples with a Lipschitz-style
rule: c_est * dt < d_i + d_{i+1}, where d is the distance from the level to
the sampled spectrum (window-edge aware) and c_est combines the backend's
eigenvalue-motion bound with the largest slope actually measured between the
two samples.  This excludes an even number of unseen level crossings inside a
sample gap; the tracker and the topological predictor provide independent
checks on top.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .domain import DomainSpec
from .eigen import SpectrumSample
from .errors import LadderError, RefinementRequest
from .gauge import GaugeSpec, predicted_sf

ENDPOINT_ISOSPECTRALITY_TOL = 1e-9


@dataclass(frozen=True)
class GammaLadder:
    """Partition points (first 0, last 1) and one level per subinterval."""

    t_points: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.t_points) - 1:
            raise LadderError("need exactly one level per partition subinterval")
        if self.t_points[0] != 0.0 or self.t_points[-1] != 1.0:
            raise LadderError("partition must start at 0 and end at 1")
        if np.any(np.diff(self.t_points) <= 0):
            raise LadderError("partition points must be strictly increasing")
        if self.levels[0] != self.levels[-1]:
            raise LadderError("first and last levels must coincide")
        if self.levels[0] > 0:
            raise LadderError("base level must be <= 0")

    @property
    def base_level(self) -> float:
        return self.levels[0]


@dataclass(frozen=True)
class FlowResult:
    """Measured flow, its certificates, and the topological prediction."""

    sf: int | None
    crossings: tuple[tuple[float, int], ...]
    ladder: GammaLadder | None
    predicted: int | None
    agreement: bool | None
    refinement_depth: int
    epsilon_shift: float = 0.0
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)
    samples: tuple = ()


def _sample_ts(samples: list[SpectrumSample]) -> np.ndarray:
    return np.array([s.t for s in samples])


def _sorted_samples(samples) -> list[SpectrumSample]:
    out = sorted(samples, key=lambda s: s.t)
    ts = _sample_ts(out)
    if len(out) < 2 or ts[0] != 0.0 or ts[-1] != 1.0:
        raise LadderError("samples must cover [0, 1] including both endpoints")
    if np.any(np.diff(ts) <= 0):
        raise LadderError("duplicate sample parameter values")
    return out


def _level_distance(sample: SpectrumSample, gamma: float, window: float) -> float:
    """Distance from gamma to the sample's spectrum, window-edge aware.

    Eigenvalues outside the window are unseen but lie at least
    window - |gamma| away from the level."""
    d_edge = window - abs(gamma)
    ev = sample.eigenvalues
    if ev.size == 0:
        return d_edge
    return float(min(np.abs(ev - gamma).min(), d_edge))


def choose_base_level(
    s0: SpectrumSample, s1: SpectrumSample, gap_margin: float, window: float
) -> tuple[float, float]:
    """Base (and closing) ladder level, with the recorded family shift.

    Returns (gamma_1, epsilon).  gamma_1 = 0 when both endpoint spectra keep a
    gap_margin-wide gap around zero.  Otherwise the whole count is referenced
    to a negative level gamma_1 with no endpoint eigenvalue in [gamma_1, 0) --
    equivalent to shifting the family by epsilon = -gamma_1 > 0."""
    endpoint = np.concatenate([s0.eigenvalues, s1.eigenvalues])
    if endpoint.size == 0 or np.abs(endpoint).min() >= gap_margin:
        return 0.0, 0.0
    # Offenders within gap_margin of zero must all be >= 0, otherwise no
    # half-open interval [gamma_1, 0) can be spectrum-free.
    offenders = endpoint[np.abs(endpoint) < gap_margin]
    if np.any(offenders < 0):
        raise LadderError(
            "endpoint spectrum has an eigenvalue just below zero; "
            "no valid endpoint normalization exists at this gap_margin"
        )
    negatives = endpoint[endpoint < 0]
    e_neg = float(negatives.max()) if negatives.size else -window
    gamma1 = max(e_neg / 2.0, -window / 2.0)
    if gamma1 >= -gap_margin or gamma1 - e_neg < gap_margin:
        raise LadderError(
            "endpoint spectrum too crowded below zero for an endpoint shift"
        )
    return gamma1, -gamma1


def _measured_slope(
    s_lo: SpectrumSample, s_hi: SpectrumSample, window: float
) -> float:
    """Largest |d lambda / dt| over nearest-value matches inside the window."""
    a, b = s_lo.eigenvalues, s_hi.eigenvalues
    if a.size == 0 or b.size == 0:
        return 0.0
    dt = s_hi.t - s_lo.t
    band = 0.75 * window
    src = a[np.abs(a) <= band]
    if src.size == 0:
        return 0.0
    nearest = b[np.searchsorted(b, src).clip(1, b.size - 1)] if b.size > 1 else b[[0] * src.size]
    # searchsorted gives a neighbor; check both sides for the true nearest
    d_hi = np.abs(nearest - src)
    lo_idx = (np.searchsorted(b, src) - 1).clip(0, b.size - 1)
    d_lo = np.abs(b[lo_idx] - src)
    return float(np.minimum(d_hi, d_lo).max() / dt)


class _LadderBuilder:
    def __init__(self, samples, gap_margin, window, c_hint):
        self.samples = samples
        self.ts = _sample_ts(samples)
        self.gap_margin = gap_margin
        self.window = window
        self.c_hint = c_hint

    def dist(self, i: int, gamma: float) -> float:
        return _level_distance(self.samples[i], gamma, self.window)

    def c_est(self, i: int) -> float:
        return max(
            self.c_hint,
            _measured_slope(self.samples[i], self.samples[i + 1], self.window),
        )

    def certified(self, i: int, gamma: float) -> bool:
        """Is gamma a valid level across sample interval [t_i, t_{i+1}]?"""
        if abs(gamma) > self.window / 2.0:
            return False
        d0 = self.dist(i, gamma)
        d1 = self.dist(i + 1, gamma)
        if d0 < self.gap_margin or d1 < self.gap_margin:
            return False
        dt = self.ts[i + 1] - self.ts[i]
        return self.c_est(i) * dt < d0 + d1

    def pick_level(self, i: int) -> float | None:
        """Best certified level for interval i from the union of its samples."""
        union = np.concatenate(
            [self.samples[i].eigenvalues, self.samples[i + 1].eigenvalues]
        )
        half = self.window / 2.0
        pts = np.unique(np.concatenate([union, [-half, half]]))
        pts = pts[(pts >= -half) & (pts <= half)]
        best = None
        best_score = -np.inf
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi - lo < 2.0 * self.gap_margin:
                continue
            mid = 0.5 * (lo + hi)
            if not self.certified(i, mid):
                continue
            score = min(self.dist(i, mid), self.dist(i + 1, mid))
            # prefer robust gaps; tie-break toward zero
            if score > best_score + 1e-15 or (
                abs(score - best_score) <= 1e-15
                and best is not None
                and abs(mid) < abs(best)
            ):
                best, best_score = mid, score
        return best


def build_ladder(
    samples,
    gap_margin: float,
    window: float,
    c_hint: float = 0.0,
) -> tuple[GammaLadder, float]:
    """Construct a valid level ladder for the samples, or request refinement.

    Returns (ladder, epsilon_shift).  Raises RefinementRequest naming the
    sample subinterval where no certified level of width 2*gap_margin exists.
    """
    samples = _sorted_samples(samples)
    b = _LadderBuilder(samples, gap_margin, window, c_hint)
    ts = b.ts
    base, epsilon = choose_base_level(samples[0], samples[-1], gap_margin, window)

    partition = [0.0]
    levels = [base]
    current = base
    for i in range(len(samples) - 1):
        # Return to the base level at the earliest certified opportunity, so
        # the ladder is already closed when the tail of the family is quiet.
        if current != base and i > 0 and b.certified(i, base):
            partition.append(float(ts[i]))
            levels.append(base)
            current = base
        if b.certified(i, current):
            continue
        if i == 0:
            raise RefinementRequest(
                ts[0], ts[1], "base level not certified on the first interval"
            )
        new_level = b.pick_level(i)
        if new_level is None:
            raise RefinementRequest(
                ts[i], ts[i + 1], "no certified spectral gap wide enough for a level"
            )
        partition.append(float(ts[i]))
        levels.append(float(new_level))
        current = new_level

    if current != base:
        ok = [b.certified(i, base) for i in range(len(samples) - 1)]
        i_star = None
        for i in reversed(range(len(samples) - 1)):
            if not ok[i]:
                break
            i_star = i
        last_partition_t = partition[-1]
        if i_star is None or ts[i_star] <= last_partition_t:
            raise RefinementRequest(
                ts[-2], ts[-1], "cannot close the ladder back to the base level"
            )
        partition.append(float(ts[i_star]))
        levels.append(base)

    partition.append(1.0)
    return GammaLadder(tuple(partition), tuple(levels)), epsilon


def spectral_flow(samples, ladder: GammaLadder, tol_mult: float = 1e-6) -> int:
    """Count the flow from a valid ladder: sum_j m_j sign(gamma_j - gamma_{j+1}).

    m_j counts eigenvalues of the sample at partition point t_j strictly
    between consecutive levels; an eigenvalue within tol_mult of either level
    invalidates the ladder (refinement request) instead of being counted
    heuristically."""
    samples = _sorted_samples(samples)
    by_t = {s.t: s for s in samples}
    sf = 0
    for j in range(1, len(ladder.t_points) - 1):
        tj = ladder.t_points[j]
        g_lo = ladder.levels[j - 1]
        g_hi = ladder.levels[j]
        if tj not in by_t:
            raise LadderError(f"partition point t = {tj} is not a sample")
        ev = by_t[tj].eigenvalues
        for g in (g_lo, g_hi):
            if ev.size and np.abs(ev - g).min() < tol_mult:
                raise RefinementRequest(
                    ladder.t_points[j - 1],
                    ladder.t_points[j + 1],
                    f"eigenvalue within tol_mult of level {g:.6g} at t = {tj:.6g}",
                )
        lo, hi = min(g_lo, g_hi), max(g_lo, g_hi)
        m_j = int(np.count_nonzero((ev > lo) & (ev < hi)))
        sf += m_j * int(np.sign(g_lo - g_hi))
    return sf


def track_crossings(
    samples,
    gap_margin: float,
    window: float,
    ref_level: float = 0.0,
) -> tuple[tuple[float, int], ...]:
    """Crossings of ref_level from nearest-value matching of consecutive samples.

    Returns ((t_star, direction), ...).  Matching is restricted to the band
    |lambda - ref| <= window/2; a sign flip is a crossing with direction from
    the matched difference and t_star from linear interpolation.  Requests
    refinement on ambiguous matches (two candidates within gap_margin/2), on
    non-mutual near-zero matches, and on crossing steps larger than
    gap_margin/2 (the step control that certifies the interpolation).
    """
    samples = _sorted_samples(samples)
    band = window / 2.0
    crossings = []
    for s_lo, s_hi in zip(samples[:-1], samples[1:]):
        a = s_lo.eigenvalues - ref_level
        c = s_hi.eigenvalues - ref_level
        ia = np.where(np.abs(a) <= band)[0]
        ic = np.where(np.abs(c) <= band)[0]
        if ia.size == 0 and ic.size == 0:
            continue

        def nearest(src_val, pool):
            if pool.size == 0:
                return None, np.inf, np.inf
            d = np.abs(pool - src_val)
            order = np.argsort(d, kind="stable")
            best = order[0]
            second = d[order[1]] if d.size > 1 else np.inf
            return best, d[best], second

        matched_pairs = {}
        for i in ia:
            jbest, dbest, dsecond = nearest(a[i], c)
            if jbest is None:
                if abs(a[i]) <= band / 2.0:
                    raise RefinementRequest(
                        s_lo.t, s_hi.t, "near-zero eigenvalue lost between samples"
                    )
                continue
            if dsecond - dbest < gap_margin / 2.0 and abs(a[i]) <= band:
                raise RefinementRequest(
                    s_lo.t,
                    s_hi.t,
                    f"ambiguous match for eigenvalue {a[i] + ref_level:.6g}",
                )
            matched_pairs[i] = int(jbest)
        # mutual-nearest consistency for anything near zero on either side
        for j in ic:
            ibest, dbest, dsecond = nearest(c[j], a)
            if ibest is None:
                if abs(c[j]) <= band / 2.0:
                    raise RefinementRequest(
                        s_lo.t, s_hi.t, "near-zero eigenvalue appeared between samples"
                    )
                continue
            if abs(c[j]) <= band / 2.0:
                back = matched_pairs.get(int(ibest))
                if back is not None and back != int(j) and abs(a[int(ibest)]) <= band / 2.0:
                    raise RefinementRequest(
                        s_lo.t, s_hi.t, "non-mutual nearest match near zero"
                    )
        seen_targets = {}
        for i, j in matched_pairs.items():
            if j in seen_targets and (abs(a[i]) <= band / 2.0 or abs(c[j]) <= band / 2.0):
                raise RefinementRequest(
                    s_lo.t, s_hi.t, "two eigenvalues matched the same target near zero"
                )
            seen_targets[j] = i
        for i, j in matched_pairs.items():
            lo_val, hi_val = a[i], c[j]
            crossing = lo_val * hi_val < 0
            near = min(abs(lo_val), abs(hi_val)) < gap_margin
            if crossing or near:
                if abs(hi_val - lo_val) > gap_margin / 2.0:
                    raise RefinementRequest(
                        s_lo.t,
                        s_hi.t,
                        "crossing step exceeds gap_margin/2; sample finer",
                    )
            if crossing:
                t_star = s_lo.t + (s_hi.t - s_lo.t) * (0.0 - lo_val) / (hi_val - lo_val)
                crossings.append((float(t_star), 1 if hi_val > lo_val else -1))
    return tuple(sorted(crossings))


def endpoint_isospectrality_defect(s0: SpectrumSample, s1: SpectrumSample) -> float:
    """Entrywise disagreement of the endpoint window spectra."""
    a, b = s0.eigenvalues, s1.eigenvalues
    if a.size != b.size:
        return float("inf")
    if a.size == 0:
        return 0.0
    return float(np.abs(a - b).max())


def run_flow_adaptive(
    sampler,
    *,
    predicted: int | None = None,
    t_samples_init: int = 9,
    gap_margin: float = 1e-3,
    tol_mult: float = 1e-6,
    max_depth: int = 12,
    window: float = 1.5,
    c_hint: float = 0.0,
    max_samples: int = 400,
    check_endpoints: bool = True,
) -> FlowResult:
    """Adaptive spectral-flow measurement from a sampler t -> SpectrumSample.

    Samples an initial uniform grid, then bisects whichever subinterval the
    ladder or the tracker cannot certify, up to max_depth levels below the
    initial spacing.  The result is accepted only when the ladder count and
    the tracker's signed crossing sum agree and the endpoint window spectra
    coincide to 1e-9.
    """
    if t_samples_init < 2:
        raise ValueError("need at least the two endpoint samples")
    t0 = time.perf_counter()
    init_dt = 1.0 / (t_samples_init - 1)
    samples = {}
    for k in range(t_samples_init):
        t = k * init_dt
        samples[t] = sampler(t)

    depth_used = 0
    status = "ok"
    diag: dict = {}
    ladder = None
    eps = 0.0
    sf = None
    crossings: tuple = ()

    while True:
        if len(samples) > max_samples:
            status = "inconclusive"
            diag["reason"] = f"sample budget exceeded ({max_samples})"
            break
        ordered = [samples[t] for t in sorted(samples)]
        try:
            ladder, eps = build_ladder(ordered, gap_margin, window, c_hint)
            sf = spectral_flow(ordered, ladder, tol_mult)
            crossings = track_crossings(ordered, gap_margin, window, ref_level=ladder.base_level)
            break
        except RefinementRequest as rr:
            t_new = 0.5 * (rr.t_lo + rr.t_hi)
            depth_needed = int(np.ceil(np.log2(init_dt / (rr.t_hi - rr.t_lo)))) + 1
            if depth_needed > max_depth or t_new in samples:
                status = "inconclusive"
                diag["reason"] = f"max refinement depth: {rr.reason}"
                diag["blocked_interval"] = (rr.t_lo, rr.t_hi)
                break
            depth_used = max(depth_used, depth_needed)
            samples[t_new] = sampler(t_new)

    ordered = [samples[t] for t in sorted(samples)]
    defect = endpoint_isospectrality_defect(ordered[0], ordered[-1])
    diag["endpoint_isospectrality_defect"] = defect
    diag["n_samples"] = len(ordered)
    diag["runtime_s"] = time.perf_counter() - t0
    if check_endpoints and defect > ENDPOINT_ISOSPECTRALITY_TOL and status == "ok":
        status = "inconclusive"
        diag["reason"] = f"endpoint spectra differ by {defect:.3e}"

    if status == "ok" and sf is not None:
        tracker_sum = int(sum(d for _, d in crossings))
        diag["tracker_sum"] = tracker_sum
        if tracker_sum != sf:
            status = "inconclusive"
            diag["reason"] = (
                f"ladder count {sf} and tracker sum {tracker_sum} disagree"
            )

    agreement = None
    if predicted is not None:
        agreement = bool(status == "ok" and sf is not None and sf == predicted)
    return FlowResult(
        sf=sf if status == "ok" else None,
        crossings=crossings,
        ladder=ladder,
        predicted=predicted,
        agreement=agreement,
        refinement_depth=depth_used,
        epsilon_shift=eps,
        status=status,
        diagnostics=diag,
        samples=tuple(ordered),
    )


def run_flow(
    d: DomainSpec,
    g: GaugeSpec,
    backend: str,
    resolution: int,
    t_samples_init: int = 9,
    *,
    window: float = 1.5,
    gap_margin: float = 1e-3,
    tol_mult: float = 1e-6,
    max_depth: int = 12,
    lattice_params=None,
    calibration=None,
    seed: int = 0,
) -> FlowResult:
    """Measure the flow of the flux family on a domain with a chosen backend.

    resolution is the radial grid size N for backend="radial" and the number
    of cells per outer diameter for backend="lattice".
    """
    if backend == "radial":
        from . import radial

        sampler = radial.make_sampler(d, g, N=resolution, lam=window)
        c_hint = radial.lipschitz_hint(d, g)
    elif backend == "lattice":
        from . import lattice

        params = lattice_params if lattice_params is not None else lattice.LatticeParams()
        sampler = lattice.make_sampler(
            d, g, params, cells_per_diameter=resolution, lam=window,
            calibration=calibration, seed=seed,
        )
        c_hint = lattice.lipschitz_hint(d, g)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return run_flow_adaptive(
        sampler,
        predicted=predicted_sf(g, d),
        t_samples_init=t_samples_init,
        gap_margin=gap_margin,
        tol_mult=tol_mult,
        max_depth=max_depth,
        window=window,
        c_hint=c_hint,
    )
