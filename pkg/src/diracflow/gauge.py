"""Flux insertion: the unit-modulus multiplier, link phases, and windings.

The gauge multiplier is mu(p) = prod_k ((p - c_k)/|p - c_k|)^{w_k} over hole
centers c_k with integer windings w_k.  Conjugating the free operator by mu
shifts it by the vector potential sum_k w_k grad(theta_k); the family studied
here ramps that potential with a monotone schedule s(t) from s(0) = 0 to
s(1) = 1, so the endpoints are exactly gauge-equivalent and isospectral.

On a grid the potential enters through nearest-neighbor link phases
exp(i * s(t) * sum_k w_k * dtheta_k(link)) with dtheta_k the principal-value
angle increment of the link endpoints as seen from c_k.  Exact angle
increments (instead of numeric line integrals) make the plaquette-flux audit
and the t = 1 pure-gauge identity exact to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import BoundaryComponent, DomainSpec, GridMask
from .errors import SingularityError, UndersamplingError

# ---------------------------------------------------------------------------
# Flux schedules.  Each maps [0,1] -> [0,1], continuous and monotone with
# s(0) = 0 and s(1) = 1.  The measured flow must not depend on the choice.

_PIECEWISE_TS = np.array([0.0, 0.25, 0.75, 1.0])
_PIECEWISE_SS = np.array([0.0, 0.10, 0.90, 1.0])

SCHEDULES = {
    "linear": lambda t: t,
    "quadratic": lambda t: t * t,
    "piecewise": lambda t: float(np.interp(t, _PIECEWISE_TS, _PIECEWISE_SS)),
}

# Upper bounds on |s'| used for Lipschitz estimates of eigenvalue motion.
SCHEDULE_SLOPE_BOUND = {"linear": 1.0, "quadratic": 2.0, "piecewise": 1.6}


@dataclass(frozen=True)
class GaugeSpec:
    """Integer winding per hole plus a named flux schedule."""

    windings: tuple[int, ...]
    schedule: str = "linear"

    def __post_init__(self):
        for w in self.windings:
            if int(w) != w:
                raise ValueError(f"windings must be integers, got {w}")
        object.__setattr__(self, "windings", tuple(int(w) for w in self.windings))
        if self.schedule not in SCHEDULES:
            raise ValueError(
                f"unknown schedule {self.schedule!r}; available: {sorted(SCHEDULES)}"
            )

    def s(self, t: float) -> float:
        """Effective flux fraction at parameter t."""
        return float(SCHEDULES[self.schedule](float(t)))

    def slope_bound(self) -> float:
        return SCHEDULE_SLOPE_BOUND[self.schedule]

    def total_abs_winding(self) -> int:
        return int(sum(abs(w) for w in self.windings))


def _check_windings_match(g: GaugeSpec, d: DomainSpec):
    if len(g.windings) != len(d.holes):
        raise ValueError(
            f"gauge has {len(g.windings)} windings but domain has {len(d.holes)} holes"
        )


def _mu_at(points: np.ndarray, centers, windings) -> np.ndarray:
    """mu evaluated at complex points for given centers/windings (vectorized)."""
    z = np.asarray(points, dtype=complex)
    out = np.ones_like(z)
    for (cx, cy), w in zip(centers, windings):
        if w == 0:
            continue
        rel = z - (cx + 1j * cy)
        a = np.abs(rel)
        if np.any(a == 0.0):
            raise SingularityError("mu evaluated at a hole center")
        out *= (rel / a) ** w
    return out


def mu_eval(g: GaugeSpec, d: DomainSpec, p) -> complex:
    """The unit-modulus multiplier at point p (p must avoid hole centers)."""
    _check_windings_match(g, d)
    z = complex(float(p[0]), float(p[1]))
    return complex(_mu_at(np.array([z]), d.hole_centers, g.windings)[0])


def winding_number(
    g: GaugeSpec, d: DomainSpec, component: BoundaryComponent, n_samples: int
) -> int:
    """Winding of mu along the component, domain-left orientation.

    Computed as the sum of principal-value phase increments between
    consecutive sample points, divided by 2*pi.  The result must land on an
    integer within 0.01 or the contour was undersampled.
    """
    _check_windings_match(g, d)
    min_samples = 8 * (1 + g.total_abs_winding())
    if n_samples < min_samples:
        raise UndersamplingError(
            f"n_samples = {n_samples} below minimum {min_samples} for these windings"
        )
    s = np.arange(n_samples + 1) / n_samples
    theta = 2.0 * np.pi * s * component.orientation
    pts = (
        component.center[0]
        + component.radius * np.cos(theta)
        + 1j * (component.center[1] + component.radius * np.sin(theta))
    )
    mu = _mu_at(pts, d.hole_centers, g.windings)
    increments = np.angle(mu[1:] / mu[:-1])
    total = float(np.sum(increments)) / (2.0 * np.pi)
    nearest = round(total)
    if abs(total - nearest) >= 0.01:
        raise UndersamplingError(
            f"winding rounding defect {abs(total - nearest):.3g} >= 0.01 "
            f"at n_samples = {n_samples}"
        )
    return int(nearest)


def predicted_sf(g: GaugeSpec, d: DomainSpec) -> int:
    """Topological prediction: total winding of mu over the B > 0 components."""
    from .domain import boundary_components

    _check_windings_match(g, d)
    n_samples = max(64, 16 * (1 + g.total_abs_winding()))
    total = 0
    for comp in boundary_components(d):
        if comp.b_sign > 0:
            total += winding_number(g, d, comp, n_samples)
    return total


# ---------------------------------------------------------------------------
# Lattice link phases.


@dataclass(frozen=True)
class LinkField:
    """Unit-modulus phases on nearest-neighbor grid links at parameter t.

    phase_x[i, j] is the phase on the link from cell (i, j) to (i+1, j);
    phase_y[i, j] from (i, j) to (i, j+1).  centers are the effective hole
    centers used (nudged off grid lines when necessary) and t_eff = s(t) the
    effective flux fraction.
    """

    t: float
    t_eff: float
    windings: tuple[int, ...]
    centers: tuple[tuple[float, float], ...]
    phase_x: np.ndarray = field(repr=False)
    phase_y: np.ndarray = field(repr=False)


def _effective_centers(d: DomainSpec, mask: GridMask) -> tuple[tuple[float, float], ...]:
    """Hole centers nudged by h/7 off any grid line they sit on.

    A center on a grid line could lie exactly on a link segment, making the
    angle increment ill-defined; the nudge removes the singularity from every
    evaluated quantity.  The prediction is unaffected (windings are
    topological and the nudge never crosses a cell boundary of interest).
    """
    xs, ys = mask.cell_centers()
    tol = mask.h / 1000.0
    out = []
    for (cx, cy) in d.hole_centers:
        on_x_line = np.any(np.abs(xs - cx) < tol)
        on_y_line = np.any(np.abs(ys - cy) < tol)
        if on_x_line or on_y_line:
            out.append((cx + mask.h / 7.0, cy + mask.h / 7.0))
        else:
            out.append((cx, cy))
    return tuple(out)


def link_phases(g: GaugeSpec, d: DomainSpec, mask: GridMask, t: float) -> LinkField:
    """Link phases exp(i * s(t) * sum_k w_k * dtheta_k) on the mask's grid."""
    _check_windings_match(g, d)
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must be in [0, 1], got {t}")
    t_eff = g.s(t)
    centers = _effective_centers(d, mask)
    xs, ys = mask.cell_centers()
    Z = xs[:, None] + 1j * ys[None, :]
    ang_x = np.zeros((mask.nx - 1, mask.ny))
    ang_y = np.zeros((mask.nx, mask.ny - 1))
    for (cx, cy), w in zip(centers, g.windings):
        if w == 0:
            continue
        rel = Z - (cx + 1j * cy)
        if np.any(rel == 0.0):
            raise SingularityError("hole center coincides with a grid site")
        ang_x += w * np.angle(rel[1:, :] / rel[:-1, :])
        ang_y += w * np.angle(rel[:, 1:] / rel[:, :-1])
    return LinkField(
        t=float(t),
        t_eff=t_eff,
        windings=g.windings,
        centers=centers,
        phase_x=np.exp(1j * t_eff * ang_x),
        phase_y=np.exp(1j * t_eff * ang_y),
    )


def site_gauge(links: LinkField, mask: GridMask) -> np.ndarray:
    """The site transformation G(x) = mu(x)^{t_eff-power} matching the links.

    At t_eff = 1 this is exactly mu evaluated at the cell centers (with the
    field's effective hole centers), and the link field is the pure lattice
    gauge G(y) * conj(G(x)).
    """
    xs, ys = mask.cell_centers()
    Z = xs[:, None] + 1j * ys[None, :]
    G = np.ones_like(Z)
    for (cx, cy), w in zip(links.centers, links.windings):
        if w == 0:
            continue
        rel = Z - (cx + 1j * cy)
        G *= np.exp(1j * links.t_eff * w * np.angle(rel))
    return G


def pure_gauge_residual(links: LinkField, mask: GridMask) -> float:
    """max |U_link - G(head) conj(G(tail))| over all links.

    Zero to rounding exactly when the field is a pure gauge, i.e. when
    t_eff * w_k is an integer for every k (single-valued site transformation).
    """
    G = site_gauge(links, mask)
    rx = np.abs(links.phase_x - G[1:, :] * np.conj(G[:-1, :]))
    ry = np.abs(links.phase_y - G[:, 1:] * np.conj(G[:, :-1]))
    return float(max(rx.max(initial=0.0), ry.max(initial=0.0)))


def plaquette_fluxes(links: LinkField) -> np.ndarray:
    """Phase product around each elementary plaquette (counterclockwise).

    plaq[i, j] is the product over the square with corners (i, j) .. (i+1, j+1);
    it equals 1 away from hole centers and exp(2*pi*i*t_eff*w_k) on the
    plaquette containing c_k.
    """
    ux = links.phase_x
    uy = links.phase_y
    return ux[:, :-1] * uy[1:, :] * np.conj(ux[:, 1:]) * np.conj(uy[:-1, :])
