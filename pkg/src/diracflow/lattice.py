"""Domain-wall lattice realization of the boundary-value family.

The domain is embedded in a square grid box.  Interior cells carry zero mass;
exterior cells (outside the outer circle, and inside each hole) carry a large
Wilson mass whose sign per region realizes the sign of the boundary constant
B on the adjacent boundary component.  Which mass sign realizes which B sign
is not derivable from conventions alone, so it is calibrated once per process
against the separable annulus backend (wall_sign_calibration).

Operator (lattice units, spacing 1):

    H = sum_x (m(x) + 2 r) Z psi_x^+ psi_x
      + sum_x,j [ psi_{x+e_j}^+ M_j U(x -> x+e_j) psi_x + h.c. ]

with Z = diag(-1, 1), M_x = [[r/2, i/2], [i/2, -r/2]],
M_y = [[r/2, 1/2], [-1/2, -r/2]].  A plane wave then sees
sigma_x sin kx + sigma_y sin ky + (m + r(2 - cos kx - cos ky)) Z, i.e. a
massless Dirac cone at k = 0 with all doublers pushed to mass >= 2r - |m|.

Physical eigenvalues are lattice eigenvalues divided by the spacing h.  The
measurement window must satisfy lam * h <= window_lat < m_wall so that wall
bulk never enters; states running along the outer box edge do enter the
window and are removed by the interior-weight filter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix, diags, identity
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .domain import (
    TAG_EXTERIOR,
    TAG_INTERIOR,
    DomainSpec,
    GridMask,
    build_annulus,
    rasterize,
)
from .eigen import HermitianOperator, SpectrumSample
from .errors import AssemblyError, CalibrationError, ResolutionError
from .gauge import GaugeSpec, LinkField, link_phases

MIN_CALIBRATION_CELLS = 48


@dataclass(frozen=True)
class LatticeParams:
    """Discretization constants for the domain-wall backend.

    window_lat caps the usable window in lattice units: it must stay below
    the wall gap (m_wall for r_wilson >= m_wall / 2) with a factor-2 margin
    so wall bulk states can never leak into a measurement.
    """

    r_wilson: float = 1.0
    m_wall: float = 1.0
    window_lat: float = 0.3
    margin_cells: int = 6
    weight_threshold: float = 0.5
    dense_cutoff: int = 2600
    k_init: int = 48
    seed: int = 7

    def __post_init__(self):
        if not 0 < self.m_wall < 2 * self.r_wilson:
            raise AssemblyError(
                f"need 0 < m_wall < 2 r_wilson, got m_wall={self.m_wall}, "
                f"r_wilson={self.r_wilson} (doubler mass must exceed the wall mass)"
            )
        if not 0 < self.window_lat <= self.m_wall / 2:
            raise AssemblyError(
                f"window_lat must lie in (0, m_wall/2], got {self.window_lat}"
            )
        if self.margin_cells < 3:
            raise AssemblyError("need at least 3 margin cells of wall")
        if not 0 < self.weight_threshold < 1:
            raise AssemblyError("weight_threshold must lie in (0, 1)")


def hop_matrices(r_wilson: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward hop blocks (head side) for the x and y directions."""
    r = r_wilson
    m_x = np.array([[r / 2.0, 0.5j], [0.5j, -r / 2.0]])
    m_y = np.array([[r / 2.0, 0.5], [-0.5, -r / 2.0]])
    return m_x, m_y


def lattice_dispersion(kx, ky, mass: float, r_wilson: float) -> np.ndarray:
    """Positive branch of the uniform-mass bulk dispersion (lattice units)."""
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    m_w = mass + r_wilson * (2.0 - np.cos(kx) - np.cos(ky))
    return np.sqrt(np.sin(kx) ** 2 + np.sin(ky) ** 2 + m_w**2)


def _hop_block(head: np.ndarray, tail: np.ndarray, m: np.ndarray, u: np.ndarray):
    """COO triplets for sum over the given links of |head> M u <tail|."""
    rows, cols, vals = [], [], []
    for a in range(2):
        for b in range(2):
            rows.append(2 * head + a)
            cols.append(2 * tail + b)
            vals.append(np.full(head.shape, m[a, b]) * u)
    return rows, cols, vals


def assemble_hamiltonian(
    mass_map: np.ndarray,
    params: LatticeParams,
    links: LinkField | None = None,
    periodic: bool = False,
) -> HermitianOperator:
    """Wilson Hamiltonian on the full box, in lattice units.

    mass_map is the per-cell mass m(x) (zero in the domain interior, signed
    m_wall elsewhere).  links supplies U(1) phases on the grid links; None
    means flux off (all phases 1).  periodic wraps both directions with unit
    phases (uniform-bulk diagnostics only) and is incompatible with links.
    """
    nx, ny = mass_map.shape
    n_sites = nx * ny
    if periodic and links is not None:
        raise AssemblyError("periodic wrap supports only the flux-off operator")
    if links is not None:
        if links.phase_x.shape != (nx - 1, ny) or links.phase_y.shape != (nx, ny - 1):
            raise AssemblyError(
                f"link arrays {links.phase_x.shape}/{links.phase_y.shape} do not "
                f"match the {nx} x {ny} grid"
            )
        ux = links.phase_x.ravel()
        uy = links.phase_y.ravel()
    else:
        ux = np.ones((nx - 1) * ny)
        uy = np.ones(nx * (ny - 1))

    m_x, m_y = hop_matrices(params.r_wilson)
    rows, cols, vals = [], [], []

    ix, iy = np.meshgrid(np.arange(nx - 1), np.arange(ny), indexing="ij")
    tail = (ix * ny + iy).ravel()
    head = ((ix + 1) * ny + iy).ravel()
    r, c, v = _hop_block(head, tail, m_x, ux)
    rows += r
    cols += c
    vals += v

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="ij")
    tail = (ix * ny + iy).ravel()
    head = (ix * ny + iy + 1).ravel()
    r, c, v = _hop_block(head, tail, m_y, uy)
    rows += r
    cols += c
    vals += v

    if periodic:
        iy = np.arange(ny)
        r, c, v = _hop_block(0 * iy + iy, (nx - 1) * ny + iy, m_x, np.ones(ny))
        rows += r
        cols += c
        vals += v
        ix = np.arange(nx)
        r, c, v = _hop_block(ix * ny, ix * ny + (ny - 1), m_y, np.ones(nx))
        rows += r
        cols += c
        vals += v

    hops = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * n_sites, 2 * n_sites),
    ).tocsr()
    onsite = mass_map.ravel() + 2.0 * params.r_wilson
    diag = np.empty(2 * n_sites)
    diag[0::2] = -onsite
    diag[1::2] = onsite
    h = hops + hops.conj().T + diags(diag).tocsr()
    meta = {"backend": "lattice", "nx": nx, "ny": ny, "periodic": periodic}
    if links is not None:
        meta.update(t=links.t, t_eff=links.t_eff)
    return HermitianOperator(matrix=csr_matrix(h), metadata=meta)


def windowed_eigensolve(
    op: HermitianOperator,
    lam: float,
    params: LatticeParams,
    seed_offset: int = 0,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Eigenpairs covering at least the band |lambda| <= lam (lattice units).

    Returns (w, v, complete): dense full diagonalization below dense_cutoff
    (complete=True), otherwise shift-invert Lanczos around zero, doubling the
    subspace until the raw band reaches past lam (complete=False).  The LU
    factorization is computed once and reused across doublings.
    """
    n = op.n
    if n <= params.dense_cutoff:
        w, v = np.linalg.eigh(op.dense())
        return w, v, True

    h = op.matrix.tocsc()
    try:
        lu = splu(h)
    except RuntimeError:
        # exactly singular at this parameter: nudge the factor only
        lu = splu((h + 1e-10 * identity(n, format="csc")).tocsc())
    op_inv = LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    rng = np.random.default_rng(params.seed + n + seed_offset)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    k = min(params.k_init, n - 2)
    while True:
        w, v = eigsh(h, k=k, sigma=0.0, which="LM", OPinv=op_inv, v0=v0)
        if np.abs(w).max() >= 1.05 * lam or k >= n - 2:
            break
        k = min(2 * k, n - 2)
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order], False


def interior_weights(vectors: np.ndarray, mask: GridMask) -> np.ndarray:
    """Fraction of each column's norm carried by domain-interior cells."""
    interior = (mask.tags == TAG_INTERIOR).ravel()
    dens = np.abs(vectors) ** 2
    site_dens = dens[0::2, :] + dens[1::2, :]
    num = interior @ site_dens
    return num / site_dens.sum(axis=0)


def mass_signs_for_domain(d: DomainSpec, kappa: int) -> tuple[int, ...]:
    """Wall mass sign per region, ordered [outside-outer, hole 1, ...].

    kappa is the calibration constant: wall sign = kappa * b_sign.  The map
    is an involution, so the same kappa converts wall signs back to B signs.
    """
    if kappa not in (-1, 1):
        raise CalibrationError(f"kappa must be +1 or -1, got {kappa}")
    return tuple(kappa * sign for sign, _ in d.b_data)


def mass_map_for_domain(
    d: DomainSpec, mask: GridMask, params: LatticeParams, mass_signs
) -> np.ndarray:
    """Per-cell mass: 0 in the interior, signed m_wall in each wall region."""
    if len(mass_signs) != d.m:
        raise AssemblyError(
            f"need one wall sign per region ({d.m}), got {len(mass_signs)}"
        )
    mass = np.zeros(mask.tags.shape)
    mass[mask.tags == TAG_EXTERIOR] = mass_signs[0] * params.m_wall
    for k in range(1, d.m):
        mass[mask.tags == k] = mass_signs[k] * params.m_wall
    return mass


def lattice_spectrum(
    d: DomainSpec,
    g: GaugeSpec,
    params: LatticeParams,
    t: float,
    lam: float,
    cells_per_diameter: int | None = None,
    *,
    h: float | None = None,
    mass_signs=None,
    kappa: int | None = None,
    mask: GridMask | None = None,
    mass_map: np.ndarray | None = None,
    seed_offset: int = 0,
) -> SpectrumSample:
    """Windowed spectrum of the domain-wall operator at parameter t.

    lam and the returned eigenvalues are in physical units (lattice values
    divided by the spacing).  Eigenvectors with less than weight_threshold of
    their norm on interior cells (wall and box-edge artifacts) are dropped;
    the filter is gauge-invariant, so the flux endpoints stay isospectral.
    count_below is exact on the dense path and None on the Lanczos path.
    """
    if (cells_per_diameter is None) == (h is None):
        raise ResolutionError("give exactly one of cells_per_diameter or h")
    if h is None:
        h = 2.0 * d.outer_radius / cells_per_diameter
    lam_lat = lam * h
    if lam_lat > params.window_lat:
        raise ResolutionError(
            f"window {lam} at spacing {h:.6g} needs {lam_lat:.4g} lattice units, "
            f"above the wall-safe cap {params.window_lat}; refine the grid"
        )
    if mask is None:
        mask = rasterize(d, h, params.margin_cells)
    if mass_map is None:
        if mass_signs is None:
            if kappa is None:
                kappa = wall_sign_calibration(params)
            mass_signs = mass_signs_for_domain(d, kappa)
        mass_map = mass_map_for_domain(d, mask, params, mass_signs)

    links = link_phases(g, d, mask, t)
    op = assemble_hamiltonian(mass_map, params, links=links)
    w, v, complete = windowed_eigensolve(op, lam_lat, params, seed_offset=seed_offset)
    weights = interior_weights(v, mask)
    kept = weights >= params.weight_threshold
    w_kept = w[kept]
    inside = np.abs(w_kept) <= lam_lat
    eigs = np.sort(w_kept[inside]) / h
    count_below = int(np.count_nonzero(w_kept < -lam_lat)) if complete else None
    in_w = weights[kept][inside]
    out_w = weights[(~kept) & (np.abs(w) <= lam_lat)]
    return SpectrumSample(
        t=float(t),
        eigenvalues=eigs,
        count_below=count_below,
        metadata=dict(
            backend="lattice",
            h=h,
            t=float(t),
            t_eff=links.t_eff,
            window=float(lam),
            window_lat=lam_lat,
            dim=op.n,
            complete=complete,
            n_dropped_in_window=int(out_w.size),
            kept_weight_min=float(in_w.min()) if in_w.size else None,
            dropped_weight_max=float(out_w.max()) if out_w.size else None,
            mass_signs=tuple(int(s) for s in mass_signs) if mass_signs else None,
        ),
    )


def _six_smallest(values: np.ndarray) -> np.ndarray:
    if values.size < 6:
        raise CalibrationError(
            f"need at least 6 window eigenvalues for calibration, got {values.size}"
        )
    picked = values[np.argsort(np.abs(values), kind="stable")[:6]]
    return np.sort(picked)


_CALIBRATION_CACHE: dict = {}


def wall_sign_calibration(
    params: LatticeParams | None = None,
    *,
    r_inner: float = 0.25,
    r_outer: float = 1.25,
    cells_per_diameter: int = 64,
    t_cal: float = 0.2,
    radial_n: int = 256,
    lam: float = 5.0,
) -> int:
    """Measure which wall mass sign realizes which B sign.  Returns kappa.

    Protocol: on a reference annulus at a generic flux value, solve the
    separable backend for all four (B_in, B_out) sign patterns and the
    lattice for all four (inner, outer) wall-sign patterns, for windings
    +1 and -1.  kappa = +1 matches wall pattern s to B pattern s; kappa = -1
    to -s.  The fit must be decisive (4x smaller squared error than the
    alternative) and consistent across windings, else CalibrationError.
    The result is cached per parameter set for the process lifetime.
    """
    from . import radial

    params = params if params is not None else LatticeParams()
    key = (params, r_inner, r_outer, cells_per_diameter, t_cal, radial_n, lam)
    if key in _CALIBRATION_CACHE:
        return _CALIBRATION_CACHE[key]
    if cells_per_diameter < MIN_CALIBRATION_CELLS:
        raise ResolutionError(
            f"calibration needs >= {MIN_CALIBRATION_CELLS} cells per diameter"
        )

    sse = {1: 0.0, -1: 0.0}
    sse_by_w: dict = {}
    for w in (1, -1):
        g = GaugeSpec(windings=(w,))
        # channel range widened beyond the default so a 'lam' this large
        # still clears the truncation guard
        j_range = radial.default_j_range(w, 2.2 * lam, r_outer)
        refs = {}
        for s_in in (1, -1):
            for s_out in (1, -1):
                dom = build_annulus(r_inner, r_outer, float(s_in), float(s_out))
                sample = radial.assemble_annulus_spectrum(
                    dom, g, t_cal, j_range=j_range, N=radial_n, lam=lam
                )
                refs[(s_in, s_out)] = _six_smallest(sample.eigenvalues)
        sse_w = {1: 0.0, -1: 0.0}
        geom = build_annulus(r_inner, r_outer, 1.0, 1.0)
        for wall_in in (1, -1):
            for wall_out in (1, -1):
                sample = lattice_spectrum(
                    geom,
                    g,
                    params,
                    t_cal,
                    lam,
                    cells_per_diameter,
                    mass_signs=(wall_out, wall_in),
                )
                vals = _six_smallest(sample.eigenvalues)
                for kappa in (1, -1):
                    err = float(
                        np.sum((vals - refs[(kappa * wall_in, kappa * wall_out)]) ** 2)
                    )
                    sse[kappa] += err
                    sse_w[kappa] += err
        sse_by_w[w] = sse_w

    kappa_star = 1 if sse[1] <= sse[-1] else -1
    if not sse[kappa_star] < 0.25 * sse[-kappa_star]:
        raise CalibrationError(
            f"wall-sign fit not decisive: sse(+1)={sse[1]:.4g}, sse(-1)={sse[-1]:.4g}"
        )
    for w, sse_w in sse_by_w.items():
        if (1 if sse_w[1] <= sse_w[-1] else -1) != kappa_star:
            raise CalibrationError(
                f"wall-sign fit disagrees between windings: {sse_by_w}"
            )
    _CALIBRATION_CACHE[key] = kappa_star
    return kappa_star


def lipschitz_hint(d: DomainSpec, g: GaugeSpec) -> float:
    """Coarse bound on window-eigenvalue speed for the lattice family.

    The flux derivative is the gauge potential term; its magnitude on the
    domain is at most sum_k |w_k| / dist(x, c_k) <= sum |w_k| / min r_k over
    fluxed holes.  Factor 2 headroom for wall-tail effects.  Measured slopes
    (taken per interval by the certification) dominate this static hint.
    """
    fluxed = [
        d.holes[k][1] for k in range(len(d.holes)) if g.windings[k] != 0
    ]
    if not fluxed:
        return 0.0
    total = sum(abs(w) for w in g.windings)
    return 2.0 * g.slope_bound() * total / min(fluxed)


def make_sampler(
    d: DomainSpec,
    g: GaugeSpec,
    params: LatticeParams,
    *,
    cells_per_diameter: int,
    lam: float,
    calibration: int | None = None,
    seed: int = 0,
):
    """Callable t -> SpectrumSample with grid, wall signs, and mass frozen.

    Rasterization and calibration happen once here, not per sample, so a
    flow run's samples all share one grid and one wall-sign assignment.
    """
    h = 2.0 * d.outer_radius / cells_per_diameter
    lam_lat = lam * h
    if lam_lat > params.window_lat:
        raise ResolutionError(
            f"window {lam} at {cells_per_diameter} cells/diameter needs "
            f"{lam_lat:.4g} lattice units, above the cap {params.window_lat}"
        )
    mask = rasterize(d, h, params.margin_cells)
    kappa = calibration if calibration is not None else wall_sign_calibration(params)
    mass_signs = mass_signs_for_domain(d, kappa)
    mass_map = mass_map_for_domain(d, mask, params, mass_signs)
    eff_params = params if seed == 0 else replace(params, seed=params.seed + seed)

    def sampler(t: float) -> SpectrumSample:
        return lattice_spectrum(
            d,
            g,
            eff_params,
            t,
            lam,
            h=h,
            mass_signs=mass_signs,
            mask=mask,
            mass_map=mass_map,
        )

    return sampler
