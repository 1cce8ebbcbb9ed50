"""Space-time index of the flux loop as a clutched operator on the torus.

The loop t -> H(t) with the integer-flux endpoint identification
H(1) = G H(0) G* defines a first-order operator d/dt + H(t) acting on
sections over the parameter circle, twisted by the clutching map G at the
seam.  Its Fredholm index (dim ker - dim coker) is computed here from the
small singular triplets of a cyclic finite-difference discretization.

The discrete operator is always square, so raw kernel counting would give
zero identically: every small singular value sigma contributes BOTH a right
vector v (L v = sigma u) and a left vector u (L* u = sigma v).  Exactly one
of the pair converges to a continuum object (a kernel section of d/dt + H or
of its adjoint); the other is a scheme artifact (it converges to the profile
of the stencil's own truncation error, so no smoothness or locality test can
separate the two).  What does separate them: a genuine continuum section is
approximately annihilated by EVERY consistent discretization, while the
artifact is specific to the stencil that produced it.  Each below-gap
triplet is therefore re-tested against an independently assembled
counter-scheme operator C (the other time stencil): ||C v|| small and
||C* u|| order-one votes kernel (+1), the reverse votes cokernel (-1), and
the index is the signed count.  The classification must be decisive for
every below-gap triplet, and the singular-value gap itself decisive, else
InconclusiveError.

Spatial backend: the separable annulus channels (the only backend where the
clutching map is exact: integer flux relabels channels j -> j + w, so G is a
cyclic block shift).  The midpoint (trapezoidal) time stencil keeps the
near-kernel singular values at O(dt^2), well below the O(1) floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import bmat, csr_matrix, identity, kron
from scipy.sparse.linalg import eigsh

from .domain import DomainSpec
from .errors import InconclusiveError, InvalidGeometryError, SizeError
from .gauge import GaugeSpec
from .radial import ChannelSpec, _annulus_b_values, channel_operator, default_j_range

SCHEMES = ("midpoint", "forward")


@dataclass(frozen=True)
class TorusOperator:
    """Discretized clutched operator d/dt + H(t) on the parameter circle.

    matrix is (n_t * n_space) square, complex, with global index
    i_time * n_space + i_space.
    """

    matrix: csr_matrix = field(repr=False)
    n_space: int
    n_t: int
    dt: float
    scheme: str
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.n_t * self.n_space


@dataclass(frozen=True)
class TorusIndexResult:
    index: int
    kernel_dim: int
    sigmas: np.ndarray
    gap_ratio: float
    attributions: tuple


def build_space_time_operator(
    blocks: list, clutch, dt: float, scheme: str = "midpoint"
) -> csr_matrix:
    """Cyclic time discretization of d/dt + H(t) with a seam twist.

    blocks[i] is the spatial matrix the stencil needs on time row i: H at the
    interval midpoint (i + 1/2) dt for "midpoint", H at i dt for "forward".
    clutch multiplies the wrap-around block (row n_t - 1 -> column 0).

      midpoint: (Lu)_i = (u_{i+1} - u_i)/dt + H_{i+1/2} (u_{i+1} + u_i)/2
      forward:  (Lu)_i = (u_{i+1} - u_i)/dt + H_i u_i

    with u_{n_t} = clutch u_0.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    n_t = len(blocks)
    if n_t < 2:
        raise ValueError("need at least 2 time rows")
    n = blocks[0].shape[0]
    eye = identity(n, format="csr", dtype=complex)
    clutch = csr_matrix(clutch, dtype=complex)
    grid = [[None] * n_t for _ in range(n_t)]
    for i in range(n_t):
        b = csr_matrix(blocks[i], dtype=complex)
        if scheme == "midpoint":
            diag = -eye / dt + 0.5 * b
            off = eye / dt + 0.5 * b
        else:
            diag = b - eye / dt
            off = eye / dt
        j = (i + 1) % n_t
        if j == 0:
            off = (off @ clutch).tocsr()
        grid[i][i] = diag
        grid[i][j] = off
    return bmat(grid, format="csr")


def _contiguous(j_list: list[int]) -> bool:
    return all(b - a == 1 for a, b in zip(j_list[:-1], j_list[1:]))


def channel_shift_clutch(j_list: list[int], w: int, block_dim: int) -> csr_matrix:
    """Block permutation sending channel j's block to channel j - w's slot.

    Integer flux relabels channels j -> j - w exactly; on a finite contiguous
    list the shift wraps cyclically.  The wrapped edge channels sit far
    outside the spectral window, so the seam mismatch there cannot create
    spurious small singular values (their spatial blocks are uniformly
    invertible)."""
    n_ch = len(j_list)
    j_min = j_list[0]
    perm = np.zeros((n_ch, n_ch))
    for p, j in enumerate(j_list):
        q = (j - w - j_min) % n_ch
        perm[p, q] = 1.0
    return kron(csr_matrix(perm), identity(block_dim, format="csr")).tocsr()


def assemble_torus(
    d: DomainSpec,
    g: GaugeSpec,
    *,
    n_t: int = 24,
    N: int = 48,
    lam: float = 1.5,
    j_range=None,
    scheme: str = "midpoint",
    cap: int = 20000,
    twist: bool = True,
    reverse: bool = False,
) -> TorusOperator:
    """Clutched space-time operator for the annulus flux loop.

    Spatial slices are direct sums of radial channel operators over a
    contiguous channel list; the clutch is the cyclic channel shift by the
    winding.  reverse=True builds the orientation-reversed loop (time run
    backwards, clutch inverted), whose index is minus the original.
    twist=False replaces the clutch by the identity (diagnostic: the
    identification is then wrong and kernel structure changes).

    cap bounds the total dimension n_t * n_space; larger runs must opt in
    explicitly by raising it.
    """
    b_in, b_out = _annulus_b_values(d)
    r_inner = d.holes[0][1]
    r_outer = d.outer_radius
    w = g.windings[0]
    if w == 0 and twist:
        raise InvalidGeometryError("flux loop needs a nonzero winding")
    j_list = list(j_range) if j_range is not None else list(
        default_j_range(w, lam, r_outer)
    )
    if not _contiguous(j_list):
        raise InvalidGeometryError("channel list must be contiguous")
    if abs(w) >= len(j_list):
        raise InvalidGeometryError(
            f"need more than |w| = {abs(w)} channels, got {len(j_list)}"
        )
    block_dim = 2 * N + 2
    n_space = block_dim * len(j_list)
    if n_t * n_space > cap:
        raise SizeError(
            f"torus dimension n_t * n_space = {n_t * n_space} exceeds cap = {cap}; "
            "pass a larger cap explicitly to opt in"
        )

    def spatial(t: float) -> csr_matrix:
        t_eff = g.s(t)
        mats = [
            channel_operator(
                ChannelSpec(j=j, t=t_eff, w=w, N=N, r_inner=r_inner, r_outer=r_outer),
                b_in,
                b_out,
            ).matrix
            for j in j_list
        ]
        rows = []
        for p, m in enumerate(mats):
            row = [None] * len(mats)
            row[p] = csr_matrix(m)
            rows.append(row)
        return bmat(rows, format="csr")

    dt = 1.0 / n_t
    if scheme == "midpoint":
        times = [(i + 0.5) * dt for i in range(n_t)]
    else:
        times = [i * dt for i in range(n_t)]
    if reverse:
        times = [1.0 - t for t in times]
    blocks = [spatial(t) for t in times]

    clutch = (
        channel_shift_clutch(j_list, w, block_dim)
        if twist
        else identity(n_space, format="csr", dtype=complex)
    )
    if reverse:
        clutch = clutch.conj().T.tocsr()
    matrix = build_space_time_operator(blocks, clutch, dt, scheme)
    return TorusOperator(
        matrix=matrix,
        n_space=n_space,
        n_t=n_t,
        dt=dt,
        scheme=scheme,
        metadata=dict(
            channels=(j_list[0], j_list[-1]),
            w=w,
            N=N,
            n_t=n_t,
            b_in=b_in,
            b_out=b_out,
            twist=twist,
            reverse=reverse,
            window=lam,
        ),
    )


def fitting_channel_range(
    d: DomainSpec,
    g: GaugeSpec,
    *,
    N: int,
    n_t: int,
    cap: int,
    lam: float = 1.5,
) -> range:
    """Largest contiguous channel range that fits the size cap.

    The range is centered on the channels whose coupling a = j + 1/2 - t w
    crosses zero for t in [0, 1] (these carry the spectral action); the edge
    channels must stay clear of the window at every flux, so the cyclic wrap
    seam acts only on uniformly invertible blocks.
    """
    b_in, b_out = _annulus_b_values(d)
    r_inner = d.holes[0][1]
    r_outer = d.outer_radius
    w = g.windings[0]
    full = list(default_j_range(w, lam, r_outer))
    n_max = cap // ((2 * N + 2) * n_t)
    lo_cross, hi_cross = min(0, w), max(-1, w - 1)
    n_need = (hi_cross - lo_cross + 1) + 4
    if n_max < n_need:
        raise SizeError(
            f"cap {cap} admits only {n_max} channels at N={N}, n_t={n_t}; "
            f"need {n_need}; raise the cap explicitly"
        )
    n_ch = min(len(full), n_max)
    center = (lo_cross + hi_cross) // 2
    lo = center - n_ch // 2
    lo = min(lo, lo_cross - 2)
    hi = lo + n_ch - 1
    if hi < hi_cross + 2:
        hi = hi_cross + 2
        lo = hi - n_ch + 1
    for j_edge in (lo, hi):
        worst = min(
            np.abs(
                np.linalg.eigvalsh(
                    channel_operator(
                        ChannelSpec(
                            j=j_edge, t=g.s(t), w=w, N=N,
                            r_inner=r_inner, r_outer=r_outer,
                        ),
                        b_in,
                        b_out,
                    ).matrix
                )
            ).min()
            for t in (0.0, 0.5, 1.0)
        )
        if worst <= 1.1 * lam:
            raise SizeError(
                f"edge channel j={j_edge} reaches |lambda| = {worst:.3g}, too close "
                f"to the window {lam}; raise the cap so the range can widen"
            )
    return range(lo, hi + 1)


def temporal_smoothness(x: np.ndarray, n_t: int, n_space: int, cut: int | None = None) -> float:
    """Fraction of a space-time vector's energy in low temporal frequencies."""
    grid = np.asarray(x).reshape(n_t, n_space)
    spect = np.fft.fft(grid, axis=0)
    power = np.sum(np.abs(spect) ** 2, axis=1)
    if power.sum() == 0:
        return 0.0
    if cut is None:
        cut = max(1, n_t // 8)
    freqs = np.rint(np.fft.fftfreq(n_t, d=1.0 / n_t)).astype(int)
    return float(power[np.abs(freqs) <= cut].sum() / power.sum())


def _small_triplets(top: TorusOperator, k: int, dense_cutoff: int):
    """k smallest singular triplets (sigma, u, v) of the space-time matrix."""
    m = top.dim
    if m <= dense_cutoff:
        u_full, s_full, vh_full = np.linalg.svd(top.matrix.toarray())
        order = np.argsort(s_full)[:k]
        sig = s_full[order]
        u = u_full[:, order]
        v = vh_full[order, :].conj().T
        return sig, u, v
    aug = bmat(
        [[None, top.matrix], [top.matrix.conj().T, None]], format="csr"
    )
    try:
        vals, vecs = eigsh(aug, k=2 * k, sigma=0.0, which="LM")
    except RuntimeError:
        vals, vecs = eigsh(aug, k=2 * k, sigma=1e-9, which="LM")
    pos = vals > 0
    vals, vecs = vals[pos], vecs[:, pos]
    order = np.argsort(vals)[:k]
    vals, vecs = vals[order], vecs[:, order]
    u = vecs[:m, :]
    v = vecs[m:, :]
    u /= np.linalg.norm(u, axis=0, keepdims=True)
    v /= np.linalg.norm(v, axis=0, keepdims=True)
    return vals, u, v


def index_count(
    top: TorusOperator,
    k_probe: int = 8,
    *,
    counter: TorusOperator | None = None,
    svd_gap_factor: float = 50.0,
    rel_floor: float = 0.05,
    residual_margin: float = 5.0,
    dense_cutoff: int = 3000,
) -> TorusIndexResult:
    """Index of the clutched operator from its small singular triplets.

    Kernel size: the largest jump sigma_{k+1}/sigma_k at least svd_gap_factor
    marks k below-gap triplets; if no jump qualifies but sigma_1 is already
    at the scale of the probe's top (rel_floor), the kernel is empty.  Every
    below-gap triplet (sigma, u, v) is then attributed against the
    counter-scheme operator C (same family, the other time stencil): the
    residuals rho_v = ||C v|| and rho_u = ||C* u|| measure how far each
    vector is from a continuum kernel/cokernel section, since a genuine
    section is approximately annihilated by every consistent discretization
    while its partner is a stencil artifact.  rho_u > residual_margin * rho_v
    votes +1 (kernel direction), the reverse votes -1 (cokernel); any
    undecided vote raises InconclusiveError carrying both residuals.
    counter may be omitted only when the kernel turns out empty.
    """
    sig, u, v = _small_triplets(top, k_probe, dense_cutoff)
    if sig.size < 3:
        raise InconclusiveError("singular-value probe too small", profile=sig)
    ratios = sig[1:] / np.maximum(sig[:-1], 1e-300)
    k_star = int(np.argmax(ratios))  # jump between sig[k_star] and sig[k_star+1]
    best = float(ratios[k_star])
    if best >= svd_gap_factor:
        kernel_dim = k_star + 1
        gap_ratio = best
    elif sig[0] >= rel_floor * sig[-1]:
        kernel_dim = 0
        gap_ratio = float(sig[0] / sig[-1])
    else:
        raise InconclusiveError(
            "no decisive singular-value gap", profile=sig,
            diagnostics={"best_ratio": best, "floor": float(sig[0] / sig[-1])},
        )

    if kernel_dim > 0:
        if counter is None:
            raise ValueError(
                "below-gap triplets need the counter-scheme operator for "
                "attribution; assemble the family with the other scheme and "
                "pass it as counter"
            )
        if counter.dim != top.dim or counter.scheme == top.scheme:
            raise ValueError(
                "counter must discretize the same family with the other scheme"
            )
    attributions = []
    index = 0
    for i in range(kernel_dim):
        rho_v = float(np.linalg.norm(counter.matrix @ v[:, i]))
        rho_u = float(np.linalg.norm(counter.matrix.conj().T @ u[:, i]))
        if rho_u > residual_margin * rho_v:
            vote = 1
        elif rho_v > residual_margin * rho_u:
            vote = -1
        else:
            raise InconclusiveError(
                f"triplet {i} not attributable "
                f"(counter residuals v {rho_v:.3g} vs u {rho_u:.3g})",
                profile=sig,
                diagnostics={"triplet": i, "rho_v": rho_v, "rho_u": rho_u},
            )
        attributions.append((rho_v, rho_u, vote))
        index += vote
    return TorusIndexResult(
        index=index,
        kernel_dim=kernel_dim,
        sigmas=sig,
        gap_ratio=gap_ratio,
        attributions=tuple(attributions),
    )
