"""Spectral flow of flux families of planar Dirac operators.

A numerical laboratory for families of self-adjoint massless Dirac operators
on multiply-connected planar domains with sign-split local boundary
conditions, driven by one unit of solenoid flux through each hole.  The
package measures the spectral flow of the family two independent ways (a
certified level ladder and an eigenvalue crossing tracker, over either of two
independent discretizations) and checks it against the closed-form
topological prediction: the winding of the flux phase along the boundary
components with positive boundary constant.  A third route discretizes the
flux loop as a clutched space-time operator on the parameter torus and reads
the same integer off its Fredholm index.
"""

from .config import ExperimentConfig, parse_config, parse_config_text, serialize
from .domain import (
    BoundaryComponent,
    DomainSpec,
    GridMask,
    boundary_components,
    build_annulus,
    build_disk_with_holes,
    check_admissibility,
    rasterize,
)
from .eigen import HermitianOperator, SpectrumSample, eigh, spectrum_window
from .errors import (
    ChannelTruncationError,
    ConfigError,
    DiracflowError,
    InconclusiveError,
    LadderError,
    RefinementRequest,
    ResolutionError,
    SizeError,
)
from .flow import (
    FlowResult,
    GammaLadder,
    build_ladder,
    run_flow,
    run_flow_adaptive,
    spectral_flow,
    track_crossings,
)
from .gauge import GaugeSpec, link_phases, mu_eval, predicted_sf, winding_number
from .harness import ExperimentReport, RunRow, audit_report, run_experiment
from .lattice import (
    LatticeParams,
    assemble_hamiltonian,
    lattice_spectrum,
    wall_sign_calibration,
)
from .radial import ChannelSpec, assemble_annulus_spectrum, channel_operator
from .torus import TorusOperator, assemble_torus, index_count

__version__ = "0.1.0"

__all__ = [
    "BoundaryComponent",
    "ChannelSpec",
    "ChannelTruncationError",
    "ConfigError",
    "DiracflowError",
    "DomainSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "FlowResult",
    "GammaLadder",
    "GaugeSpec",
    "GridMask",
    "HermitianOperator",
    "InconclusiveError",
    "LadderError",
    "LatticeParams",
    "RefinementRequest",
    "ResolutionError",
    "RunRow",
    "SizeError",
    "SpectrumSample",
    "TorusOperator",
    "assemble_annulus_spectrum",
    "assemble_hamiltonian",
    "assemble_torus",
    "audit_report",
    "boundary_components",
    "build_annulus",
    "build_disk_with_holes",
    "build_ladder",
    "channel_operator",
    "check_admissibility",
    "eigh",
    "index_count",
    "lattice_spectrum",
    "link_phases",
    "mu_eval",
    "parse_config",
    "parse_config_text",
    "predicted_sf",
    "rasterize",
    "run_experiment",
    "run_flow",
    "run_flow_adaptive",
    "serialize",
    "spectral_flow",
    "spectrum_window",
    "track_crossings",
    "wall_sign_calibration",
    "winding_number",
]
