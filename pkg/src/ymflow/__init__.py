"""SU(2) Yang-Mills gradient flow on the periodic 4D lattice."""

from .lattice import LatticeGeometry, LinkField, GaugeField
from .forms import AdjForm
from .flow import FlowParams, FlowState, Trajectory, run_flow
from .observables import ObservableSample, measure
from .seeds import SeedSpec
from .spectral import SpectralResult, poincare_estimate

__all__ = [
    "AdjForm",
    "FlowParams",
    "FlowState",
    "GaugeField",
    "LatticeGeometry",
    "LinkField",
    "ObservableSample",
    "SeedSpec",
    "SpectralResult",
    "Trajectory",
    "measure",
    "poincare_estimate",
    "run_flow",
]
__version__ = "0.1.0"
