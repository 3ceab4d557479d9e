__version__ = "0.1.0"

from .classmap import PhaseState, Trajectory, iterate, poincareSection, step
from .ensemble import EnsembleConfig, asymmetrySweep, evolveEnsemble, sampleInitial
from .pulses import KickProfile, PulseShape, deltaProfile, keffGeneral, keffSquare, squareProfile
from .quantum import QuantumConfig, WaveState, runQuantum
from .units import PhysicalParams, ScaledParams, scaleParams
