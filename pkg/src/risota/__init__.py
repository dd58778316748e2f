"""RIS-assisted over-the-air federated learning simulator."""

from .channel import Geometry, PathLossConfig, PhaseVector
from .estimator import RisFedClassifier

__all__ = ["Geometry", "PathLossConfig", "PhaseVector", "RisFedClassifier"]
__version__ = "0.1.0"
