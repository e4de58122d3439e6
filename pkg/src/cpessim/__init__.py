"""cpessim: co-simulation toolkit for cyber-physical energy system security studies."""

__version__ = "0.1.0"

from . import risk  # noqa: F401  (submodule; risk.risk() is the scoring entry point)
from .risk import (CPES_PRIORITIES, Impact, ImpactVector, ObjectiveId,  # noqa: F401
                   PrioritySet, RiskReport, ThreatProbability, damage, pool_rank)
from .threat_model import (AdversaryModel, AttackModel, ThreatModel,  # noqa: F401
                           preset, validate)
