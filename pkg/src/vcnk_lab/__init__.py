"""Exact, oracle-checked computations for k-ary hypothesis classes.

Submodules: ``universe`` (configuration spaces and product measures),
``hypotheses``, ``losses``, ``dimensions`` (Natarajan and VCN_k),
``packing`` (covers and the shattering-to-cover audit), ``pacsim``
(ERM sample complexity and the PAC-to-cover audit), ``partization`` and
``cli``.
"""

__version__ = "0.1.0"

from .hypotheses import Hypothesis, HypothesisClass, PartiteHypothesis
from .losses import LossTable
from .report import AuditReport
from .universe import PartiteProbTemplate, PartiteUniverse, ProbTemplate, Universe

__all__ = [
    "__version__",
    "Universe",
    "PartiteUniverse",
    "ProbTemplate",
    "PartiteProbTemplate",
    "Hypothesis",
    "PartiteHypothesis",
    "HypothesisClass",
    "LossTable",
    "AuditReport",
]
