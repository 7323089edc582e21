"""beestar: a reactive graph blackboard for compositional applications.

Applications are declared as a typed property graph of entities, agents
and widgets; a propagation engine enforces the watches/sets update rules
and drives language-neutral agent processes; a live dashboard renders
the widget entities.
"""

from .engine import ChangeEvent, Interface, Notification, PlayTrigger, WaveReport
from .graph import Builder, Edge, EdgeLabel, Entity, Graph, Property
from .program import diff_programs, export_program, load_program
from .values import Value, ValueType, canonical_dumps

__version__ = "0.1.0"

__all__ = [
    "Builder",
    "ChangeEvent",
    "Edge",
    "EdgeLabel",
    "Entity",
    "Graph",
    "Interface",
    "Notification",
    "PlayTrigger",
    "Property",
    "Value",
    "ValueType",
    "WaveReport",
    "canonical_dumps",
    "diff_programs",
    "export_program",
    "load_program",
    "__version__",
]
