"""Articulated 3D scene graph: voxel geometric layer + object layer.

Submodules:

* model: node/edge/event containers and the graph state machine
* integrate: static / discovery / update observation integration
* query: state propagation, final geometry, and retrieval planning
* io: JSON export/import of the graph
"""

from .integrate import integrate_discovery, integrate_static, integrate_update
from .io import export_graph, import_graph
from .model import (
    ARTICULATED_PART,
    STATIC_OBJECT,
    EventMap,
    ObjectNode,
    RelationEdge,
    SceneGraph,
)
from .query import RetrievalPlan, finalize_geometry, propagate_state, query_retrieval

__all__ = [
    "ARTICULATED_PART",
    "STATIC_OBJECT",
    "EventMap",
    "ObjectNode",
    "RelationEdge",
    "RetrievalPlan",
    "SceneGraph",
    "export_graph",
    "finalize_geometry",
    "import_graph",
    "integrate_discovery",
    "integrate_static",
    "integrate_update",
    "propagate_state",
    "query_retrieval",
]
