"""Entity resolution over linked documents: traversal sets, MinHash blocking,
per-bucket R-Swoosh and connected components, in batch or incremental mode."""

from erld.model import AttributeSpec, Document, Entity, SchemaConfig, merge
from erld.pipeline import ERLDConfig, ResolutionState, resolve_batch, resolve_incremental

__all__ = [
    "AttributeSpec",
    "Document",
    "ERLDConfig",
    "Entity",
    "ResolutionState",
    "SchemaConfig",
    "merge",
    "resolve_batch",
    "resolve_incremental",
]
