"""Cloud -> edges -> vehicles tree."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConsistencyError


@dataclass(frozen=True)
class Edge:
    id: str
    vehicles: tuple[str, ...]


@dataclass(frozen=True)
class Topology:
    edges: tuple[Edge, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.edges:
            raise ConsistencyError("topology needs at least one edge")
        seen: set[str] = set()
        index = {}
        for e in self.edges:
            if not e.vehicles:
                raise ConsistencyError(f"edge {e.id!r} has no vehicles")
            for vid in (e.id, *e.vehicles):
                if vid in seen:
                    raise ConsistencyError(f"duplicate node id {vid!r}")
                seen.add(vid)
            for v in e.vehicles:
                index[v] = e.id
        object.__setattr__(self, "_index", index)

    @classmethod
    def regular(cls, num_edges: int, vehicles_per_edge: int) -> "Topology":
        return cls.from_sizes([vehicles_per_edge] * num_edges)

    @classmethod
    def from_sizes(cls, sizes) -> "Topology":
        return cls(tuple(
            Edge(f"edge{e}", tuple(f"edge{e}/veh{c}" for c in range(k)))
            for e, k in enumerate(sizes)
        ))

    @property
    def vehicle_ids(self) -> list[str]:
        return [v for e in self.edges for v in e.vehicles]

    @property
    def num_vehicles(self) -> int:
        return len(self._index)

    def edge_of(self, vehicle_id: str) -> str:
        return self._index[vehicle_id]

    def to_dict(self) -> dict:
        return {"edges": [{"id": e.id, "vehicles": list(e.vehicles)} for e in self.edges]}
