"""Numeric tolerances and thresholds, kept in one place so runs are auditable."""
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # root solving
    residual: float = 1e-10          # chordal distance f(root) <-> target
    cluster: float = 1e-6            # chordal distance for merging roots
    near_critical: float = 1e-8      # target this close to a critical value relaxes residual by d
    newton_steps: int = 8
    solver: str = "auto"             # "companion", "aberth" or "auto"
    aberth_min_degree: int = 8
    atom_cap: int = 2_000_000
    # map certificates and Green function
    resultant: float = 1e-12
    sphere_samples: int = 16384
    sphere_threshold: float = 1e-8
    safety_factor: float = 2.0
    green_tail: float = 1e-10
    # rates and verdicts
    error_floor: float = 1e-14
    exact: float = 1e-9
    rate_threshold: float = 1.5
    r_squared: float = 0.9
    scan_depth: int = 6
    count_tolerance: float = 0.1
    boundary_shell: float = 0.005
    boundary_fraction: float = 0.05
    survival: float = 0.9
    pole_distance: float = 1e-6
    grid_pole_distance: float = 1e-3

    def updated(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return {f.name for f in fields(cls)}


DEFAULT = Tolerances()
