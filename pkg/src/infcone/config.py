"""Run configuration shared by all sampling-based computations.

Every stochastic routine derives its generator from (seed, structural
labels) so results are independent of scheduling and worker count.
"""

import dataclasses
import json
import zlib

import numpy as np


@dataclasses.dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    shells: int = 10
    samples_per_shell: int = 2000
    radius_start: float = 10.0
    radius_factor: float = 2.0
    rho_start: float = 0.5
    rho_factor: float = 0.6
    delta_start: float = 0.5
    delta_factor: float = 0.5
    ang_tol: float = 0.01
    eq_tol: float = 1e-9
    persistence_window: int = 3
    # direction-grid sizes per ambient dimension
    grid_2d: int = 3600
    grid_3d: int = 20000
    grid_4d: int = 40000
    # sampling / projection budgets
    max_rounds: int = 40
    projection_starts: int = 8
    probes_per_level: int = 200
    threads: int = 1

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def radius(self, j):
        return self.radius_start * self.radius_factor ** j

    def rho(self, j):
        return self.rho_start * self.rho_factor ** j

    def delta(self, j):
        return self.delta_start * self.delta_factor ** j

    def rng(self, *labels):
        """Deterministic generator keyed by the master seed and labels.

        Labels are structural (shell index, piece index, purpose string),
        never derived from timing or thread identity.
        """
        key = [int(self.seed) & 0xFFFFFFFF]
        for lab in labels:
            key.append(zlib.crc32(str(lab).encode("utf-8")))
        return np.random.default_rng(np.random.SeedSequence(key))

    def to_json(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d):
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in fields})

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)
