"""Per-iteration records shared by all solvers."""

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TraceEntry:
    iteration: int
    loglik: float
    step: float
    feasibility: float
    time: float  # seconds since the solver started


class SolverTrace:
    """Iteration log: entry 0 is the initial point, entry t the t-th iterate."""

    def __init__(self, layout, keep_iterates=False):
        self.layout = layout
        self.entries = []
        self.iterates = [] if keep_iterates else None
        self._t0 = time.perf_counter()

    def record(self, x, loglik, step=0.0):
        self.entries.append(
            TraceEntry(
                iteration=len(self.entries),
                loglik=float(loglik),
                step=float(step),
                feasibility=self.layout.constraint_residual(x),
                time=time.perf_counter() - self._t0,
            )
        )
        if self.iterates is not None:
            self.iterates.append(np.array(x, copy=True))

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def loglik(self):
        return np.array([e.loglik for e in self.entries])

    @property
    def feasibility(self):
        return np.array([e.feasibility for e in self.entries])

    @property
    def elapsed(self):
        return self.entries[-1].time if self.entries else 0.0


@dataclass
class FitResult:
    """Outcome of one solver run."""

    method: str
    params: object
    trace: SolverTrace
    converged: bool
    iterations: int
    message: str = ""
    hessian: np.ndarray = None  # approximation of the Hessian of -L, if any
    info: dict = field(default_factory=dict)

    @property
    def loglik(self):
        return self.trace.entries[-1].loglik
