"""Multi-restart head-to-head experiments and their reports.

Every restart draws one initial point (Dirichlet(1) on each simplex) and hands
the same packed vector to every requested method. Reports written to JSON hold
only quantities that are a pure function of the inputs, so repeating an
experiment with the same base seed reproduces them byte for byte; wall-clock
times go to a separate CSV.
"""

import csv
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .em import EmConfig, fit_em
from .model import CategoryScheme, Dataset, InputError, LcmParams, log_likelihood
from .pqn import PqnConfig, observed_information
from .pqn import fit_pqn
from .simulate import derive_seed, get_bundle, rng_for, sample
from .sqp import SqpConfig, fit_sqp

METHODS = ("em", "sqp", "pqn")
MAX_ALIGN_K = 8


@dataclass
class RunRecord:
    """One solver run from one initial point.

    ``wall_time``, ``hessian`` and ``diagnostics`` stay in memory only; they
    are excluded from equality and from the JSON form.
    """

    method: str
    dataset: str
    seed: int
    init_id: int
    iterations: int
    converged: bool
    loglik: float
    params: LcmParams
    trace: dict  # "loglik", "step", "feasibility" lists, iterate 0 first
    message: str = ""
    wall_time: float = field(default=float("nan"), compare=False)
    trace_time: float = field(default=float("nan"), compare=False)
    hessian: np.ndarray = field(default=None, compare=False, repr=False)
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if len(self.trace["loglik"]) != self.iterations + 1:
            raise ValueError("trace must hold iterations + 1 entries")
        if not math.isfinite(self.loglik):
            raise ValueError("final log-likelihood must be finite")

    def to_dict(self):
        return {
            "method": self.method,
            "dataset": self.dataset,
            "seed": self.seed,
            "init_id": self.init_id,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
            "loglik": self.loglik,
            "params": self.params.to_dict(),
            "trace": self.trace,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            method=obj["method"],
            dataset=obj["dataset"],
            seed=int(obj["seed"]),
            init_id=int(obj["init_id"]),
            iterations=int(obj["iterations"]),
            converged=bool(obj["converged"]),
            loglik=float(obj["loglik"]),
            params=LcmParams.from_dict(obj["params"]),
            trace={k: [float(v) for v in vals] for k, vals in obj["trace"].items()},
            message=obj.get("message", ""),
        )


@dataclass(frozen=True)
class SolverSettings:
    """Per-method configurations used by :func:`run_experiment`."""

    em: EmConfig = EmConfig()
    pqn: PqnConfig = PqnConfig()
    sqp: SqpConfig = SqpConfig()


def _fit(method, data, init, settings, seed):
    if method == "em":
        return fit_em(data, init, settings.em)
    if method == "pqn":
        return fit_pqn(data, init, replace(settings.pqn, seed=seed))
    if method == "sqp":
        return fit_sqp(data, init, settings.sqp)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _diagnostics(res):
    """Solver-specific health counters kept alongside a run."""
    if res.method == "sqp":
        updates = res.info["updates"]
        applied = [u for u in updates if u["applied"]]
        return {
            "updates": len(updates),
            "cholesky_failures": sum(not u["cholesky_ok"] for u in updates),
            # q's >= 0.2 s'Bs up to rounding in the damped update
            "damping_violations": sum(u["qs"] < 0.2 * u["sBs"] * (1 - 1e-12) for u in applied),
        }
    if res.method == "pqn":
        return {"fallbacks": res.info["fallbacks"]}
    return {}


def run_single(method, data, init, dataset_id, seed, init_id, settings=SolverSettings()):
    t0 = time.perf_counter()
    res = _fit(method, data, init, settings, seed)
    wall = time.perf_counter() - t0
    entries = res.trace.entries
    return RunRecord(
        method=method,
        dataset=dataset_id,
        seed=seed,
        init_id=init_id,
        iterations=res.iterations,
        converged=res.converged,
        loglik=res.loglik,
        params=res.params,
        trace={
            "loglik": [e.loglik for e in entries],
            "step": [e.step for e in entries],
            "feasibility": [e.feasibility for e in entries],
        },
        message=res.message,
        wall_time=wall,
        trace_time=res.trace.elapsed,
        hessian=res.hessian,
        diagnostics=_diagnostics(res),
    )


def _run_task(args):
    return run_single(*args)


def initial_point(K, scheme, base_seed, init_id):
    """Shared starting point of restart ``init_id`` and the seed it came from."""
    seed = derive_seed(base_seed, init_id + 1)
    x = scheme.layout(K).random_point(rng_for(seed))
    return seed, LcmParams.unpack(x, K, scheme)


def run_experiment(data, K, methods=METHODS, restarts=10, base_seed=0, *,
                   dataset_id="data", settings=SolverSettings(), jobs=1):
    """Run every method from ``restarts`` shared random starts.

    Records come back ordered by method (in the order given) and then restart.
    Non-convergence is recorded, never raised.
    """
    methods = tuple(methods)
    if not methods:
        raise ValueError("at least one method is required")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    tasks = []
    for r in range(restarts):
        seed, init = initial_point(K, data.scheme, base_seed, r)
        for m in methods:
            tasks.append((m, data, init, dataset_id, seed, r, settings))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]
    order = {m: i for i, m in enumerate(methods)}
    return sorted(records, key=lambda rec: (order[rec.method], rec.init_id))


def run_bundle(bundle_id, methods=METHODS, restarts=10, base_seed=0, **kwargs):
    """Simulate the bundle's dataset from ``base_seed`` and run the experiment."""
    spec = get_bundle(bundle_id)
    data = sample(spec.params, spec.n, base_seed)
    records = run_experiment(
        data, spec.K, methods, restarts, base_seed, dataset_id=spec.id, **kwargs
    )
    return data, records


def best_of(records, method=None):
    """Highest final log-likelihood; ties go to fewer iterations, then lower seed."""
    pool = [r for r in records if method is None or r.method == method]
    if not pool:
        raise ValueError(f"no records for method {method!r}")
    return min(pool, key=lambda r: (-r.loglik, r.iterations, r.seed))


def aligned_rmse(a, b):
    """RMSE between packed parameters after the best relabelling of ``a``'s classes."""
    if a.K != b.K or a.scheme != b.scheme:
        raise InputError("parameter sets differ in K or category scheme")
    if a.K > MAX_ALIGN_K:
        raise ValueError(f"alignment enumerates K! orders; K={a.K} exceeds {MAX_ALIGN_K}")
    target = b.pack()
    best = math.inf
    for order in itertools.permutations(range(a.K)):
        diff = a.permute(order).pack() - target
        best = min(best, float(np.sqrt(np.mean(diff * diff))))
    return best


def confidence_report(record, level=0.95):
    """Rows of (index, estimate, se, lower, upper) from the run's Hessian approximation."""
    if record.hessian is None:
        raise ValueError(
            f"{record.method} run carries no Hessian approximation; use pqn or sqp"
        )
    theta = record.params.pack()
    _, se, lo, hi = observed_information(record.hessian, theta, record.params.layout, level)
    return [
        {"index": i, "estimate": float(theta[i]), "se": float(se[i]),
         "lower": float(lo[i]), "upper": float(hi[i])}
        for i in range(theta.size)
    ]


def parameter_labels(K, scheme):
    """Human-readable names for packed coordinates, e.g. ``eta[0]``, ``pi[1][0][2]``."""
    names = [f"eta[{k}]" for k in range(K)]
    for k in range(K):
        for j, c in enumerate(scheme.c):
            names.extend(f"pi[{k}][{j}][{v}]" for v in range(c))
    return names


def ingest_csv(path, scheme=None, zero_based=False):
    """Read an integer table, one observation per line.

    A first line containing any non-integer cell is taken as a header. Labels
    are 1-based unless ``zero_based`` is set, in which case 1 is added.
    """
    with open(path, newline="") as fh:
        lines = list(csv.reader(fh))
    rows = []
    width = None
    for lineno, cells in enumerate(lines, start=1):
        cells = [c.strip() for c in cells]
        if not cells or all(c == "" for c in cells):
            continue
        try:
            values = [int(c) for c in cells]
        except ValueError:
            if not rows and lineno == 1:
                continue
            raise InputError(f"row {lineno}: non-integer cell in {cells}") from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise InputError(f"row {lineno}: expected {width} cells, got {len(values)}")
        rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.int64) + (1 if zero_based else 0)
    if scheme is not None and not isinstance(scheme, CategoryScheme):
        scheme = CategoryScheme(tuple(scheme))
    bad = table < 1
    if scheme is not None:
        bad |= table > np.asarray(scheme.c)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise InputError(f"row {_data_line(lines, i)}, column {j + 1}: label {table[i, j]} out of range")
    return Dataset(table, scheme)


def _data_line(lines, index):
    """Line number of the ``index``-th data row (skipping header and blanks)."""
    seen = -1
    for lineno, cells in enumerate(lines, start=1):
        if not cells or all(c.strip() == "" for c in cells):
            continue
        try:
            [int(c) for c in cells]
        except ValueError:
            continue
        seen += 1
        if seen == index:
            return lineno
    return index + 1


def write_dataset(path, data, labels=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [f"y{j + 1}" for j in range(data.scheme.d)]
        w.writerow(header + (["class"] if labels is not None else []))
        for i, row in enumerate(data.rows):
            w.writerow(list(row) + ([int(labels[i])] if labels is not None else []))


def read_params(path):
    with open(path) as fh:
        return LcmParams.from_dict(json.load(fh))


def write_params(path, params):
    with open(path, "w") as fh:
        json.dump(params.to_dict(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------- reports

def summary_rows(records, methods=None, data=None, truth=None):
    """Tables-1-to-4 shape: best-of log-likelihood and iterations per method."""
    methods = methods or sorted({r.method for r in records}, key=_method_key)
    rows = []
    if truth is not None and data is not None:
        rows.append({"method": "true", "best_loglik": log_likelihood(data, truth),
                     "best_iterations": "", "best_seed": "", "median_iterations": "",
                     "converged_runs": "", "runs": ""})
    for m in methods:
        pool = [r for r in records if r.method == m]
        if not pool:
            continue
        b = best_of(pool)
        rows.append({
            "method": m,
            "best_loglik": b.loglik,
            "best_iterations": b.iterations,
            "best_seed": b.seed,
            "median_iterations": float(np.median([r.iterations for r in pool])),
            "converged_runs": sum(r.converged for r in pool),
            "runs": len(pool),
        })
    return rows


def boxplot_rows(records):
    return [
        {"method": r.method, "init_id": r.init_id, "seed": r.seed,
         "iterations": r.iterations, "loglik": r.loglik}
        for r in records
    ]


def rmse_matrix(records, truth=None):
    """Pairwise aligned RMSE among the best run of each method (and the truth)."""
    names = sorted({r.method for r in records}, key=_method_key)
    estimates = [best_of(records, m).params for m in names]
    if truth is not None:
        names.append("true")
        estimates.append(truth)
    n = len(names)
    mat = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            mat[i, j] = mat[j, i] = aligned_rmse(estimates[i], estimates[j])
    return names, mat


def timing_rows(records):
    return [
        {"method": r.method, "init_id": r.init_id, "seed": r.seed,
         "iterations": r.iterations, "wall_time": r.wall_time,
         "time_per_iteration": r.trace_time / r.iterations if r.iterations else 0.0}
        for r in records
    ]


def _method_key(m):
    return METHODS.index(m) if m in METHODS else len(METHODS)


def _write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


SUMMARY_FIELDS = ["method", "best_loglik", "best_iterations", "best_seed",
                  "median_iterations", "converged_runs", "runs"]
BOXPLOT_FIELDS = ["method", "init_id", "seed", "iterations", "loglik"]
TIMING_FIELDS = ["method", "init_id", "seed", "iterations", "wall_time", "time_per_iteration"]


def emit_report(records, out_dir, fmt="csv", *, data=None, truth=None):
    """Write the run records and summary tables into ``out_dir``.

    Always writes ``runs.json`` and ``timing.csv``. With ``fmt="csv"`` the
    summary, boxplot and RMSE tables go to ``summary.csv``, ``boxplot.csv`` and
    ``rmse.csv``; with ``fmt="json"`` they go to ``report.json``. Returns the
    list of written paths.
    """
    if fmt not in ("csv", "json"):
        raise ValueError("format must be 'csv' or 'json'")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    with open(path("runs.json"), "w") as fh:
        json.dump([r.to_dict() for r in records], fh, indent=1)
        fh.write("\n")
    summary = summary_rows(records, data=data, truth=truth)
    box = boxplot_rows(records)
    names, mat = rmse_matrix(records, truth) if records else ([], np.zeros((0, 0)))
    if fmt == "csv":
        _write_csv(path("summary.csv"), summary, SUMMARY_FIELDS)
        _write_csv(path("boxplot.csv"), box, BOXPLOT_FIELDS)
        with open(path("rmse.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + names)
            for name, row in zip(names, mat):
                w.writerow([name] + [repr(float(v)) for v in row])
    else:
        with open(path("report.json"), "w") as fh:
            json.dump({"summary": summary, "boxplot": box,
                       "rmse": {"names": names, "matrix": mat.tolist()}}, fh, indent=1)
            fh.write("\n")
    _write_csv(path("timing.csv"), timing_rows(records), TIMING_FIELDS)
    return written


def load_records(path):
    with open(path) as fh:
        return [RunRecord.from_dict(obj) for obj in json.load(fh)]
