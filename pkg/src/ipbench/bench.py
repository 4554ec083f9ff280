"""Experiment matrices, run records, performance profiles and thread calibration."""
from __future__ import annotations

import csv
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .ipm import SolverOptions, Status, solve

log = logging.getLogger(__name__)

RECORD_FIELDS = (
    "problem_id", "backend_id", "workers", "status",
    "wall_seconds", "iterations", "objective", "repetition",
)
PROFILE_FIELDS = ("solve_time", "num_problems_solved")
SOLVED = frozenset({Status.OPTIMAL.value, Status.ACCEPTABLE.value})
STATUSES = frozenset(s.value for s in Status)

PAPER_SWEEP = tuple(range(2, 73, 2))
PAPER_REPS = 5


@dataclass(frozen=True)
class RunRecord:
    problem_id: str
    backend_id: str
    workers: int
    status: str
    wall_seconds: float
    iterations: int
    objective: float | None
    repetition: int = 0
    timing_reliable: bool = True

    def __post_init__(self):
        if isinstance(self.status, Status):
            object.__setattr__(self, "status", self.status.value)
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if not self.wall_seconds >= 0:
            raise ValueError("wall_seconds must be nonnegative")

    @property
    def solved(self) -> bool:
        return self.status in SOLVED

    def sort_key(self):
        return (self.problem_id, self.backend_id, self.workers, self.repetition)

    def to_row(self) -> dict:
        obj = "" if self.objective is None or not math.isfinite(self.objective) else repr(self.objective)
        return {
            "problem_id": self.problem_id,
            "backend_id": self.backend_id,
            "workers": str(self.workers),
            "status": self.status,
            "wall_seconds": repr(self.wall_seconds),
            "iterations": str(self.iterations),
            "objective": obj,
            "repetition": str(self.repetition),
        }

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> "RunRecord":
        obj = row["objective"].strip()
        return cls(
            problem_id=row["problem_id"],
            backend_id=row["backend_id"],
            workers=int(row["workers"]),
            status=row["status"],
            wall_seconds=float(row["wall_seconds"]),
            iterations=int(row["iterations"]),
            objective=float(obj) if obj else None,
            repetition=int(row["repetition"]),
        )


def write_records(records: Iterable[RunRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in sorted(records, key=RunRecord.sort_key):
            w.writerow(r.to_row())
    return path


def read_records(path) -> list[RunRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
            raise ValueError(f"unexpected record header {reader.fieldnames}")
        return [RunRecord.from_row(row) for row in reader]


# ----------------------------------------------------------------------------
# experiment matrix


def _problem_items(problems) -> list[tuple[str, object]]:
    items = []
    for p in problems:
        if isinstance(p, tuple):
            items.append(p)
        else:
            items.append((p.name, p.problem))
    return items


def _backend_workers(backend) -> int:
    w = getattr(backend, "workers", None)
    return 1 if w is None else int(w)


def run_cell(problem_id, problem, backend_id, backend, opts, repetition=0,
             reliable=True) -> RunRecord:
    """Solve once and time only the solve call."""
    t0 = time.perf_counter()
    try:
        res = solve(problem, backend, opts)
        status, iters, obj = res.status, res.iterations, res.objective
    except Exception as exc:  # a broken evaluator must not abort the matrix
        log.warning("cell %s/%s failed: %s", problem_id, backend_id, exc)
        status, iters, obj = Status.DIVERGED, 0, None
    wall = time.perf_counter() - t0
    return RunRecord(
        problem_id=problem_id,
        backend_id=backend_id,
        workers=_backend_workers(backend),
        status=status,
        wall_seconds=wall,
        iterations=iters,
        objective=obj if obj is not None and math.isfinite(obj) else None,
        repetition=repetition,
        timing_reliable=reliable,
    )


def run_matrix(
    problems: Sequence,
    backends: Mapping[str, object],
    opts: SolverOptions = SolverOptions(),
    repetitions: int = 1,
    concurrent: int = 0,
) -> list[RunRecord]:
    """One record per (problem, backend, repetition) cell, sorted canonically.

    ``problems`` holds generated instances or ``(problem_id, NlpProblem)``
    pairs.  With ``concurrent > 1`` cells run on a thread pool and the
    records are stamped as having unreliable timings.
    """
    items = _problem_items(problems)
    if not items or not backends:
        raise ValueError("experiment matrix is empty")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    cells = [
        (pid, prob, bid, be, rep)
        for pid, prob in items
        for bid, be in backends.items()
        for rep in range(repetitions)
    ]
    if concurrent > 1:
        with ThreadPoolExecutor(max_workers=concurrent) as pool:
            futs = [pool.submit(run_cell, pid, prob, bid, be, opts, rep, False)
                    for pid, prob, bid, be, rep in cells]
            records = [f.result() for f in futs]
    else:
        records = [run_cell(pid, prob, bid, be, opts, rep) for pid, prob, bid, be, rep in cells]
    return sorted(records, key=RunRecord.sort_key)


# ----------------------------------------------------------------------------
# performance profiles


@dataclass(frozen=True)
class ProfileCurve:
    """Right-continuous step function: problems solved within time ``t``."""

    backend_id: str
    points: tuple
    total_problems: int

    def __post_init__(self):
        times = [t for t, _ in self.points]
        counts = [c for _, c in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("profile times must be strictly increasing")
        if any(b < a for a, b in zip(counts, counts[1:])):
            raise ValueError("profile counts must be nondecreasing")
        if counts and counts[-1] > self.total_problems:
            raise ValueError("more problems solved than exist")

    @classmethod
    def from_times(cls, backend_id: str, times: Iterable[float], total: int) -> "ProfileCurve":
        ts = np.sort(np.asarray(list(times), dtype=float))
        uniq, idx = np.unique(ts, return_index=True)
        counts = np.append(idx[1:], ts.size) if uniq.size else np.zeros(0, int)
        pts = tuple((float(t), int(c)) for t, c in zip(uniq, counts))
        return cls(backend_id, pts, total)

    def count_at(self, t: float) -> int:
        n = 0
        for ti, c in self.points:
            if ti <= t:
                n = c
            else:
                break
        return n

    @property
    def solved(self) -> int:
        return self.points[-1][1] if self.points else 0


@dataclass
class ProfileSet:
    curves: dict
    virtual_best: ProfileCurve
    virtual_worst: ProfileCurve
    total_problems: int

    def all_curves(self) -> list[ProfileCurve]:
        return [*self.curves.values(), self.virtual_best, self.virtual_worst]


def _series_key(backend_id, workers, multi):
    return f"{backend_id}@{workers}" if multi else backend_id


def solved_times(records: Iterable[RunRecord]) -> dict:
    """Per series, per problem: mean wall time if every repetition solved, else ``None``."""
    records = list(records)
    workers_seen = defaultdict(set)
    for r in records:
        workers_seen[r.backend_id].add(r.workers)
    cells = defaultdict(list)
    for r in records:
        key = _series_key(r.backend_id, r.workers, len(workers_seen[r.backend_id]) > 1)
        cells[(key, r.problem_id)].append(r)
    out: dict = defaultdict(dict)
    for (key, pid), rs in sorted(cells.items()):
        if all(r.solved for r in rs):
            out[key][pid] = float(np.mean([r.wall_seconds for r in rs]))
        else:
            out[key][pid] = None
    return dict(out)


def performance_profile(records: Iterable[RunRecord], total: int | None = None) -> ProfileSet:
    """Cumulative solved-within-time curves plus virtual best and worst.

    The virtual best takes each problem's fastest solved time over all
    series; the virtual worst takes the slowest and counts a problem only
    when every series solved it.
    """
    table = solved_times(records)
    problem_sets = {k: frozenset(v) for k, v in table.items()}
    if len(set(problem_sets.values())) > 1:
        raise ValueError("records do not cover a common problem set across backends")
    problems = sorted(next(iter(problem_sets.values()))) if problem_sets else []
    if total is None:
        total = len(problems)
    if total < len(problems):
        raise ValueError("total is smaller than the number of recorded problems")
    curves = {
        k: ProfileCurve.from_times(k, [t for t in v.values() if t is not None], total)
        for k, v in sorted(table.items())
    }
    best, worst = [], []
    for pid in problems:
        ts = [table[k][pid] for k in table]
        done = [t for t in ts if t is not None]
        if done:
            best.append(min(done))
        if len(done) == len(ts):
            worst.append(max(done))
    return ProfileSet(
        curves=curves,
        virtual_best=ProfileCurve.from_times("virtual_best", best, total),
        virtual_worst=ProfileCurve.from_times("virtual_worst", worst, total),
        total_problems=total,
    )


def write_profile_csv(curve: ProfileCurve, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_FIELDS)
        for t, c in curve.points:
            w.writerow([repr(t), c])
    return path


def read_profile_csv(path, backend_id: str = "", total: int = 0) -> ProfileCurve:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != PROFILE_FIELDS:
            raise ValueError(f"unexpected profile header {header}")
        pts = tuple((float(t), int(c)) for t, c in reader)
    total = max(total, pts[-1][1] if pts else 0)
    return ProfileCurve(backend_id, pts, total)


def write_profiles(profile: ProfileSet, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    return [write_profile_csv(c, out_dir / f"{c.backend_id}.csv") for c in profile.all_curves()]


def plot_profiles(profile: ProfileSet, path, split: float | None = None) -> Path:
    """Two-panel SVG: linear time axis up to ``split``, logarithmic beyond."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = profile.all_curves()
    times = [t for c in curves for t, _ in c.points]
    t_max = max(times) if times else 1.0
    if split is None:
        split = float(np.median(times)) if times else 1.0
    split = max(split, 1e-9)
    t_end = max(t_max, split) * 2.0

    fig, (ax_lin, ax_log) = plt.subplots(
        1, 2, sharey=True, figsize=(9, 4), gridspec_kw={"wspace": 0.02}
    )
    for c in curves:
        xs = [0.0] + [t for t, _ in c.points] + [t_end]
        ys = [0] + [n for _, n in c.points] + [c.solved]
        style = {"virtual_best": ":", "virtual_worst": "--"}.get(c.backend_id, "-")
        for ax in (ax_lin, ax_log):
            ax.step(xs, ys, where="post", linestyle=style, label=c.backend_id)
    ax_lin.set_xlim(0.0, split)
    ax_log.set_xscale("log")
    ax_log.set_xlim(split, t_end)
    ax_lin.set_ylim(0, max(profile.total_problems, 1))
    ax_lin.set_ylabel("problems solved")
    ax_lin.set_xlabel("time (s)")
    ax_log.set_xlabel("time (s, log)")
    ax_log.legend(loc="lower right", fontsize="small")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed salt and no date keep the SVG byte-identical across runs
    with matplotlib.rc_context({"svg.hashsalt": "ipbench"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# ----------------------------------------------------------------------------
# calibration


@dataclass
class CalibrationResult:
    means: dict
    normalized: dict
    best_workers: int | None
    min_mean: float
    max_mean: float
    invalid: tuple = ()
    records: list = field(default_factory=list)


def summarize(samples: Mapping[int, Sequence[float]], invalid: Iterable[int] = ()) -> CalibrationResult:
    """Means, min-max normalized means and the argmin over valid worker counts.

    Ties go to the smallest worker count; when all means coincide every
    normalized value is 0.
    """
    invalid = tuple(sorted(set(invalid)))
    means = {int(w): float(np.mean(ts)) for w, ts in sorted(samples.items()) if len(ts)}
    valid = {w: m for w, m in means.items() if w not in invalid}
    if not valid:
        return CalibrationResult(means, {}, None, math.nan, math.nan, invalid)
    lo, hi = min(valid.values()), max(valid.values())
    span = hi - lo
    normalized = {w: (m - lo) / span if span > 0 else 0.0 for w, m in valid.items()}
    best = min(valid, key=lambda w: (valid[w], w))
    return CalibrationResult(means, normalized, best, lo, hi, invalid)


def calibrate(
    problem,
    backend_factory: Callable[[int], object] | None = None,
    worker_counts: Sequence[int] = PAPER_SWEEP,
    repetitions: int = PAPER_REPS,
    opts: SolverOptions = SolverOptions(),
    run: Callable[[int, int], RunRecord] | None = None,
    problem_id: str | None = None,
    backend_id: str = "sparse",
) -> CalibrationResult:
    """Repeat the solve per worker count and pick the fastest mean.

    ``run(workers, repetition)`` may be injected to supply records directly;
    otherwise ``backend_factory(workers)`` builds the backend for each count.
    """
    worker_counts = list(worker_counts)
    if not worker_counts:
        raise ValueError("worker_counts must be nonempty")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    if run is None:
        if backend_factory is None:
            raise ValueError("need a backend factory or a run function")
        pid = problem_id or getattr(problem, "name", "problem")
        nlp = getattr(problem, "problem", problem)

        def run(workers, rep):
            rec = run_cell(pid, nlp, backend_id, backend_factory(workers), opts, rep)
            return RunRecord(rec.problem_id, rec.backend_id, workers, rec.status,
                             rec.wall_seconds, rec.iterations, rec.objective, rep)

    records = []
    samples: dict = {}
    invalid = set()
    for w in worker_counts:
        samples[w] = []
        for rep in range(repetitions):
            rec = run(w, rep)
            records.append(rec)
            samples[w].append(rec.wall_seconds)
            if not rec.solved:
                invalid.add(w)
    result = summarize(samples, invalid)
    result.records = records
    return result


def write_calibration(result: CalibrationResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["workers", "mean_seconds", "normalized", "valid"])
        for k, m in result.means.items():
            norm = result.normalized.get(k)
            w.writerow([k, repr(m), "" if norm is None else repr(norm), int(k not in result.invalid)])
    return path
