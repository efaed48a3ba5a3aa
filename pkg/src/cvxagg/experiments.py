"""Problem generators, Monte Carlo trials of hull ERM, and rate reports.

The guarantees being probed are distribution free, so the generators here are
library policy, not a prescribed family: discrete designs with random atom
masses, dictionaries drawn uniformly in [-b, b], and two-point conditional
laws for Y whose mean sits inside the hull, outside it, or at zero.

Determinism contract: every random object derives from the master seed
through stable SHA-256 hashes of its coordinates, so any subset of the grid
reproduces independently and worker count never changes the output.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Dictionary, DiscreteProblem, combine, sample
from .rates import phi_n, psi_c
from .risk import population_risk
from .solver import ErmSolution, SolverConfig, erm_convex_hull

PROBLEM_KINDS = ("inside-hull", "outside-hull", "pure-noise")
DEFAULT_GRID = tuple((n, M) for n in (64, 256, 1024, 4096) for M in (2, 4, 16, 64, 256))
ORACLE_TOLERANCE = 1e-10


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from the string forms of the parts."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full specification of a rate experiment; see the README for file keys."""

    grid: tuple = DEFAULT_GRID
    problem_kind: str = "inside-hull"
    atoms_K: int = 16
    replications: int = 200
    master_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    x_levels: tuple = (1.0, 2.0)
    bound_b: float = 1.0
    noise: float = 0.5

    def __post_init__(self):
        grid = tuple((int(n), int(M)) for n, M in self.grid)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "x_levels", tuple(float(x) for x in self.x_levels))
        if not grid:
            raise ValueError("grid must be nonempty")
        if any(n < 1 or M < 1 for n, M in grid):
            raise ValueError("grid entries must be positive")
        if len(set(grid)) != len(grid):
            raise ValueError("grid entries must be unique")
        if self.problem_kind not in PROBLEM_KINDS:
            raise ValueError(f"problem_kind must be one of {PROBLEM_KINDS}")
        if self.atoms_K < 1:
            raise ValueError("atoms_K must be at least 1")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.bound_b > 0:
            raise ValueError("bound_b must be positive")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")


@dataclass(frozen=True)
class TrialRecord:
    """One ERM trial: exact population excess risk against the hull optimum."""

    n: int
    M: int
    replication: int
    excess_risk: float
    oracle_risk: float
    seed: int
    converged: bool = True


@dataclass(frozen=True)
class PointSummary:
    """Excess-risk statistics for one (n, M) cell."""

    n: int
    M: int
    psi: float
    phi: float
    replications: int
    mean_excess: float
    median_excess: float
    q10: float
    q25: float
    q75: float
    q90: float
    max_excess: float


@dataclass(frozen=True)
class DeviationRow:
    """Tail frequency of the excess beyond the fitted residual at level x."""

    n: int
    M: int
    x: float
    threshold: float
    frequency: float
    bound: float


@dataclass(frozen=True, eq=False)
class RateReport:
    """Grid summaries, the constant fitted on even cells, and tail tables.

    c_hat is max(mean excess / (b^2 psi)) over even-indexed grid cells;
    validation_ratios are mean excess / (c_hat b^2 psi) on the odd cells.
    c_hat_phi is the same fit against the older rate curve, kept for
    comparison.  incomplete is set when any trial failed to converge.
    """

    points: tuple
    c_hat: float
    c_hat_phi: float
    fit_indices: tuple
    validation_indices: tuple
    validation_ratios: tuple
    deviation: tuple
    incomplete: bool
    bound_b: float
    records: tuple = field(repr=False, default=())

    def to_json_dict(self) -> dict:
        return {
            "points": [dataclasses.asdict(p) for p in self.points],
            "c_hat": self.c_hat,
            "c_hat_phi": self.c_hat_phi,
            "fit_indices": list(self.fit_indices),
            "validation_indices": list(self.validation_indices),
            "validation_ratios": list(self.validation_ratios),
            "deviation": [dataclasses.asdict(d) for d in self.deviation],
            "incomplete": self.incomplete,
            "bound_b": self.bound_b,
        }


def make_problem(
    kind: str,
    K: int,
    M: int,
    b: float,
    seed: int,
    noise: float = 0.5,
) -> tuple[DiscreteProblem, Dictionary]:
    """Random K-point design, M uniform dictionary rows, two-point noise for Y.

    The conditional law of Y given X = x is {r(x) - d(x), r(x) + d(x)} with
    equal mass, where the regression function r is a hidden convex combination
    of the dictionary (inside-hull), an independent uniform draw
    (outside-hull), or zero (pure-noise), and d(x) = noise * (b - |r(x)|)
    keeps |Y| <= b.  noise=0 gives a noiseless, hull-realizable problem for
    the inside-hull kind.
    """
    if kind not in PROBLEM_KINDS:
        raise ValueError(f"unknown problem kind {kind!r}")
    if K < 1 or M < 1:
        raise ValueError("K and M must be at least 1")
    if not b > 0:
        raise ValueError("b must be positive")
    rng = np.random.default_rng(seed)
    px = rng.dirichlet(np.ones(K))
    px = px / px.sum()
    values = rng.uniform(-b, b, size=(M, K))
    if kind == "inside-hull":
        hidden = rng.dirichlet(np.ones(M))
        regression = hidden @ values
        amplitude = noise * (b - np.abs(regression))
    elif kind == "outside-hull":
        regression = rng.uniform(-b, b, size=K)
        amplitude = noise * (b - np.abs(regression))
    else:
        regression = np.zeros(K)
        amplitude = np.full(K, noise * b)
    x_indices = np.repeat(np.arange(K), 2)
    y_values = np.clip(np.stack([regression - amplitude, regression + amplitude], axis=1).ravel(), -b, b)
    probabilities = np.repeat(px / 2.0, 2)
    problem = DiscreteProblem(x_indices, y_values, probabilities, bound_b=b)
    return problem, Dictionary(values)


def population_oracle(dictionary: Dictionary, problem: DiscreteProblem) -> ErmSolution:
    """Minimal population risk over the hull, certified to a 1e-10 duality gap."""
    cfg = SolverConfig(max_iterations=2_000_000, tolerance=ORACLE_TOLERANCE)
    solution = erm_convex_hull(dictionary, problem, cfg)
    if not solution.converged:
        raise ArithmeticError("population hull solve did not reach its duality-gap target")
    return solution


def run_trial(
    problem: DiscreteProblem,
    dictionary: Dictionary,
    n: int,
    solver_config: SolverConfig,
    seed: int,
    replication: int = 0,
    oracle_risk: float | None = None,
) -> TrialRecord:
    """Draw a size-n sample, run hull ERM, record the exact population excess.

    oracle_risk is the population hull minimum; pass it when running many
    trials on the same problem so it is computed once.
    """
    if oracle_risk is None:
        oracle_risk = population_oracle(dictionary, problem).empirical_risk
    draws = sample(problem, n, seed)
    solution = erm_convex_hull(dictionary, draws, solver_config)
    fitted = combine(dictionary, solution.weights)
    excess = population_risk(fitted, problem) - oracle_risk
    return TrialRecord(
        n=n,
        M=dictionary.size_M,
        replication=replication,
        excess_risk=excess,
        oracle_risk=oracle_risk,
        seed=seed,
        converged=solution.converged,
    )


def _cell_task(args) -> list[TrialRecord]:
    problem, dictionary, n, solver_cfg, oracle_risk, jobs_chunk = args
    records = []
    for replication, seed in jobs_chunk:
        records.append(
            run_trial(problem, dictionary, n, solver_cfg, seed, replication, oracle_risk)
        )
    return records


def _quantile(values, q: float) -> float:
    return float(np.quantile(np.asarray(values), q))


def run_grid(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> RateReport:
    """Run every grid cell, fit the rate constant, and assemble the report.

    One problem is generated per (n, M) cell from a seed hashed out of
    (master_seed, n, M); replications share it and vary only the sample.
    When out_dir is given, trials.csv and report.json are written there; the
    bytes are identical for any worker count.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    tasks = []
    incomplete = False
    for n, M in cfg.grid:
        problem_seed = derive_seed(cfg.master_seed, n, M, "problem")
        problem, dictionary = make_problem(
            cfg.problem_kind, cfg.atoms_K, M, cfg.bound_b, problem_seed, cfg.noise
        )
        oracle_risk = population_oracle(dictionary, problem).empirical_risk
        chunk = [
            (rep, derive_seed(cfg.master_seed, n, M, rep))
            for rep in range(cfg.replications)
        ]
        step = max(1, math.ceil(len(chunk) / max(jobs, 1) / 4))
        for start in range(0, len(chunk), step):
            tasks.append((problem, dictionary, n, cfg.solver, oracle_risk, chunk[start : start + step]))

    if jobs == 1:
        chunks = [_cell_task(t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_cell_task, tasks))
    records = [record for chunk in chunks for record in chunk]
    records.sort(key=lambda r: (cfg.grid.index((r.n, r.M)), r.replication))
    incomplete = any(not r.converged for r in records)

    by_cell: dict[tuple[int, int], list[TrialRecord]] = {}
    for record in records:
        by_cell.setdefault((record.n, record.M), []).append(record)

    points = []
    for n, M in cfg.grid:
        cell = [r.excess_risk for r in by_cell[(n, M)]]
        points.append(
            PointSummary(
                n=n,
                M=M,
                psi=psi_c(n, M),
                phi=phi_n(n, M),
                replications=len(cell),
                mean_excess=float(np.mean(cell)),
                median_excess=float(statistics.median(cell)),
                q10=_quantile(cell, 0.10),
                q25=_quantile(cell, 0.25),
                q75=_quantile(cell, 0.75),
                q90=_quantile(cell, 0.90),
                max_excess=float(np.max(cell)),
            )
        )

    b2 = cfg.bound_b**2
    fit_idx = tuple(range(0, len(cfg.grid), 2))
    val_idx = tuple(range(1, len(cfg.grid), 2))
    c_hat = max(points[i].mean_excess / (b2 * points[i].psi) for i in fit_idx)
    c_hat = max(c_hat, 0.0)
    c_hat_phi = max(points[i].mean_excess / (b2 * points[i].phi) for i in fit_idx)
    c_hat_phi = max(c_hat_phi, 0.0)
    validation_ratios = tuple(
        points[i].mean_excess / (c_hat * b2 * points[i].psi) if c_hat > 0 else 0.0
        for i in val_idx
    )

    deviation = []
    for (n, M), cell_records in by_cell.items():
        psi = psi_c(n, M)
        for x in cfg.x_levels:
            threshold = c_hat * b2 * max(psi, x / n)
            exceed = sum(1 for r in cell_records if r.excess_risk > threshold)
            deviation.append(
                DeviationRow(
                    n=n,
                    M=M,
                    x=x,
                    threshold=threshold,
                    frequency=exceed / len(cell_records),
                    bound=4.0 * math.exp(-x),
                )
            )

    report = RateReport(
        points=tuple(points),
        c_hat=c_hat,
        c_hat_phi=c_hat_phi,
        fit_indices=fit_idx,
        validation_indices=val_idx,
        validation_ratios=validation_ratios,
        deviation=tuple(deviation),
        incomplete=incomplete,
        bound_b=cfg.bound_b,
        records=tuple(records),
    )
    if out_dir is not None:
        write_outputs(report, out_dir)
    return report


def write_outputs(report: RateReport, out_dir) -> None:
    """Write trials.csv (one row per record) and report.json, deterministically."""
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    lines = ["n,M,replication,excess_risk,oracle_risk,seed,converged"]
    for r in report.records:
        lines.append(
            f"{r.n},{r.M},{r.replication},{float(r.excess_risk)!r},"
            f"{float(r.oracle_risk)!r},{r.seed},{int(r.converged)}"
        )
    (path / "trials.csv").write_text("\n".join(lines) + "\n")
    (path / "report.json").write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )


def load_config(path) -> ExperimentConfig:
    """Read an ExperimentConfig from a JSON file keyed by the field names."""
    raw = json.loads(Path(path).read_text())
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(raw)
    if "grid" in kwargs:
        kwargs["grid"] = tuple((int(n), int(M)) for n, M in kwargs["grid"])
    if "solver" in kwargs:
        kwargs["solver"] = SolverConfig(**kwargs["solver"])
    return ExperimentConfig(**kwargs)


def save_config(cfg: ExperimentConfig, path) -> None:
    data = dataclasses.asdict(cfg)
    data["grid"] = [list(cell) for cell in cfg.grid]
    data["x_levels"] = list(cfg.x_levels)
    data["solver"] = dataclasses.asdict(cfg.solver)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
