"""Localized empirical-process suprema, peeling, fixed points, and the
two-sided empirical/population risk comparison on segments.

Function classes live on the atom space of a discrete problem: a class member
is a vector of values, one per (x, y) atom, so P h and P_n h are exact dot
products with the atom probabilities and the sampled atom frequencies.  The
star hull of a class G scales members by alpha in [0, 1]; its localized set
keeps only scalings with P(alpha h) <= lambda.

Segment excess-loss classes are one-parameter families whose population and
empirical means are quadratics in theta, so per-dataset suprema are computed
from closed-form critical points plus a dense theta grid as a safeguard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Dictionary, DiscreteProblem, Multiset, Segment, multiset_average
from .solver import erm_segment

SEGMENT_KIND = "segment-excess-loss"
SPAN_KIND = "span-ball"
CUSTOM_KIND = "custom-enumerated"

DEFAULT_THETA_GRID = 10_001


@dataclass(frozen=True, eq=False)
class LocalizedClass:
    """A function class together with its localization level.

    kind selects the parameterization: a segment's excess-loss class, the
    ball {f in span(dictionary): P f^2 <= level} in the design marginal, or an
    explicit finite list of atom-tabulated functions.
    """

    kind: str
    level_lambda: float
    segment: Segment | None = None
    dictionary: Dictionary | None = None
    functions: tuple | None = None

    def __post_init__(self):
        if self.kind not in (SEGMENT_KIND, SPAN_KIND, CUSTOM_KIND):
            raise ValueError(f"unknown localized-class kind {self.kind!r}")
        if not self.level_lambda > 0:
            raise ValueError("level_lambda must be positive")
        needed = {SEGMENT_KIND: self.segment, SPAN_KIND: self.dictionary, CUSTOM_KIND: self.functions}
        if needed[self.kind] is None:
            raise ValueError(f"kind {self.kind!r} is missing its parameters")


def segment_excess_loss_class(segment: Segment, level: float) -> LocalizedClass:
    return LocalizedClass(kind=SEGMENT_KIND, level_lambda=level, segment=segment)


def span_ball_class(dictionary: Dictionary, level: float) -> LocalizedClass:
    return LocalizedClass(kind=SPAN_KIND, level_lambda=level, dictionary=dictionary)


def enumerated_class(functions, level: float) -> LocalizedClass:
    return LocalizedClass(kind=CUSTOM_KIND, level_lambda=level, functions=tuple(np.asarray(f, float) for f in functions))


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), int(rep)]))


def _segment_loss_basis(segment: Segment, problem: DiscreteProblem):
    """Atom-wise quadratic basis of the excess loss along the segment.

    With g_theta = g_j + theta (g_i - g_j) and g_star the population segment
    minimizer, the excess loss at an atom is a(z) theta^2 + b(z) theta + c(z).
    """
    _, g_star = erm_segment(segment, problem)
    x = problem.x_indices
    y = problem.y_values
    u = segment.endpoint_j[x]
    v = (segment.endpoint_i - segment.endpoint_j)[x]
    a = v * v
    b = -2.0 * v * (y - u)
    c = (y - u) ** 2 - (y - g_star[x]) ** 2
    return a, b, c


def _real_roots_quadratic(a: float, b: float, c: float) -> list[float]:
    if a == 0.0:
        return [] if b == 0.0 else [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    root = math.sqrt(disc)
    return [(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)]


def _poly_eval(coeffs: tuple[float, float, float], theta: np.ndarray) -> np.ndarray:
    a, b, c = coeffs
    return (a * theta + b) * theta + c


def _candidate_thetas(extra, grid_size: int) -> np.ndarray:
    pts = list(np.linspace(0.0, 1.0, grid_size))
    for t in extra:
        if np.isfinite(t) and 0.0 <= t <= 1.0:
            pts.append(float(t))
    return np.asarray(pts)


def _segment_star_sup(pop, diff, level: float, grid_size: int) -> float:
    """sup over theta, alpha of alpha |D(theta)| with alpha P L <= level.

    pop = coefficients of P L_theta, diff = coefficients of (P - P_n) L_theta.
    The optimal alpha is min(1, level / P L); the objective is piecewise
    rational, so the exact extrema are among the polynomial critical points,
    augmented with a dense grid.
    """
    pa, pb, pc = pop
    da, db, dc = diff
    extra = []
    if da != 0.0:
        extra.append(-db / (2.0 * da))
    extra.extend(_real_roots_quadratic(da, db, dc))
    extra.extend(_real_roots_quadratic(pa, pb, pc - level))
    if pa != 0.0:
        extra.append(-pb / (2.0 * pa))
    # interior critical points of D / PL on the capped region
    num = np.polysub(np.polymul([2.0 * da, db], [pa, pb, pc]), np.polymul([da, db, dc], [2.0 * pa, pb]))
    if np.any(num != 0.0):
        extra.extend(r.real for r in np.roots(num) if abs(r.imag) < 1e-9)
    theta = _candidate_thetas(extra, grid_size)
    pl = _poly_eval(pop, theta)
    d = np.abs(_poly_eval(diff, theta))
    alpha = np.where(pl > level, level / np.where(pl > level, pl, 1.0), 1.0)
    return float(np.max(alpha * d))


def _span_basis(dictionary: Dictionary, problem: DiscreteProblem, rel_tol: float = 1e-12):
    """Orthonormal basis of the dictionary span in the design marginal."""
    F = dictionary.values
    px = problem.marginal_x
    gram = (F * px) @ F.T
    eigvals, vecs = np.linalg.eigh(gram)
    top = float(eigvals[-1]) if eigvals.size else 0.0
    keep = eigvals > max(top * rel_tol, 1e-300)
    if not np.any(keep):
        return np.zeros((0, F.shape[1]))
    return (vecs[:, keep] / np.sqrt(eigvals[keep])).T @ F


def span_rank(dictionary: Dictionary, problem: DiscreteProblem, rel_tol: float = 1e-12) -> int:
    """Rank of the dictionary Gram matrix under the design marginal.

    Duplicated or linearly dependent rows do not increase the rank.
    """
    return _span_basis(dictionary, problem, rel_tol).shape[0]


def localized_sup(
    cls: LocalizedClass,
    problem: DiscreteProblem,
    n: int,
    reps: int,
    seed: int,
    theta_grid: int = DEFAULT_THETA_GRID,
) -> tuple[float, float]:
    """Monte Carlo estimate of E sup |(P - P_n) h| over the localized star hull.

    Population quantities are exact; only the sample is random.  Replication r
    draws its sampled atom counts from a stream derived from (seed, r), so
    estimates at different levels with the same seed share datasets and are
    exactly monotone in the level.  Returns (estimate, standard error).
    """
    if reps < 2:
        raise ValueError("at least 2 replications are required for a standard error")
    if n < 1:
        raise ValueError("n must be at least 1")
    probs = problem.probabilities
    level = cls.level_lambda
    sups = np.empty(reps)

    if cls.kind == SEGMENT_KIND:
        a, b, c = _segment_loss_basis(cls.segment, problem)
        pop = (float(probs @ a), float(probs @ b), float(probs @ c))
        for rep in range(reps):
            counts = _rep_rng(seed, rep).multinomial(n, probs)
            emp = (float(counts @ a) / n, float(counts @ b) / n, float(counts @ c) / n)
            diff = (pop[0] - emp[0], pop[1] - emp[1], pop[2] - emp[2])
            sups[rep] = _segment_star_sup(pop, diff, level, theta_grid)
    elif cls.kind == SPAN_KIND:
        basis = _span_basis(cls.dictionary, problem)
        atom_vals = basis[:, problem.x_indices] if basis.size else np.zeros((0, probs.size))
        root_level = math.sqrt(level)
        for rep in range(reps):
            counts = _rep_rng(seed, rep).multinomial(n, probs)
            delta = probs - counts / n
            v = atom_vals @ delta
            sups[rep] = root_level * float(np.linalg.norm(v))
    else:
        H = np.vstack(cls.functions)
        if H.shape[1] != probs.size:
            raise ValueError("enumerated functions must be tabulated on the problem atoms")
        ph = H @ probs
        cap = np.where(ph > 0, np.minimum(1.0, level / np.where(ph > 0, ph, 1.0)), 1.0)
        for rep in range(reps):
            counts = _rep_rng(seed, rep).multinomial(n, probs)
            delta = probs - counts / n
            sups[rep] = float(np.max(cap * np.abs(H @ delta)))

    estimate = float(np.mean(sups))
    std_error = float(np.std(sups, ddof=1) / math.sqrt(reps))
    return estimate, std_error


def rademacher_segment_bound(b: float, mu: float, n: int) -> float:
    """Localized complexity ceiling 8 b sqrt(mu / n) for a segment class."""
    if mu < 0 or n < 1:
        raise ValueError("mu must be nonnegative and n at least 1")
    return 8.0 * b * math.sqrt(mu / n)


def rademacher_span_bound(b: float, mu: float, n: int, M_prime: int) -> float:
    """Localized complexity ceiling 8 b sqrt(M' mu / n) for a span of rank M'."""
    if M_prime < 1:
        raise ValueError("M_prime must be at least 1")
    if mu < 0 or n < 1:
        raise ValueError("mu must be nonnegative and n at least 1")
    return 8.0 * b * math.sqrt(M_prime * mu / n)


def peeling_bound(per_level, lam: float, truncate_rel: float = 1e-15, max_terms: int = 300) -> float:
    """sum_i 2^{-i} per_level(2^{i+1} lambda) over dyadic shells.

    per_level must make the weighted series converge (any c sqrt(mu) shape
    does); divergence is detected from a non-decreasing positive term and
    raised rather than summed forever.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    total = 0.0
    prev = math.inf
    for i in range(max_terms):
        mu = 2.0 ** (i + 1) * lam
        if not math.isfinite(mu):
            raise ValueError("peeling levels overflowed before the series converged")
        term = 2.0 ** (-i) * float(per_level(mu))
        if term < 0 or not math.isfinite(term):
            raise ValueError("per_level must return finite nonnegative values")
        if i > 0 and term > 0 and term >= prev:
            raise ValueError("peeling series does not converge: terms are not decreasing")
        total += term
        if term <= truncate_rel * total:
            return total
        prev = term
    raise ValueError("peeling series did not converge within the term cap")


def fixed_point(
    bound,
    lo: float = 1e-300,
    hi: float = 1e12,
    rel_tol: float = 1e-9,
) -> float:
    """Smallest lambda with bound(lambda) <= lambda / 8, by log-space bisection.

    Requires bound(lambda)/lambda non-increasing (the star-hull property),
    which makes the crossing predicate monotone; the property is spot-checked
    on a geometric grid.  Returns the bracket floor when even the floor
    already satisfies the inequality (e.g. bound identically 0).
    """
    if bound(lo) <= lo / 8.0:
        return lo
    while bound(hi) > hi / 8.0:
        hi *= 8.0
        if hi > 1e300:
            raise ValueError("no crossing of lambda/8 found in the search bracket")

    probes = np.geomspace(max(lo, hi * 1e-12), hi, 8)
    ratios = [bound(t) / t for t in probes]
    for left, right in zip(ratios, ratios[1:]):
        if right > left * (1.0 + 1e-9) + 1e-300:
            raise ValueError("bound(lambda)/lambda is not non-increasing; not a star-hull bound")

    low, high = lo, hi
    while high / low > 1.0 + rel_tol:
        mid = math.sqrt(low * high)
        if bound(mid) <= mid / 8.0:
            high = mid
        else:
            low = mid
    return high


def gamma(x: float, b: float, N: int, n: int, c0: float) -> float:
    """Union-bound localization level c0 b^2 (x + 2 log N) / n for N net points."""
    if N < 1 or n < 1:
        raise ValueError("N and n must be at least 1")
    if x < 0 or b < 0 or c0 < 0:
        raise ValueError("x, b, and c0 must be nonnegative")
    return c0 * b * b * (x + 2.0 * math.log(N)) / n


def rho_n(x: float, lambda_star: float, B: float, sup_norm: float, n: int, c0: float) -> float:
    """Comparison level max(lambda_star, c0 (B + sup_norm) x / n); never below lambda_star."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if min(x, lambda_star, B, sup_norm, c0) < 0:
        raise ValueError("arguments must be nonnegative")
    return max(lambda_star, c0 * (B + sup_norm) * x / n)


@dataclass(frozen=True)
class IsomorphismReport:
    """Violation tally for the two-sided excess-risk comparison on segments.

    A trial counts as a violation when any tested segment contains a point
    whose empirical/population excess-risk deviation exceeds half the max of
    the excess risk and the level gamma_or_rho.  erm_checked counts the
    non-violating trials, on which the segment ERM's population excess is
    additionally compared against the level; erm_implication_failures should
    be 0 whenever the comparison logic is sound.
    """

    x: float
    trials: int
    violations: int
    bound: float
    gamma_or_rho: float
    erm_checked: int = 0
    erm_implication_failures: int = 0
    resolution_limited: bool = False

    @property
    def violation_rate(self) -> float:
        return self.violations / self.trials if self.trials else 0.0

    @property
    def rate_std_error(self) -> float:
        if not self.trials:
            return 0.0
        p = self.violation_rate
        return math.sqrt(p * (1.0 - p) / self.trials)

    @property
    def rate_ci95(self) -> tuple[float, float]:
        half = 1.96 * self.rate_std_error
        return (max(0.0, self.violation_rate - half), min(1.0, self.violation_rate + half))


def _max_deficit(pop, diff, level: float, grid_size: int) -> float:
    """sup over theta of |D(theta)| - max(PL(theta), level) / 2."""
    pa, pb, pc = pop
    da, db, dc = diff
    extra = []
    if da != 0.0:
        extra.append(-db / (2.0 * da))
    extra.extend(_real_roots_quadratic(da, db, dc))
    extra.extend(_real_roots_quadratic(pa, pb, pc - level))
    if pa != 0.0:
        extra.append(-pb / (2.0 * pa))
    # stationary points of |D| - PL/2 on each sign branch of D
    for sign in (1.0, -1.0):
        denom = 2.0 * sign * da - pa
        if denom != 0.0:
            extra.append((pb / 2.0 - sign * db) / denom)
    theta = _candidate_thetas(extra, grid_size)
    pl = _poly_eval(pop, theta)
    d = np.abs(_poly_eval(diff, theta))
    return float(np.max(d - 0.5 * np.maximum(pl, level)))


def _needed_level(pop, diff, grid_size: int) -> float:
    """Smallest level that avoids violation on this segment and dataset.

    The deviation |D| must exceed both PL/2 and level/2 to violate, so the
    needed level is the sup of 2|D| over the region {|D| > PL/2}.
    """
    pa, pb, pc = pop
    da, db, dc = diff
    extra = []
    if da != 0.0:
        extra.append(-db / (2.0 * da))
    extra.extend(_real_roots_quadratic(da, db, dc))
    extra.extend(_real_roots_quadratic(da - pa / 2.0, db - pb / 2.0, dc - pc / 2.0))
    extra.extend(_real_roots_quadratic(da + pa / 2.0, db + pb / 2.0, dc + pc / 2.0))
    theta = _candidate_thetas(extra, grid_size)
    pl = _poly_eval(pop, theta)
    d = np.abs(_poly_eval(diff, theta))
    needed = np.where(d >= 0.5 * pl, 2.0 * d, 0.0)
    return float(np.max(needed))


def _segment_tables(segments, problem):
    tables = []
    for seg in segments:
        a, b, c = _segment_loss_basis(seg, problem)
        probs = problem.probabilities
        pop = (float(probs @ a), float(probs @ b), float(probs @ c))
        tables.append((np.vstack([a, b, c]), pop))
    return tables


def isomorphism_check(
    segments,
    problem: DiscreteProblem,
    n: int,
    x: float,
    c0: float,
    reps: int,
    seed: int,
    num_net_functions: int | None = None,
    theta_grid: int = DEFAULT_THETA_GRID,
    rep_offset: int = 0,
) -> IsomorphismReport:
    """Monte Carlo check of the two-sided comparison over a family of segments.

    Each replication draws a fresh size-n dataset, computes the exact
    population and empirical excess-loss quadratics for every segment, and
    looks for any theta violating |P L - P_n L| <= max(P L, gamma)/2 through
    closed-form critical points plus a theta grid.  On non-violating datasets
    the empirical segment minimizer's population excess is compared to gamma.
    Replication r uses the stream derived from (seed, rep_offset + r), so a
    run may be split into chunks without changing its outcome.
    """
    segments = list(segments)
    if not segments:
        raise ValueError("at least one segment is required")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    N = num_net_functions if num_net_functions is not None else len(segments)
    level = gamma(x, problem.bound_b, N, n, c0)
    tables = _segment_tables(segments, problem)
    probs = problem.probabilities

    violations = 0
    erm_checked = 0
    erm_failures = 0
    for rep in range(reps):
        counts = _rep_rng(seed, rep_offset + rep).multinomial(n, probs)
        violated = False
        max_erm_excess = 0.0
        for basis, pop in tables:
            emp = (basis @ counts) / n
            diff = (pop[0] - emp[0], pop[1] - emp[1], pop[2] - emp[2])
            if _max_deficit(pop, (float(diff[0]), float(diff[1]), float(diff[2])), level, theta_grid) > 0.0:
                violated = True
            ea, eb = float(emp[0]), float(emp[1])
            theta_hat = 0.0 if ea <= 0.0 else min(1.0, max(0.0, -eb / (2.0 * ea)))
            max_erm_excess = max(max_erm_excess, _poly_eval(pop, np.array([theta_hat]))[0])
        if violated:
            violations += 1
        else:
            erm_checked += 1
            if max_erm_excess > level + 1e-12:
                erm_failures += 1
    bound = 4.0 * math.exp(-x)
    return IsomorphismReport(
        x=float(x),
        trials=reps,
        violations=violations,
        bound=bound,
        gamma_or_rho=level,
        erm_checked=erm_checked,
        erm_implication_failures=erm_failures,
        # with fewer than 1/bound trials the target rate cannot be resolved;
        # reported, not fatal
        resolution_limited=bound < 1.0 and reps * bound < 1.0,
    )


def calibrate_c0(
    segments,
    problem: DiscreteProblem,
    n: int,
    x_levels,
    reps: int,
    seed: int,
    num_net_functions: int | None = None,
    target_scale: float = 1.0,
    theta_grid: int = DEFAULT_THETA_GRID,
) -> float:
    """Smallest c0 whose level keeps the violation rate at or below the target.

    For each calibration dataset the minimal violation-free level is computed
    once (it does not depend on c0); the per-x requirement is then an order
    statistic of those levels at rate target_scale * min(1, 4 exp(-x)).  The
    result is the max over x levels.  The value is an empirical calibration
    for a reference family, not a universal constant.
    """
    segments = list(segments)
    if not segments:
        raise ValueError("at least one segment is required")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if not 0 < target_scale <= 1:
        raise ValueError("target_scale must be in (0, 1]")
    N = num_net_functions if num_net_functions is not None else len(segments)
    tables = _segment_tables(segments, problem)
    probs = problem.probabilities

    needed = np.empty(reps)
    for rep in range(reps):
        counts = _rep_rng(seed, rep).multinomial(n, probs)
        worst = 0.0
        for basis, pop in tables:
            emp = (basis @ counts) / n
            diff = (float(pop[0] - emp[0]), float(pop[1] - emp[1]), float(pop[2] - emp[2]))
            worst = max(worst, _needed_level(pop, diff, theta_grid))
        needed[rep] = worst
    order = np.sort(needed)[::-1]

    b2 = problem.bound_b**2
    c0 = 0.0
    for x in x_levels:
        target = target_scale * min(1.0, 4.0 * math.exp(-x))
        allowed = int(math.floor(target * reps))
        if allowed >= reps:
            continue
        level_req = float(order[allowed])
        denom = b2 * (x + 2.0 * math.log(N)) / n
        if denom > 0:
            c0 = max(c0, level_req / denom)
    return c0


def random_net_segments(
    dictionary: Dictionary,
    m: int,
    num_functions: int,
    num_segments: int,
    seed: int,
) -> list[Segment]:
    """Segments between random m-fold multiset averages of dictionary rows.

    Draws num_functions random multisets, then num_segments distinct index
    pairs among them, all reproducibly from the seed.
    """
    if num_functions < 2:
        raise ValueError("need at least 2 functions to form segments")
    rng = np.random.default_rng(seed)
    functions = [
        multiset_average(dictionary, Multiset.from_draws(rng.integers(0, dictionary.size_M, size=m)))
        for _ in range(num_functions)
    ]
    pairs = [(i, j) for i in range(num_functions) for j in range(i + 1, num_functions)]
    if num_segments > len(pairs):
        raise ValueError("more segments requested than distinct pairs available")
    chosen = rng.choice(len(pairs), size=num_segments, replace=False)
    return [Segment(functions[pairs[k][0]], functions[pairs[k][1]]) for k in chosen]
