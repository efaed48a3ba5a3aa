"""Exact squared risks, excess losses, and Bernstein-condition diagnostics.

Every expectation here is an exact finite sum over the problem atoms; nothing
in this module is Monte Carlo.  That keeps these functions usable as
noise-free oracles for the stochastic machinery elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dictionary, DiscreteProblem, SampleSet, SimplexWeights


def _check_tabulated(f: np.ndarray, num_points: int) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.size != num_points:
        raise ValueError(f"function vector has length {f.size}, expected {num_points}")
    return f


def population_risk(f: np.ndarray, problem: DiscreteProblem) -> float:
    """E (Y - f(X))^2 as an exact sum over atoms."""
    f = _check_tabulated(f, problem.num_design_points)
    resid = problem.y_values - f[problem.x_indices]
    return float(problem.probabilities @ (resid * resid))


def empirical_risk(f: np.ndarray, samples: SampleSet) -> float:
    """(1/n) sum (y_i - f(x_i))^2 over the sample."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1:
        raise ValueError("function vector must be 1-D")
    if samples.x_indices.max() >= f.size:
        raise ValueError("sample refers to design points outside the tabulated function")
    resid = samples.y_values - f[samples.x_indices]
    return float(resid @ resid) / samples.n


def excess_loss_mean(f: np.ndarray, f_star: np.ndarray, problem: DiscreteProblem) -> float:
    """R(f) - R(f_star); the excess risk when f_star minimizes over the class."""
    return population_risk(f, problem) - population_risk(f_star, problem)


def excess_loss_second_moment(f: np.ndarray, f_star: np.ndarray, problem: DiscreteProblem) -> float:
    """Exact second moment of the excess loss (y-f)^2 - (y-f_star)^2."""
    f = _check_tabulated(f, problem.num_design_points)
    f_star = _check_tabulated(f_star, problem.num_design_points)
    y = problem.y_values
    x = problem.x_indices
    diff = (y - f[x]) ** 2 - (y - f_star[x]) ** 2
    return float(problem.probabilities @ (diff * diff))


def variance_term(w: SimplexWeights, dictionary: Dictionary, problem: DiscreteProblem) -> float:
    """E_X Var_J f_J(X) where J picks dictionary row j with probability w_j.

    The Y part of Var_J(Y - f_J(X)) cancels because Y is held fixed, so this
    is the exact per-point mixture variance averaged over the X marginal.
    """
    weights = w.weights
    if weights.size != dictionary.size_M:
        raise ValueError("weight length does not match dictionary size")
    if dictionary.num_design_points != problem.num_design_points:
        raise ValueError("dictionary and problem are tabulated on different designs")
    vals = dictionary.values
    s1 = weights @ vals
    s2 = weights @ (vals * vals)
    per_x = np.maximum(s2 - s1 * s1, 0.0)
    return float(problem.marginal_x @ per_x)


@dataclass(frozen=True)
class BernsteinReport:
    """Outcome of checking E L^2 <= B * E L over a sampled function class.

    Entries with second moment below degenerate_tol are excluded from
    max_ratio (the inequality is vacuous for an a.s. zero excess loss) and
    counted in `degenerate`.
    """

    constant_B: float
    max_ratio: float
    violations: int
    tested: int
    degenerate: int


def bernstein_check(
    class_sample,
    f_star: np.ndarray,
    problem: DiscreteProblem,
    B: float,
    degenerate_tol: float = 1e-13,
) -> BernsteinReport:
    """Check the second-moment condition for each function in class_sample.

    f_star must be the exact risk minimizer of the convex class the sample was
    drawn from; otherwise excess means can be negative and ratios meaningless.
    """
    max_ratio = 0.0
    violations = 0
    tested = 0
    degenerate = 0
    for f in class_sample:
        mean = excess_loss_mean(f, f_star, problem)
        second = excess_loss_second_moment(f, f_star, problem)
        if second <= degenerate_tol:
            degenerate += 1
            continue
        tested += 1
        ratio = second / mean if mean > 0 else np.inf
        max_ratio = max(max_ratio, ratio)
        if ratio > B:
            violations += 1
    return BernsteinReport(
        constant_B=float(B),
        max_ratio=float(max_ratio),
        violations=violations,
        tested=tested,
        degenerate=degenerate,
    )
