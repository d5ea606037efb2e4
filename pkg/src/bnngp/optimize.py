"""Hyperparameter optimization of the marginal log-likelihood.

Adam ascent on (log v_b, log v_w, log v_n) with the learning-rate decay rule
tied to reparameterized Monte-Carlo noise: after each update the objective is
re-evaluated with the same noise draw, and if it got worse the learning rate
is multiplied by 0.9.  Runs stop at an iteration cap or when a 50-iteration
moving average of the objective changes by less than 1e-4 in relative terms;
the final estimate is recomputed with a larger Monte-Carlo budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import likelihood
from .errors import InvalidInputError, NumericalError, OptimizationDivergedError
from .likelihood import MllEstimate
from .params import Hyperparams, Nonlinearity
from .rng import derive_seed

__all__ = ["OptState", "OptimizeResult", "optimize_hyperparams", "mll_sweep",
           "SweepCell"]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# spawn-key namespaces
_NS_ITER = 23
_NS_FINAL = 29


@dataclass
class OptState:
    """Adam state over the log-parameters; lr is non-increasing by design."""

    log_params: np.ndarray
    m: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lr: float = 0.1
    iteration: int = 0

    def ascend(self, grad: np.ndarray) -> None:
        """One Adam step in the ascent direction of ``grad``."""
        self.iteration += 1
        self.m = ADAM_BETA1 * self.m + (1.0 - ADAM_BETA1) * grad
        self.v = ADAM_BETA2 * self.v + (1.0 - ADAM_BETA2) * grad**2
        m_hat = self.m / (1.0 - ADAM_BETA1**self.iteration)
        v_hat = self.v / (1.0 - ADAM_BETA2**self.iteration)
        self.log_params = self.log_params + self.lr * m_hat / (
            np.sqrt(v_hat) + ADAM_EPS
        )

    @property
    def params(self) -> Hyperparams:
        return Hyperparams.from_log_array(self.log_params)


@dataclass(frozen=True)
class OptimizeResult:
    params: Hyperparams
    trace: np.ndarray            # forward MLL value per iteration
    lr_trace: np.ndarray
    final: MllEstimate
    converged: bool


def optimize_hyperparams(X, Y, D1: int, H, D2: int, phi: Nonlinearity,
                         init: Hyperparams, n_mc: int = 100, lr0: float = 0.1,
                         max_iters: int = 500, seed: int = 0,
                         n_mc_final: int = 1000, ma_window: int = 50,
                         rel_tol: float = 1e-4,
                         threads: int = 1) -> OptimizeResult:
    """Maximize the marginal log-likelihood over (v_b, v_w, v_n).

    ``H=None`` optimizes the closed-form no-bottleneck model with
    D1 + D2 + 1 hidden layers (the infinite-width column of a sweep); its
    final value is exact.  For finite H each iteration draws fresh
    reparameterization noise, so the gradient noise the decay rule reacts to
    is purely Monte-Carlo.
    """
    if init.v_b <= 0 or init.v_n <= 0:
        raise InvalidInputError("init must have strictly positive v_b, v_w, v_n")
    if lr0 <= 0:
        raise InvalidInputError("lr0 must be > 0")
    depth_inf = D1 + D2 + 1

    def mc_value_and_grad(params, it_seed):
        Xa, Ya = likelihood._validate_bottleneck_args(X, Y, D1, H, D2, n_mc)
        ell, dell = likelihood._mll_terms(
            Xa, Ya, D1, H, D2, params, phi, n_mc, it_seed, want_grad=True,
            threads=threads,
        )
        w = np.exp(ell - np.max(ell))
        w /= np.sum(w)
        return likelihood.logmeanexp(ell), dell @ w

    def value_only(params, it_seed):
        if H is None:
            return likelihood.mll_no_bottleneck(X, Y, depth_inf, params, phi)
        est = likelihood.mll_single_bottleneck(
            X, Y, D1, H, D2, params, phi, n_mc, it_seed, threads=threads
        )
        return est.value

    state = OptState(log_params=init.log_array(), lr=float(lr0))
    trace: list[float] = []
    lr_trace: list[float] = []
    converged = False
    for it in range(max_iters):
        it_seed = derive_seed(seed, _NS_ITER, it)
        if H is None:
            fwd = likelihood.mll_no_bottleneck(X, Y, depth_inf, state.params, phi)
            grad = likelihood.mll_no_bottleneck_gradient(
                X, Y, depth_inf, state.params, phi
            )
        else:
            fwd, grad = mc_value_and_grad(state.params, it_seed)
        if not (np.isfinite(fwd) and np.all(np.isfinite(grad))):
            raise OptimizationDivergedError(
                f"non-finite objective at iteration {it}", trace=trace
            )
        state.ascend(grad)
        # decay rule: re-evaluate with the same noise after the update
        if value_only(state.params, it_seed) < fwd:
            state.lr *= 0.9
        trace.append(float(fwd))
        lr_trace.append(state.lr)
        if len(trace) >= 2 * ma_window:
            new = float(np.mean(trace[-ma_window:]))
            old = float(np.mean(trace[-2 * ma_window:-ma_window]))
            if abs(new - old) < rel_tol * abs(old):
                converged = True
                break

    params = state.params
    if H is None:
        exact = likelihood.mll_no_bottleneck(X, Y, depth_inf, params, phi)
        final = MllEstimate(value=exact, n_mc=0, seed=seed, std_error=0.0)
    else:
        final = likelihood.mll_single_bottleneck(
            X, Y, D1, H, D2, params, phi, n_mc_final,
            derive_seed(seed, _NS_FINAL), threads=threads,
        )
    return OptimizeResult(
        params=params,
        trace=np.array(trace),
        lr_trace=np.array(lr_trace),
        final=final,
        converged=converged,
    )


@dataclass(frozen=True)
class SweepCell:
    """One architecture's optimized result; width None means no bottleneck."""

    width: int | None
    post_hidden: int
    params: Hyperparams | None
    mll_per_point: float
    error: str | None = None


def mll_sweep(X, Y, D1: int, H_list, D2_list, phi: Nonlinearity,
              init: Hyperparams, n_mc: int = 100, seed: int = 0,
              max_iters: int = 500, n_mc_final: int = 1000, lr0: float = 0.1,
              threads: int = 1) -> list[SweepCell]:
    """Optimized MLL per observation over the (width, post-depth) grid.

    The grid includes an infinite-width row (the closed-form no-bottleneck
    model).  Numerical failures are recorded per cell and the sweep
    continues; every cell is seeded independently of iteration order.
    """
    if not H_list or not D2_list:
        raise InvalidInputError("H_list and D2_list must be nonempty")
    n_points = np.asarray(X).shape[0]
    cells = []
    grid = [(int(w), i) for i, w in enumerate(H_list)] + [(None, len(H_list))]
    for width, wi in grid:
        for di, d2 in enumerate(D2_list):
            try:
                res = optimize_hyperparams(
                    X, Y, D1, width, int(d2), phi, init, n_mc=n_mc, lr0=lr0,
                    max_iters=max_iters, seed=derive_seed(seed, wi, di),
                    n_mc_final=n_mc_final, threads=threads,
                )
                cells.append(SweepCell(
                    width=width, post_hidden=int(d2), params=res.params,
                    mll_per_point=res.final.value / n_points,
                ))
            except NumericalError as exc:
                cells.append(SweepCell(
                    width=width, post_hidden=int(d2), params=None,
                    mll_per_point=float("nan"), error=str(exc),
                ))
    return cells
