"""Online identifiers for linear-in-parameters dynamics.

Four identifiers are provided:

* ``pure_gd_step`` -- unit-gain gradient descent on the stage cost.
* ``ef_rls_step`` -- recursive least squares with exponential forgetting.
* ``grls_step`` -- greedily-weighted RLS: exciting data points are kept in
  an excitation set whose contribution is refreshed every step instead of
  being forgotten, which prevents covariance windup once the trajectory
  settles onto an equilibrium.
* ``ie_mmai_step`` -- a multi-model gradient baseline with a one-shot least
  squares correction once the data pass the initial-excitation test. This
  is a deliberately approximate reconstruction of the published method; only
  its qualitative behavior is relied upon.

``batch_oracle`` solves the weighted normal equations that the greedy
recursion provably minimizes, from scratch at any step, and exists so the
recursive and batch routes can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dynamics import Trajectory
from .excitation import GreedySet, Regressor, greedy_offer, residual
from .linalg import inversion_lemma_update, min_eigenvalue_sym, solve_spd, symmetrize


def pure_gd_step(theta_hat: np.ndarray, phi: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One unit-gain negative-gradient step: theta + phi^T (y - phi theta)."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    return theta_hat + phi.T @ residual(y, phi, theta_hat)


def ef_rls_step(
    state: tuple[np.ndarray, np.ndarray],
    phi: np.ndarray,
    y: np.ndarray,
    alpha: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One exponentially-forgetting RLS update on a (P, theta_hat) pair."""
    p, theta_hat = state
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    p_next = inversion_lemma_update(p, phi, alpha)
    theta_next = np.asarray(theta_hat, dtype=float) + p_next @ (
        phi.T @ residual(y, phi, theta_hat)
    )
    return p_next, theta_next


@dataclass(frozen=True)
class GrlsState:
    """Full state of the greedily-weighted RLS recursion.

    ``P`` is the inverse Hessian of the weighted cost (symmetric positive
    definite throughout), ``theta`` the current estimate, ``excitation`` the
    greedy excitation set. ``alpha`` must be strictly below 1: the excitation
    set's refresh weight is 1 - alpha. Setting ``greedy_enabled`` to False
    makes every offer a rejection, which reduces the recursion exactly to
    EF-RLS.
    """

    P: np.ndarray
    theta: np.ndarray
    excitation: GreedySet
    alpha: float
    regressor: Regressor
    step: int = 0
    greedy_enabled: bool = True

    @classmethod
    def initial(
        cls,
        theta0: Sequence[float],
        regressor: Regressor,
        alpha: float = 0.94,
        p0_scale: float = 100.0,
        greedy_enabled: bool = True,
    ) -> "GrlsState":
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        theta0 = np.asarray(theta0, dtype=float)
        if theta0.shape != (regressor.n_params,):
            raise ValueError(
                f"theta0 has shape {theta0.shape}, expected ({regressor.n_params},)"
            )
        return cls(
            P=p0_scale * np.eye(regressor.n_params),
            theta=theta0,
            excitation=GreedySet.empty(regressor.n_params),
            alpha=alpha,
            regressor=regressor,
            greedy_enabled=greedy_enabled,
        )


def grls_step(state: GrlsState, x_k: float, x_next: float) -> GrlsState:
    """Consume the transition (x_k -> x_next) and return the updated state.

    The incoming regressor is offered to the excitation set. On acceptance
    the whole set, new point included, forms the update block scaled by
    sqrt(1 - alpha); on rejection the point is appended to the scaled set
    block with unit weight, to be forgotten exponentially like ordinary
    RLS data. Either way P advances through the matrix inversion lemma and
    the estimate moves by P_next @ (rhs - H theta).
    """
    phi = state.regressor(x_k)
    y = np.atleast_1d(np.asarray(x_next, dtype=float) - np.asarray(x_k, dtype=float))
    alpha = state.alpha
    scale = math.sqrt(1.0 - alpha)

    if state.greedy_enabled:
        excitation, accepted = greedy_offer(state.excitation, phi, y, state.step)
    else:
        excitation, accepted = state.excitation, False

    if accepted:
        phi_block = scale * excitation.regressors
        h = (1.0 - alpha) * excitation.fim
        rhs = (1.0 - alpha) * excitation.rhs
    else:
        phi_block = np.vstack([scale * excitation.regressors, phi])
        h = (1.0 - alpha) * excitation.fim + phi.T @ phi
        rhs = (1.0 - alpha) * excitation.rhs + phi.T @ y

    p_next = inversion_lemma_update(state.P, phi_block, alpha)
    theta_next = state.theta + p_next @ (rhs - h @ state.theta)
    return replace(
        state,
        P=p_next,
        theta=theta_next,
        excitation=excitation,
        step=state.step + 1,
    )


def run_grls(state: GrlsState, traj: Trajectory) -> list[GrlsState]:
    """Drive the recursion over a whole trajectory; returns the state after each step."""
    states = []
    for k in range(traj.step_count):
        state = grls_step(state, traj.states[k], traj.states[k + 1])
        states.append(state)
    return states


@dataclass(frozen=True)
class WeightedCostSpec:
    """Ingredients of the weighted least-squares cost the recursion minimizes."""

    alpha: float
    p0_inv: np.ndarray
    theta0: np.ndarray
    greedy_indices: frozenset[int]

    @classmethod
    def from_grls(cls, state: GrlsState, p0_scale: float, theta0: Sequence[float]):
        n = state.regressor.n_params
        return cls(
            alpha=state.alpha,
            p0_inv=np.eye(n) / p0_scale,
            theta0=np.asarray(theta0, dtype=float),
            greedy_indices=frozenset(state.excitation.indices),
        )


def cost_weight(spec: WeightedCostSpec, i: int, k: int) -> float:
    """Weight of residual i in the step-k cost.

    Excitation-set members get the refreshed weight (1 - alpha) * sum of
    alpha^(k-l) for l = i..k, which telescopes to 1 - alpha^(k-i+1); all
    other points keep the plain exponential discount alpha^(k-i).
    """
    if i > k:
        raise ValueError(f"weight requested for future point i={i} > k={k}")
    if i in spec.greedy_indices:
        if spec.alpha == 1.0:
            return 0.0
        return 1.0 - spec.alpha ** (k - i + 1)
    return spec.alpha ** (k - i)


def limiting_cost_weights(spec: WeightedCostSpec, i: int, k: int) -> float:
    """Limit of cost_weight as k grows with i fixed: 1 inside the set, else alpha^(k-i)."""
    if i > k:
        raise ValueError(f"weight requested for future point i={i} > k={k}")
    if i in spec.greedy_indices:
        return 1.0
    return spec.alpha ** (k - i)


def batch_oracle(
    traj: Trajectory, reg: Regressor, spec: WeightedCostSpec, k: int
) -> np.ndarray:
    """Minimize the weighted cost over data 0..k directly via the normal equations.

    Forms A = sum_i w_{i,k} phi_i^T phi_i + alpha^(k+1) P0^-1 and the matching
    right-hand side, then solves. Independent of the recursive route on
    purpose: this is the ground truth the recursion is checked against.
    """
    if k >= traj.step_count:
        raise ValueError(f"step {k} out of range for {traj.step_count} observations")
    if any(i > k for i in spec.greedy_indices):
        raise ValueError("greedy_indices contains points beyond step k")
    ages = k - np.arange(k + 1)
    weights = spec.alpha ** ages.astype(float)
    if spec.greedy_indices:
        greedy = np.fromiter(spec.greedy_indices, dtype=int)
        weights[greedy] = (
            0.0 if spec.alpha == 1.0 else 1.0 - spec.alpha ** (ages[greedy] + 1.0)
        )
    rows = np.vstack([reg(traj.states[i]) for i in range(k + 1)])
    ys = np.concatenate([np.atleast_1d(traj.observations[i]) for i in range(k + 1)])
    row_w = np.repeat(weights, reg.n_outputs)
    prior_scale = spec.alpha ** (k + 1)
    a = (rows * row_w[:, None]).T @ rows + prior_scale * spec.p0_inv
    rhs = rows.T @ (row_w * ys) + prior_scale * (spec.p0_inv @ spec.theta0)
    return solve_spd(symmetrize(a), rhs)


@dataclass(frozen=True)
class IeMmaiConfig:
    """Knobs of the multi-model baseline.

    ``ie_threshold`` is the smallest-eigenvalue level the accumulated FIM
    must clear before the one-shot correction fires; ``prox_weight``
    regularizes that correction toward each model's own estimate, so models
    stay distinguishable in directions the data leave flat; ``cost_alpha``
    discounts the running residual cost used for model selection.
    """

    ie_threshold: float = 1e-4
    prox_weight: float = 1e-8
    cost_alpha: float = 0.94


@dataclass(frozen=True)
class IeModel:
    theta: np.ndarray
    cost: float = 0.0


@dataclass(frozen=True)
class IeMmaiState:
    """Models plus the shared excitation accumulators of the IE-MMAI baseline."""

    models: tuple[IeModel, ...]
    fim: np.ndarray
    rhs: np.ndarray
    corrected: bool
    config: IeMmaiConfig
    step: int = 0

    @classmethod
    def initialize(
        cls,
        theta0: Sequence[float],
        n_models: int,
        spread: float = 0.25,
        seed: int = 0,
        config: IeMmaiConfig | None = None,
    ) -> "IeMmaiState":
        if n_models < 1:
            raise ValueError("need at least one model")
        theta0 = np.asarray(theta0, dtype=float)
        rng = np.random.default_rng(seed)
        models = tuple(
            IeModel(theta=theta0 + spread * rng.standard_normal(theta0.shape))
            for _ in range(n_models)
        )
        n = theta0.shape[0]
        return cls(
            models=models,
            fim=np.zeros((n, n)),
            rhs=np.zeros(n),
            corrected=False,
            config=config or IeMmaiConfig(),
        )

    def selected(self) -> np.ndarray:
        best = min(range(len(self.models)), key=lambda i: self.models[i].cost)
        return self.models[best].theta


def ie_mmai_step(
    state: IeMmaiState, phi: np.ndarray, y: np.ndarray
) -> tuple[IeMmaiState, np.ndarray]:
    """Advance every model one gradient step and return (state, selected estimate).

    Residual costs are discounted and accumulated before the update. Once the
    undiscounted FIM over all data so far passes the initial-excitation
    threshold, each model jumps to the proximally-regularized least squares
    solution over that window; afterwards the models keep descending as before.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    cfg = state.config

    models = []
    for model in state.models:
        r = residual(y, phi, model.theta)
        cost = cfg.cost_alpha * model.cost + 0.5 * float(r @ r)
        models.append(IeModel(theta=pure_gd_step(model.theta, phi, y), cost=cost))

    fim = state.fim + phi.T @ phi
    rhs = state.rhs + phi.T @ y
    corrected = state.corrected
    if not corrected and min_eigenvalue_sym(fim) >= cfg.ie_threshold:
        reg = cfg.prox_weight * np.eye(fim.shape[0])
        models = [
            IeModel(
                theta=solve_spd(fim + reg, rhs + cfg.prox_weight * m.theta),
                cost=m.cost,
            )
            for m in models
        ]
        corrected = True

    new_state = IeMmaiState(
        models=tuple(models),
        fim=fim,
        rhs=rhs,
        corrected=corrected,
        config=cfg,
        step=state.step + 1,
    )
    return new_state, new_state.selected()
