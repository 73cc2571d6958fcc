"""Pulse-shape optimization: minimize the norm of the time-integrated dissipative generator.

The drive is eps(t) = omega_p + sum_n a_n (n pi / tau_p) cos(n pi t / tau_p);
every shape term integrates to zero over the window, so the net rotation
stays theta.  The objective is the Frobenius norm of the integral over the
gate of the interaction-picture dissipative generator, whose rates are all
proportional to lambda2.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize

from . import bath as bathmod
from . import dissipators as diss
from . import generators as gen
from .operators import bloch_superop, conjugate, coupling_operator, dagger, free_propagator
from .specs import BathSpec, ConfigError, ModelSpec, PulseSpec

N_COEFFS = 7
BOUND = 2.0
RESTARTS = 5
SUBSTEPS = 4000

DEPHASING_MODEL = ModelSpec(delta=1.0, xi=2.0, transverse=0.0)   # A = sz


@dataclass(frozen=True)
class OptResult:
    a: np.ndarray
    objective: float
    baseline: float
    iterations: int
    evaluations: int
    converged: bool
    restart: int


class GateObjective:
    """D(a) = || int_gate D_I(t) dt ||_F for one (model, bath, pulse window).

    The bath kernel and the pre-gate memory do not depend on the shape
    coefficients and are tabulated once.
    """

    def __init__(self, m: ModelSpec, b: BathSpec, p: PulseSpec, nsteps: int = SUBSTEPS,
                 history="dp", settle_time=None):
        if p.instantaneous:
            raise ConfigError("pulse optimization needs a finite gate window")
        if nsteps < 4 or nsteps % 2:
            raise ConfigError("nsteps must be even and >= 4 (Simpson rule)")
        self.m, self.b, self.nsteps, self.history = m, b, nsteps, history
        self.pulse = replace(p, fourier=None)
        if settle_time is None:
            settle_time = diss.default_settle_time(b)
        h = p.duration / nsteps
        self.x = np.arange(nsteps + 1) * h
        self.h = h
        self.t = p.tau_p1 + self.x
        self.a_op = coupling_operator(m)
        self.kernel = bathmod.bcf(b, self.x)
        self.memory = None
        if history == "dp":
            self.memory = (diss.lambda_reservoir(m, b, self.x, settle_time)
                           - diss.lambda_static(m, b, self.x))

    def pulse_for(self, a) -> PulseSpec:
        return replace(self.pulse, fourier=tuple(float(v) for v in a))

    def gate_lambda(self, a) -> np.ndarray:
        """Schrodinger-picture in-gate Lambda on the substep grid."""
        p = self.pulse_for(a)
        u = diss.gate_propagator(self.m, p, self.t)
        a_int = dagger(u) @ self.a_op @ u
        lam = conjugate(u, diss.causal_convolution(self.kernel, a_int, self.h))
        if self.memory is not None:
            dress = u @ free_propagator(self.m, -self.x)
            lam = lam + conjugate(dress, self.memory)
        return lam, u

    def integrated_generator(self, a) -> np.ndarray:
        lam, u = self.gate_lambda(a)
        g_s = gen.dissipative_generator(lam, self.a_op)
        o = bloch_superop(u)
        g_i = np.swapaxes(o, -1, -2) @ g_s @ o
        return simpson(g_i, x=self.x, axis=0)

    def __call__(self, a) -> float:
        return float(np.linalg.norm(self.integrated_generator(a)))


def _clip(a, bound):
    return np.clip(np.asarray(a, dtype=float), -bound, bound)


def _restart(args):
    objective, start, budget, bound, k = args
    res = minimize(objective, start, method="Nelder-Mead",
                   bounds=[(-bound, bound)] * len(start),
                   options={"maxfev": budget, "xatol": 1e-6, "fatol": 1e-12 * max(objective(start), 1e-300),
                            "adaptive": True})
    return k, _clip(res.x, bound), float(res.fun), int(res.nit), int(res.nfev), bool(res.success)


def optimize(m: ModelSpec, b: BathSpec, p: PulseSpec, init=None, budget: int = 2000,
             restarts: int = RESTARTS, bound: float = BOUND, seed: int = 0, nsteps: int = SUBSTEPS,
             mapper=map) -> OptResult:
    """Nelder-Mead from ``init`` plus random starts in the box |a_n| <= bound; returns the best.

    Ties are broken by restart index.  ``converged`` reports whether the best
    simplex met its tolerances within ``budget`` evaluations.
    """
    if budget < 100:
        raise ConfigError("budget must be >= 100 objective evaluations")
    objective = GateObjective(m, b, p, nsteps)
    n = N_COEFFS if init is None else len(init)
    init = np.zeros(n) if init is None else _clip(init, bound)
    rng = np.random.default_rng(seed)
    starts = [init] + [rng.uniform(-bound, bound, n) for _ in range(restarts - 1)]
    runs = list(mapper(_restart, [(objective, s, budget, bound, k) for k, s in enumerate(starts)]))
    k, a, val, nit, nfev, ok = min(runs, key=lambda r: (r[2], r[0]))
    return OptResult(a=a, objective=val, baseline=objective(np.zeros(n)), iterations=nit,
                     evaluations=sum(r[4] for r in runs), converged=ok, restart=k)


def linearized_update(m: ModelSpec, b: BathSpec, p: PulseSpec, n0, nsteps: int = SUBSTEPS):
    """Interaction-picture end-of-gate Bloch vector to first order: (1 + int D_I dt) (1, n0)."""
    objective = GateObjective(m, b, p, nsteps)
    y = np.concatenate([[1.0], np.asarray(n0, dtype=float)])
    return (y + objective.integrated_generator(p.fourier or np.zeros(N_COEFFS)) @ y)[1:]
