"""Bloch-basis time integration across the pre-gate, in-gate and post-gate phases.

The master equation is integrated in the Schrodinger picture with classic RK4.
For a linear equation y' = G(t) y every step is a fixed 4x4 matrix built from
G at the step start, midpoint and end, so the step matrices are assembled in
vectorized chunks and then applied in sequence.  method="expm" swaps the RK4
step for the exponential midpoint step expm(h G(t + h/2)), which stays stable
for stiff generators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from . import bath as bathmod
from . import dissipators as diss
from . import generators as gen
from .operators import (bloch_superop, coupling_operator, dagger, free_generator, free_propagator,
                        gate_unitary, hamiltonian_generator, min_eigenvalue, so3)
from .specs import BathSpec, ConfigError, ModelSpec, PulseSpec

FRAMES = ("schrodinger", "interaction")
MAX_SAMPLES = 100_000
POSITIVITY_THRESHOLD = -0.02
_CHUNK = 8192
_BLOWUP = 1e3
METHODS = ("rk4", "expm")


class DegenerateSteadyState(ArithmeticError):
    """The stationary equation of the Markovian generator has no unique solution."""


@dataclass(frozen=True)
class SimConfig:
    """One run: the gate starts at pulse.tau_p1 from ``initial`` (default: asymptotic state).

    ``dt`` is the post-gate step; inside a finite gate the step is refined so
    that dt <= 0.02 * 2 pi / (largest drive or precession frequency) and the
    window is an integer number of steps.
    """

    model: ModelSpec
    bath: BathSpec
    pulse: PulseSpec
    t_end: float
    dt: float = 0.01
    record_stride: int | None = None
    frame: str = "schrodinger"
    history: str = "dp"
    settle_time: float | None = None
    initial: tuple | None = None
    verify: bool = False
    verify_tol: float = 1e-6
    method: str = "rk4"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if self.dt > 0.02 * 2 * math.pi / self.model.delta:
            raise ConfigError(f"dt={self.dt} does not resolve the qubit precession (need <= "
                              f"{0.02 * 2 * math.pi / self.model.delta:.4g})")
        if not self.t_end >= self.pulse.tau_p2:
            raise ConfigError(f"t_end ({self.t_end}) must be >= tau_p2 ({self.pulse.tau_p2})")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.frame not in FRAMES:
            raise ConfigError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        if self.history not in diss.HISTORIES:
            raise ConfigError(f"history must be one of {diss.HISTORIES}, got {self.history!r}")
        if self.record_stride is not None and self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")
        if self.initial is not None:
            n = np.asarray(self.initial, dtype=float)
            # Bloch-Redfield states may exceed the unit ball by the audited tolerance
            if n.shape != (3,) or np.linalg.norm(n) > 1 - POSITIVITY_THRESHOLD:
                raise ConfigError(f"initial must be a Bloch vector with |n| <= {1 - POSITIVITY_THRESHOLD:g}")

    def resolved_settle_time(self):
        if self.settle_time is not None:
            return self.settle_time
        return diss.default_settle_time(self.bath)


@dataclass
class Trajectory:
    times: np.ndarray
    bloch: np.ndarray
    eps_min: np.ndarray
    frame: str = "schrodinger"
    meta: dict = field(default_factory=dict)

    @property
    def perp(self):
        return np.hypot(self.bloch[:, 0], self.bloch[:, 1])

    def at(self, t):
        """Bloch vector linearly interpolated at time(s) t."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, self.bloch[:, k]) for k in range(3)], axis=-1)


@dataclass(frozen=True)
class AuditReport:
    min_eps: float
    t_min: float
    passed: bool
    first_negative: float | None
    threshold: float = POSITIVITY_THRESHOLD


# ---------------------------------------------------------------------------
# steady state

def thermal_state(m: ModelSpec, b: BathSpec) -> np.ndarray:
    """Gibbs state of H0 (the weak-coupling limit of the asymptotic state)."""
    nz = 1.0 if b.temperature == 0 else math.tanh(m.delta / (2 * b.temperature))
    return np.array([0.0, 0.0, nz])


def asymptotic_state(m: ModelSpec, b: BathSpec, settle_time=None) -> np.ndarray:
    """Stationary Bloch vector of the free plus Markovian generator.

    Without a Markovian limit (sub-Ohmic bath at T > 0) the generator of the
    static Lambda at ``settle_time`` is used.  At lambda2 = 0 the
    lambda2 -> 0+ limit (the Gibbs state of H0) is returned.
    """
    if b.lambda2 == 0:
        return thermal_state(m, b)
    if settle_time is None:
        settle_time = diss.default_settle_time(b)
    if settle_time is None:
        lam = diss.lambda_markov(m, b)
    else:
        lam = diss.lambda_static(m, b, settle_time)
    g = free_generator(m) + gen.dissipative_generator(lam, coupling_operator(m))
    blk = g[1:, 1:]
    if np.linalg.cond(blk) > 1e12:
        raise DegenerateSteadyState("the Markovian generator has a degenerate stationary subspace")
    return np.linalg.solve(blk, -g[1:, 0])


# ---------------------------------------------------------------------------
# RK4 core

def _step_matrices(g0, gm, g1, h):
    """RK4 step matrices for y' = G y from G at the start, midpoint and end of each step."""
    eye = np.eye(4)
    k1 = g0
    k2 = gm @ (eye + 0.5 * h * k1)
    k3 = gm @ (eye + 0.5 * h * k2)
    k4 = g1 @ (eye + h * k3)
    return eye + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def propagate(generator, y0, t0, t1, nsteps, stride=1, method="rk4"):
    """Integrate y' = G(t) y on a uniform grid; returns (recorded times, recorded states, final state).

    ``generator(times)`` returns G with shape (len(times), 4, 4).  The start
    point is recorded, then every ``stride``-th step and always the final point.
    ``method="rk4"`` is classical Runge-Kutta; ``method="expm"`` uses the
    exponential midpoint step exp(h G(t + h/2)), second order but stable for
    arbitrarily stiff dissipative generators.
    """
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    h = (t1 - t0) / nsteps
    y = np.asarray(y0, dtype=float).copy()
    times, states = [t0], [y.copy()]
    for c0 in range(0, nsteps, _CHUNK):
        c1 = min(nsteps, c0 + _CHUNK)
        k = np.arange(c0, c1)
        nodes = t0 + h * np.arange(c0, c1 + 1)
        nodes[-1] = t0 + h * c1 if c1 < nsteps else t1
        mids = t0 + h * (k + 0.5)
        g_mids = generator(mids)
        if method == "rk4":
            g_nodes = generator(nodes)
            mats = _step_matrices(g_nodes[:-1], g_mids, g_nodes[1:], h)
        else:
            mats = expm(h * g_mids)
        peak = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for i, mat in enumerate(mats):
                y = mat @ y
                peak = max(peak, np.abs(y).max())
                step = c0 + i + 1
                if step % stride == 0 or step == nsteps:
                    times.append(nodes[i + 1])
                    states.append(y.copy())
        if not (np.all(np.isfinite(y)) and peak < _BLOWUP):
            hint = ("reduce dt or use method='expm'" if method == "rk4"
                    else "the generator itself has growing modes here")
            raise bathmod.ConvergenceError(f"integration unstable near t={nodes[-1]:.6g} (step {h:.3g}): {hint}")
    return np.array(times), np.array(states), y


# ---------------------------------------------------------------------------
# phase generators

def drive_field(m: ModelSpec, p: PulseSpec, t):
    """Schrodinger-picture control field h(t) with H_c = h . sigma / 2."""
    t = np.asarray(t, dtype=float)
    x = t - p.tau_p1
    eps = diss.pulse_drive(p, t)
    chi = p.axis_phase
    return np.stack([eps * np.cos(m.delta * x - chi), -eps * np.sin(m.delta * x - chi),
                     np.zeros_like(eps)], axis=-1)


def gate_step(cfg: SimConfig) -> tuple[int, float]:
    """(number of steps, step) used inside a finite gate window."""
    p, m = cfg.pulse, cfg.model
    probe = np.linspace(p.tau_p1, p.tau_p2, 4001)
    wmax = max(m.delta, float(np.max(np.abs(diss.pulse_drive(p, probe)))))
    hmax = min(cfg.dt, 0.02 * 2 * math.pi / wmax)
    n = max(1, int(math.ceil(p.duration / hmax - 1e-9)))
    return n, p.duration / n


def _gate_generator(cfg: SimConfig, nsteps: int, settle):
    """Generator callable for the in-gate phase (Lambda precomputed for shaped pulses)."""
    m, b, p = cfg.model, cfg.bath, cfg.pulse
    a = coupling_operator(m)
    free = free_generator(m)
    if p.shaped and cfg.history != "markov":
        grid_t, grid_lam = diss.general_pulse_grid(m, b, p, 2 * nsteps, settle, cfg.history)

        def lam_at(t):
            idx = np.rint((t - p.tau_p1) / (grid_t[1] - grid_t[0])).astype(int)
            return grid_lam[np.clip(idx, 0, len(grid_t) - 1)]
    else:
        def lam_at(t):
            return diss.lambda_schedule(m, b, p, np.minimum(t, p.tau_p2), cfg.history, settle)

    def g(t):
        return free + hamiltonian_generator(drive_field(m, p, t)) + gen.dissipative_generator(lam_at(t), a)
    return g


def _post_generator(cfg: SimConfig, settle):
    m, b, p = cfg.model, cfg.bath, cfg.pulse
    a = coupling_operator(m)
    free = free_generator(m)
    if cfg.history == "markov" and settle is None:
        fixed = free + gen.dissipative_generator(diss.lambda_markov(m, b), a)
        return lambda t: np.broadcast_to(fixed, np.shape(t) + (4, 4))

    def g(t):
        t = np.maximum(t, p.tau_p2)
        return free + gen.dissipative_generator(diss.lambda_schedule(m, b, p, t, cfg.history, settle), a)
    return g


def _reference_state(m: ModelSpec, b: BathSpec, settle):
    try:
        return asymptotic_state(m, b, settle)
    except DegenerateSteadyState:
        return thermal_state(m, b)


def _initial_state(cfg: SimConfig, settle):
    if cfg.initial is not None:
        return np.asarray(cfg.initial, dtype=float)
    # pure dephasing conserves populations; the Gibbs state is the physical pick
    return _reference_state(cfg.model, cfg.bath, settle)


def _to_frame(cfg: SimConfig, times, bloch):
    if cfg.frame == "schrodinger":
        return bloch
    x = times - cfg.pulse.tau_p1
    rot = so3(dagger(free_propagator(cfg.model, x)))
    return np.einsum("nij,nj->ni", rot, bloch)


def _run(cfg: SimConfig):
    m, p = cfg.model, cfg.pulse
    settle = cfg.resolved_settle_time()
    n0 = _initial_state(cfg, settle)
    y = np.concatenate([[1.0], n0])
    post_steps = max(1, int(math.ceil((cfg.t_end - p.tau_p2) / cfg.dt - 1e-9))) if cfg.t_end > p.tau_p2 else 0
    total = post_steps
    gate_n = 0
    if not p.instantaneous:
        gate_n, _ = gate_step(cfg)
        total += gate_n
    stride = cfg.record_stride or max(1, int(math.ceil(total / MAX_SAMPLES)))
    all_t, all_y = [np.array([p.tau_p1])], [y[None, :]]
    if p.instantaneous:
        y = bloch_superop(gate_unitary(p)) @ y
        all_t, all_y = [np.array([p.tau_p1])], [y[None, :]]
    else:
        g = _gate_generator(cfg, gate_n, settle)
        t_rec, y_rec, y = propagate(g, y, p.tau_p1, p.tau_p2, gate_n, stride, cfg.method)
        all_t.append(t_rec[1:])
        all_y.append(y_rec[1:])
    if post_steps:
        g = _post_generator(cfg, settle)
        t_rec, y_rec, y = propagate(g, y, p.tau_p2, cfg.t_end, post_steps, stride, cfg.method)
        all_t.append(t_rec[1:])
        all_y.append(y_rec[1:])
    times = np.concatenate(all_t)
    bloch = np.concatenate(all_y)[:, 1:]
    return times, bloch, settle


def integrate(cfg: SimConfig) -> Trajectory:
    """Integrate one configuration; optionally verify against a half-step rerun."""
    times, bloch, settle = _run(cfg)
    meta = {"settle_time": settle, "gate_steps": 0 if cfg.pulse.instantaneous else gate_step(cfg)[0],
            "delta": cfg.model.delta, "tau_p1": cfg.pulse.tau_p1, "tau_p2": cfg.pulse.tau_p2,
            "asymptotic": _reference_state(cfg.model, cfg.bath, settle)}
    if cfg.verify:
        fine = replace(cfg, dt=cfg.dt / 2, verify=False, record_stride=None)
        t2, b2, _ = _run(fine)
        ref = np.stack([np.interp(times, t2, b2[:, k]) for k in range(3)], axis=-1)
        err = float(np.max(np.abs(ref - bloch)))
        meta["step_halving_change"] = err
        if err > cfg.verify_tol:
            raise bathmod.ConvergenceError(
                f"step halving changed the trajectory by {err:.3e} (> {cfg.verify_tol:g}); reduce dt")
    out = _to_frame(cfg, times, bloch)
    return Trajectory(times, out, min_eigenvalue(bloch), cfg.frame, meta)


# ---------------------------------------------------------------------------
# coarse-grained runs (interaction picture, instantaneous pi/2 x-gate)

def integrate_coarse_grained(m: ModelSpec, b: BathSpec, p: PulseSpec, t_end: float, dt: float = 0.1,
                             initial=None, history="dp", record_stride=None) -> Trajectory:
    """Evolve with the closed-form coarse-grained generators in the interaction picture.

    ``history="factorized"`` keeps only the post-gate part.  Output is
    reported in the Schrodinger picture so it can be compared with
    :func:`integrate` directly.
    """
    if not p.instantaneous:
        raise diss.UnsupportedConfiguration("coarse-grained runs model an instantaneous gate")
    n0 = asymptotic_state(m, b) if initial is None else np.asarray(initial, dtype=float)
    y = bloch_superop(gate_unitary(p)) @ np.concatenate([[1.0], n0])

    def g(t):
        pre, post = gen.coarse_grained_closed_form(m, b, t - p.tau_p2)
        return post + pre if history == "dp" else post

    nsteps = max(1, int(math.ceil((t_end - p.tau_p2) / dt - 1e-9)))
    stride = record_stride or max(1, int(math.ceil(nsteps / MAX_SAMPLES)))
    times, states, _ = propagate(g, y, p.tau_p2, t_end, nsteps, stride)
    rot = bloch_superop(free_propagator(m, times - p.tau_p1))
    states = np.einsum("nij,nj->ni", rot, states)[:, 1:]
    return Trajectory(times, states, min_eigenvalue(states), "schrodinger",
                      {"coarse_grained": True, "delta": m.delta, "tau_p1": p.tau_p1, "tau_p2": p.tau_p2,
                       "asymptotic": _reference_state(m, b, None)})


# ---------------------------------------------------------------------------
# analysis

def positivity_audit(traj: Trajectory, threshold: float = POSITIVITY_THRESHOLD) -> AuditReport:
    i = int(np.argmin(traj.eps_min))
    neg = np.nonzero(traj.eps_min < 0)[0]
    return AuditReport(
        min_eps=float(traj.eps_min[i]),
        t_min=float(traj.times[i]),
        passed=bool(traj.eps_min[i] > threshold),
        first_negative=float(traj.times[neg[0]]) if neg.size else None,
        threshold=threshold,
    )


def linear_fit(traj: Trajectory, window, component=2):
    """(intercept, slope) of a least-squares line through one Bloch component over a time window."""
    lo, hi = window
    sel = (traj.times >= lo) & (traj.times <= hi)
    if sel.sum() < 3:
        raise ValueError(f"fit window {window} lies outside the trajectory")
    slope, intercept = np.polyfit(traj.times[sel], traj.bloch[sel, component], 1)
    return intercept, slope


def relaxation_delay(traj: Trajectory, reference: Trajectory, window) -> float:
    """Time offset of the late linear segment of n_z relative to a Markovian reference run.

    Both runs are fitted by lines over ``window`` (absolute times); the
    delay d solves a + b t = a_ref + b_ref (t - d), i.e. d = (a_ref - a) / b_ref.
    """
    a, _ = linear_fit(traj, window)
    a_ref, b_ref = linear_fit(reference, window)
    if b_ref == 0:
        raise ValueError("reference run has no relaxation slope")
    return (a_ref - a) / b_ref


def envelope_extrema(values):
    """Indices of strict local minima and maxima of a sampled curve."""
    v = np.asarray(values)
    inner = v[1:-1]
    mins = np.nonzero((inner < v[:-2]) & (inner <= v[2:]))[0] + 1
    maxs = np.nonzero((inner > v[:-2]) & (inner >= v[2:]))[0] + 1
    return mins, maxs


def coherence_deviation(traj: Trajectory, baseline) -> np.ndarray:
    """|n_perp(t) - b_perp| for a fixed Schrodinger-frame Bloch vector b.

    Measures the gate-induced coherence on top of the equilibrium coherence
    of the asymptotic state.  Interaction-frame trajectories are compared
    against the co-rotating baseline.
    """
    b = np.broadcast_to(np.asarray(baseline, dtype=float), traj.bloch.shape)
    if traj.frame == "interaction":
        m = ModelSpec(delta=traj.meta["delta"])
        x = traj.times - traj.meta["tau_p1"]
        b = np.einsum("nij,nj->ni", so3(dagger(free_propagator(m, x))), b)
    d = traj.bloch[:, :2] - b[:, :2]
    return np.hypot(d[:, 0], d[:, 1])


def period_envelope(times, values, period, start=None):
    """Window centres and maxima of ``values`` over consecutive windows of one period.

    Removes the within-period oscillation of the magnitude of an elliptically
    precessing vector; incomplete trailing windows are dropped.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t0 = times[0] if start is None else start
    k = np.floor((times - t0) / period + 1e-9).astype(int)
    nwin = int(k[-1])
    env = np.full(nwin, -np.inf)
    sel = (k >= 0) & (k < nwin)
    np.maximum.at(env, k[sel], values[sel])
    return t0 + (np.arange(nwin) + 0.5) * period, env


def recovery_amplitude(traj: Trajectory, baseline=None, period=None, floor=1e-3) -> float:
    """Largest relative rise of the coherence envelope from a local minimum to a later maximum.

    The coherence is :func:`coherence_deviation` from ``baseline`` (default:
    the asymptotic state recorded by the run), reduced to its per-period
    envelope.  Minima below ``floor`` are ignored since their ratios are
    dominated by round-off.  0 when the envelope never turns back up.
    """
    if baseline is None:
        baseline = traj.meta.get("asymptotic", np.zeros(3))
    if period is None:
        period = 2 * np.pi / traj.meta.get("delta", 1.0)
    start = traj.meta.get("tau_p2", traj.times[0])
    _, env = period_envelope(traj.times, coherence_deviation(traj, baseline), period, start)
    if env.size < 3:
        return 0.0
    mins, maxs = envelope_extrema(env)
    best = 0.0
    for i in mins:
        later = maxs[maxs > i]
        if later.size and env[i] >= floor:
            best = max(best, float(np.max(env[later]) / env[i] - 1))
    return best


def markov_continuation(cfg: SimConfig, traj: Trajectory, t_end=None) -> Trajectory:
    """Markovian evolution restarted from the state of ``traj`` at the end of the gate."""
    tp2 = cfg.pulse.tau_p2
    n0 = traj.at(tp2) if traj.frame == "schrodinger" else _to_schrodinger(cfg, traj, tp2)
    idle = PulseSpec(0.0, tau_p1=tp2, tau_p2=tp2)
    return integrate(replace(cfg, pulse=idle, history="markov", initial=tuple(n0),
                             t_end=cfg.t_end if t_end is None else t_end, frame="schrodinger",
                             verify=False))


def _to_schrodinger(cfg: SimConfig, traj: Trajectory, t):
    rot = so3(free_propagator(cfg.model, t - cfg.pulse.tau_p1))
    return rot @ traj.at(t)


def coherence_loss(traj: Trajectory, t_ref: float, times) -> np.ndarray:
    """-ln(|n_perp(t)| / |n_perp(t_ref)|) at the given absolute times."""
    c = np.hypot(*traj.at(np.asarray(times, dtype=float))[..., :2].T)
    c0 = np.hypot(*traj.at(t_ref)[:2])
    return -np.log(c / c0)


def crossover_time(tps, values, level=np.exp(-1)) -> float:
    """First pulse length at which ``values`` drops below ``level``, log-interpolated in tau_p."""
    tps = np.asarray(tps, dtype=float)
    v = np.asarray(values, dtype=float)
    below = np.nonzero(v < level)[0]
    if not below.size:
        return math.inf
    i = int(below[0])
    if i == 0:
        return float(tps[0])
    x0, x1 = tps[i - 1], tps[i]
    f = (v[i - 1] - level) / (v[i - 1] - v[i])
    if x0 > 0:
        return float(math.exp(math.log(x0) + f * (math.log(x1) - math.log(x0))))
    return float(x0 + f * (x1 - x0))


def _delay_point(args):
    m, b, theta, tp, window, history, dt = args
    cfg = SimConfig(m, b, PulseSpec(theta, tau_p1=0.0, tau_p2=tp), t_end=tp + window[1],
                    dt=dt, history=history)
    tr = integrate(cfg)
    return relaxation_delay(tr, markov_continuation(cfg, tr), (tp + window[0], tp + window[1]))


def relaxation_delay_curve(m: ModelSpec, b: BathSpec, tps, theta=np.pi, window=(40.0, 80.0),
                           dt=0.01, mapper=map):
    """Post-gate relaxation delays of dynamically prepared runs, normalized by the factorized instantaneous delay.

    Each delay is measured against Markovian evolution restarted from the
    run's own state at the end of the gate, so it isolates the post-gate
    memory; ``window`` is relative to the end of the gate.
    Returns (normalized delays, factorized instantaneous delay).
    """
    jobs = [(m, b, theta, 0.0, window, "factorized", dt)]
    jobs += [(m, b, theta, float(tp), window, "dp", dt) for tp in tps]
    out = list(mapper(_delay_point, jobs))
    return np.array(out[1:]) / out[0], out[0]


def _loss_point(args):
    m, b, theta, tp, after, history, dt = args
    after = np.asarray(after, dtype=float)
    cfg = SimConfig(m, b, PulseSpec(theta, tau_p1=0.0, tau_p2=tp), t_end=tp + after.max() + 1.0,
                    dt=dt, history=history)
    tr = integrate(cfg)
    ref = markov_continuation(cfg, tr)
    return coherence_loss(tr, tp, tp + after) - coherence_loss(ref, tp, tp + after)


def coherence_excess_curve(m: ModelSpec, b: BathSpec, tps, theta=np.pi / 2, after=(20.0, 40.0, 60.0, 80.0),
                           dt=0.01, mapper=map):
    """Post-gate coherence loss in excess of Markovian decay, normalized by the factorized instantaneous excess.

    Losses are -ln of the coherence ratio between each time in ``after``
    (relative to the end of the gate) and the end of the gate.  Returns the
    per-pulse mean over ``after``, the full (n_tp, n_after) array and the
    factorized reference excess.
    """
    jobs = [(m, b, theta, 0.0, after, "factorized", dt)]
    jobs += [(m, b, theta, float(tp), after, "dp", dt) for tp in tps]
    out = list(mapper(_loss_point, jobs))
    ratio = np.array(out[1:]) / out[0]
    return ratio.mean(axis=1), ratio, out[0]


def integrate_pure_dephasing(m: ModelSpec, b: BathSpec, initial, t_end: float, dt: float = 0.01,
                             record_stride=None) -> Trajectory:
    """Free precession plus the leading-order dephasing generator, starting at t = 0."""
    free = free_generator(m)

    def g(t):
        return free + gen.pure_dephasing_generator(m, b, t)

    nsteps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    stride = record_stride or max(1, int(math.ceil(nsteps / MAX_SAMPLES)))
    y0 = np.concatenate([[1.0], np.asarray(initial, dtype=float)])
    times, states, _ = propagate(g, y0, 0.0, t_end, nsteps, stride)
    states = states[:, 1:]
    return Trajectory(times, states, min_eigenvalue(states), "schrodinger", {})
