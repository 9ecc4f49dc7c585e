"""Fixed-step trajectory integration, energy-drift measurement and CSV output.

Classical fourth-order Runge-Kutta at fixed step: reproducibility of golden
trajectories matters more than adaptive speed at this scale.  Observer
columns (controls, shaped energy) are evaluated at every recorded step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lagrangian import ExplicitSode
from .model import Dims, State

__all__ = ["Trajectory", "integrate", "energy_drift", "write_csv"]


@dataclass
class Trajectory:
    dims: Dims | None
    times: np.ndarray
    states: np.ndarray                  # (N, 2n): coordinates then velocities
    controls: np.ndarray | None = None  # (N, n_u)
    energies: np.ndarray | None = None  # (N,)
    events: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.states.shape[1] // 2 if self.states.ndim == 2 else 0

    def q(self) -> np.ndarray:
        return self.states[:, : self.n]

    def qdot(self) -> np.ndarray:
        return self.states[:, self.n:]


def integrate(field_: ExplicitSode, state0: State, dt: float, t_end: float,
              control: Callable | None = None,
              energy: Callable | None = None,
              guard: Callable | None = None,
              guard_kind: str = "domain_exit") -> Trajectory:
    """March the field with fixed-step RK4 from state0 for t_end seconds.

    ``guard(q, qdot) -> bool`` halts integration (event recorded) when true;
    non-finite states always halt with a "nonfinite" event.  ``control`` and
    ``energy`` are vectorized observers (times, Q, Qd) -> columns evaluated on
    the recorded samples.
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    n = field_.n
    n_steps = int(round(t_end / dt))
    events: list = []

    if n == 2 and field_.gamma2 is not None:
        times, states = _rk4_pair(field_.gamma2, state0, dt, n_steps, guard, guard_kind, events)
    else:
        times, states = _rk4_array(field_, state0, dt, n_steps, guard, guard_kind, events)

    traj = Trajectory(dims=field_.dims, times=times, states=states, events=events)
    Q, Qd = traj.q(), traj.qdot()
    if control is not None:
        cols = np.asarray(control(times, Q, Qd), dtype=float)
        traj.controls = cols.reshape(len(times), -1)
    if energy is not None:
        traj.energies = np.asarray(energy(times, Q, Qd), dtype=float).reshape(-1)
    return traj


def _rk4_pair(gamma2, state0: State, dt: float, n_steps: int, guard, guard_kind, events):
    """Scalar fast path for two-coordinate systems."""
    x, th = float(state0.q[0]), float(state0.q[1])
    xd, thd = float(state0.qdot[0]), float(state0.qdot[1])
    half = 0.5 * dt
    sixth = dt / 6.0
    out = np.empty((n_steps + 1, 4))
    out[0] = (x, th, xd, thd)
    kept = 1
    for i in range(n_steps):
        a1, b1 = gamma2(x, th, xd, thd)
        x2 = x + half * xd; th2 = th + half * thd
        xd2 = xd + half * a1; thd2 = thd + half * b1
        a2, b2 = gamma2(x2, th2, xd2, thd2)
        x3 = x + half * xd2; th3 = th + half * thd2
        xd3 = xd + half * a2; thd3 = thd + half * b2
        a3, b3 = gamma2(x3, th3, xd3, thd3)
        x4 = x + dt * xd3; th4 = th + dt * thd3
        xd4 = xd + dt * a3; thd4 = thd + dt * b3
        a4, b4 = gamma2(x4, th4, xd4, thd4)
        x += sixth * (xd + 2 * xd2 + 2 * xd3 + xd4)
        th += sixth * (thd + 2 * thd2 + 2 * thd3 + thd4)
        xd += sixth * (a1 + 2 * a2 + 2 * a3 + a4)
        thd += sixth * (b1 + 2 * b2 + 2 * b3 + b4)
        out[kept] = (x, th, xd, thd)
        kept += 1
        t_now = (i + 1) * dt
        if not (math.isfinite(x) and math.isfinite(th)
                and math.isfinite(xd) and math.isfinite(thd)):
            events.append((t_now, "nonfinite"))
            break
        if guard is not None and guard(out[kept - 1, :2], out[kept - 1, 2:]):
            events.append((t_now, guard_kind))
            break
    times = np.arange(kept) * dt
    return times, out[:kept]


def _rk4_array(field_: ExplicitSode, state0: State, dt: float, n_steps: int,
               guard, guard_kind, events):
    n = field_.n
    q = state0.q.astype(float).copy()
    qd = state0.qdot.astype(float).copy()
    out = np.empty((n_steps + 1, 2 * n))
    out[0, :n] = q
    out[0, n:] = qd
    kept = 1
    for i in range(n_steps):
        a1 = field_.gamma_floats(q, qd)
        q2, qd2 = q + 0.5 * dt * qd, qd + 0.5 * dt * a1
        a2 = field_.gamma_floats(q2, qd2)
        q3, qd3 = q + 0.5 * dt * qd2, qd + 0.5 * dt * a2
        a3 = field_.gamma_floats(q3, qd3)
        q4, qd4 = q + dt * qd3, qd + dt * a3
        a4 = field_.gamma_floats(q4, qd4)
        q = q + dt / 6.0 * (qd + 2 * qd2 + 2 * qd3 + qd4)
        qd = qd + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        out[kept, :n] = q
        out[kept, n:] = qd
        kept += 1
        t_now = (i + 1) * dt
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(qd)):
            events.append((t_now, "nonfinite"))
            break
        if guard is not None and guard(q, qd):
            events.append((t_now, guard_kind))
            break
    times = np.arange(kept) * dt
    return times, out[:kept]


def energy_drift(traj: Trajectory) -> float:
    """max_t |E(t) - E(0)| / max(1, |E(0)|)."""
    if traj.energies is None or traj.energies.size == 0:
        raise ValueError("trajectory has no recorded energies")
    e0 = traj.energies[0]
    return float(np.abs(traj.energies - e0).max() / max(1.0, abs(e0)))


def _columns(traj: Trajectory) -> tuple[list[str], list[np.ndarray]]:
    n = traj.n
    if traj.dims is not None:
        ns, ng = traj.dims.n_shape, traj.dims.n_group
    else:
        ns, ng = n, 0
    names = ["t"]
    cols = [traj.times]
    Q, Qd = traj.q(), traj.qdot()
    for i in range(ns):
        names.append(f"x{i + 1}")
        cols.append(Q[:, i])
    for a in range(ng):
        names.append(f"theta{a + 1}")
        cols.append(Q[:, ns + a])
    for i in range(ns):
        names.append(f"xdot{i + 1}")
        cols.append(Qd[:, i])
    for a in range(ng):
        names.append(f"thetadot{a + 1}")
        cols.append(Qd[:, ns + a])
    if traj.controls is not None:
        for j in range(traj.controls.shape[1]):
            names.append(f"u{j + 1}")
            cols.append(traj.controls[:, j])
    if traj.energies is not None:
        names.append("E")
        cols.append(traj.energies)
    return names, cols


def write_csv(traj: Trajectory, destination) -> int:
    """Write the trajectory with 17 significant digits; returns the row count.

    Events are appended as trailing comment lines `# event,<t>,<kind>`.
    """
    names, cols = _columns(traj)
    rows = len(traj.times)
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for r in range(rows):
            fh.write(",".join(f"{col[r]:.17g}" for col in cols) + "\n")
        for (t, kind) in traj.events:
            fh.write(f"# event,{t:.17g},{kind}\n")
    return rows
