import math

import numpy as np
import pytest

import matchctl.fields as fl
from conftest import free_particle, random_shaping, random_state, random_system
from matchctl.control import GainSelection, cartpole_shaping, position_feedback_control
from matchctl.jets import jet_vars
from matchctl.lagrangian import (ShapingParams, SingularBlockError,
                                 controlled_implicit_sode, controlled_lagrangian_generic,
                                 controlled_lagrangian_value, ctilde_and_block_inverse,
                                 el_residual, feedback_control, fw_identity_residuals,
                                 lagrangian_value, legendre_transform, scalar_sigma_matrix,
                                 solve_accel, uncontrolled_sode)
from matchctl.matching import new_tau_closed_form
from matchctl.model import Dims, InclineParams, State, cartpole_system, incline_system


def fd_el_oracle(sys, state, accel, h=1e-5):
    """d/dt(dL/dqdot) - dL/dq by nested central differences of the Lagrangian."""
    n = sys.dims.total
    q, qd = state.q, state.qdot
    accel = np.asarray(accel, dtype=float)

    def dL_dqd(qq, vv, i):
        vp, vm = vv.copy(), vv.copy()
        vp[i] += h
        vm[i] -= h
        return (lagrangian_value(sys, State(q=qq, qdot=vp))
                - lagrangian_value(sys, State(q=qq, qdot=vm))) / (2 * h)

    out = np.zeros(n)
    for i in range(n):
        ddt = (dL_dqd(q + h * qd, qd + h * accel, i)
               - dL_dqd(q - h * qd, qd - h * accel, i)) / (2 * h)
        qp, qm = q.copy(), q.copy()
        qp[i] += h
        qm[i] -= h
        dq = (lagrangian_value(sys, State(q=qp, qdot=qd))
              - lagrangian_value(sys, State(q=qm, qdot=qd))) / (2 * h)
        out[i] = ddt - dq
    return out


# ---------------------------------------------------------------------------
# Lagrangian values
# ---------------------------------------------------------------------------

def test_free_particle_value():
    sys_ = free_particle()
    assert lagrangian_value(sys_, State(q=[0.0, 0.0], qdot=[1.0, 1.0])) == pytest.approx(1.0)


def test_cartpole_value_at_rest(reference_params, cartpole):
    st = State(q=[0.0, 0.3], qdot=[0.0, 0.0])
    assert lagrangian_value(cartpole, st) == pytest.approx(reference_params.d)


def test_cartpole_value_moving(reference_params, cartpole):
    # L = alpha/2 - V(0) = alpha/2 + d  (kinetic plus the value at the top)
    st = State(q=[0.0, 0.0], qdot=[1.0, 0.0])
    assert lagrangian_value(cartpole, st) == pytest.approx(
        0.5 * reference_params.alpha + reference_params.d)


# ---------------------------------------------------------------------------
# Euler-Lagrange covectors
# ---------------------------------------------------------------------------

def test_el_residual_free_particle():
    sys_ = free_particle()
    phi = el_residual(sys_, State(q=[0.1, 0.2], qdot=[0.3, 0.4]), [2.0, 3.0])
    assert np.allclose(phi, [2.0, 3.0])


def test_el_residual_cartpole_rest(reference_params, cartpole):
    st = State(q=[0.1, 0.0], qdot=[0.0, 0.0])
    phi = el_residual(cartpole, st, [0.0, 0.0])
    assert phi[0] == pytest.approx(reference_params.d * math.sin(0.1), abs=1e-14)
    assert phi[1] == 0.0
    assert np.abs(phi - fd_el_oracle(cartpole, st, [0.0, 0.0])).max() < 1e-8


def test_el_residual_matches_fd_oracle(cartpole):
    st = State(q=[0.5, -0.2], qdot=[0.7, -1.1])
    accel = np.array([0.4, -0.9])
    phi = el_residual(cartpole, st, accel)
    assert np.abs(phi - fd_el_oracle(cartpole, st, accel)).max() < 1e-7


def test_el_residual_onshell(cartpole):
    field = uncontrolled_sode(cartpole)
    st = State(q=[0.4, 0.1], qdot=[0.8, -0.6])
    acc = solve_accel(field, st)
    assert np.abs(el_residual(cartpole, st, acc)).max() < 1e-12


def test_el_residual_rejects_bad_accel(cartpole):
    with pytest.raises(ValueError):
        el_residual(cartpole, State(q=[0.0, 0.0], qdot=[0.0, 0.0]), [1.0])


# ---------------------------------------------------------------------------
# controlled Lagrangian
# ---------------------------------------------------------------------------

def test_unshaped_equals_plain(cartpole):
    shp = ShapingParams.zero(cartpole.dims)
    for seed in range(3):
        st = random_state(seed, cartpole.dims)
        assert controlled_lagrangian_value(cartpole, shp, st) == pytest.approx(
            lagrangian_value(cartpole, st), rel=1e-14)


def test_kinetic_only_shaping_at_rest(reference_params, cartpole):
    tau = ((fl.constant(1.0, 1),),)
    shp = ShapingParams(tau=tau, sigma=np.array([[2.0]]))
    st = State(q=[0.25, 0.0], qdot=[0.0, 0.0])
    assert controlled_lagrangian_value(cartpole, shp, st) == pytest.approx(
        -cartpole.V_value(st.q))


def test_term_by_term_oracle(reference_params, cartpole):
    # L(xd, sd + tau xd) + (1/2) sigma tau^2 xd^2 against the coordinate display
    p = reference_params
    tau = ((fl.constant(1.0, 1),),)
    shp = ShapingParams(tau=tau, sigma=np.array([[2.0]]))
    st = State(q=[0.0, 0.0], qdot=[1.0, 0.0])
    shifted = State(q=st.q, qdot=np.array([1.0, 0.0 + 1.0 * 1.0]))
    expect = lagrangian_value(cartpole, shifted) + 0.5 * 2.0 * 1.0 * 1.0
    assert controlled_lagrangian_value(cartpole, shp, st) == pytest.approx(expect, rel=1e-14)


def test_legendre_unshaped_is_momentum(cartpole):
    shp = ShapingParams.zero(cartpole.dims)
    st = State(q=[0.3, 0.1], qdot=[0.7, -0.2])
    g = cartpole.metric(st.q[:1])
    assert np.allclose(legendre_transform(cartpole, shp, st), g @ st.qdot)


def test_legendre_zero_velocity(cartpole, reference_params):
    shp = cartpole_shaping(reference_params, GainSelection(k=35.0, sigma=1.0))
    st = State(q=[0.4, 0.0], qdot=[0.0, 0.0])
    assert np.abs(legendre_transform(cartpole, shp, st)).max() == 0.0


def test_legendre_matches_display_incline(incline_params):
    # the two covector components of the modified-vertical-metric Lagrangian
    p = incline_params
    sys_ = incline_system(p)
    k, sigma, rho = 4.0, 1.3, 2.2
    tau_f = new_tau_closed_form(sys_, k)
    shp = ShapingParams(tau=((tau_f,),), sigma=scalar_sigma_matrix(sys_, sigma), rho=rho)
    x, xd, sd = 0.37, 0.8, -0.45
    st = State(q=[x, 0.0], qdot=[xd, sd])
    F = legendre_transform(sys_, shp, st)
    cpx = math.cos(p.psi - x)
    t = k * math.sqrt(p.alpha * p.gamma - p.beta ** 2 * cpx ** 2)
    F1 = (p.alpha + p.beta ** 2 * (rho - 1) * cpx ** 2 / p.gamma
          + 2 * p.beta * rho * t * cpx + p.gamma * (rho + sigma) * t ** 2) * xd \
        + rho * (p.beta * cpx + p.gamma * t) * sd
    F2 = rho * (p.beta * cpx + p.gamma * t) * xd + rho * p.gamma * sd
    assert F[0] == pytest.approx(F1, rel=1e-12)
    assert F[1] == pytest.approx(F2, rel=1e-12)


def test_legendre_is_velocity_gradient(cartpole, reference_params):
    # fiber derivative by jets of the controlled Lagrangian
    shp = cartpole_shaping(reference_params, GainSelection(k=35.0, sigma=1.0))
    st = State(q=[0.3, 0.2], qdot=[0.6, -0.8])
    seeds = jet_vars(list(st.qdot))
    val = controlled_lagrangian_generic(cartpole, shp, list(st.q), seeds)
    assert np.abs(val.g - legendre_transform(cartpole, shp, st)).max() < 1e-10


# ---------------------------------------------------------------------------
# block inverse
# ---------------------------------------------------------------------------

def test_block_inverse_unshaped_is_metric(cartpole):
    shp = ShapingParams.zero(cartpole.dims)
    bi = ctilde_and_block_inverse(cartpole, shp, np.array([0.3, 0.0]))
    g = cartpole.metric(np.array([0.3]))
    assert np.allclose(bi.C, g)
    assert np.abs(bi.W - np.linalg.inv(g)).max() < 1e-12


def test_block_inverse_cartpole_a11_negative(reference_params, cartpole):
    shp = cartpole_shaping(reference_params, GainSelection(k=35.0, sigma=1.0))
    bi = ctilde_and_block_inverse(cartpole, shp, np.array([0.0, 0.0]))
    p = reference_params
    tau0 = 35.0 * math.sqrt(p.alpha * p.gamma - p.beta ** 2)
    assert bi.A_ss[0, 0] == pytest.approx(
        p.alpha - (p.beta / p.gamma) * (p.beta + p.gamma * tau0), rel=1e-12)
    assert bi.A_ss[0, 0] < 0.0


@pytest.mark.parametrize("seed", range(6))
def test_block_inverse_random_systems(seed):
    # block formulas against dense inversion at ~100 states overall
    dims = Dims(2, 1) if seed % 2 else Dims(1, 2)
    sys_ = random_system(seed, dims)
    shp = random_shaping(seed + 50, sys_)
    n = dims.total
    for k in range(17):
        st = random_state(seed * 31 + k, dims)
        bi = ctilde_and_block_inverse(sys_, shp, st.q)
        assert np.abs(bi.C @ bi.W - np.eye(n)).max() < 1e-12
        assert np.abs(bi.W - np.linalg.inv(bi.C)).max() < 1e-10


def test_derivative_access_matches_fd(cartpole, reference_params):
    from matchctl.jets import fd_value_grad_hess
    shp = cartpole_shaping(reference_params, GainSelection(k=35.0, sigma=1.0))
    field = controlled_implicit_sode(cartpole, shp)
    st = State(q=[0.4, 0.1], qdot=[0.8, -0.5])
    qdd = np.array([0.3, -0.2])
    dq, dqd = field.phi_derivatives(st.q, st.qdot, qdd)
    u0 = np.concatenate([st.q, st.qdot])
    _, g_fd, _ = fd_value_grad_hess(lambda u: field.phi_floats(u[:2], u[2:], qdd), u0)
    assert np.abs(dq - g_fd[:, :2]).max() < 1e-7
    assert np.abs(dqd - g_fd[:, 2:]).max() < 1e-7
    expl = field.to_explicit()
    dGq, dGqd = expl.gamma_derivatives(st.q, st.qdot)
    _, g_fd2, _ = fd_value_grad_hess(lambda u: expl.gamma_floats(u[:2], u[2:]), u0)
    assert np.abs(dGq - g_fd2[:, :2]).max() < 1e-6
    assert np.abs(dGqd - g_fd2[:, 2:]).max() < 1e-6


def test_block_inverse_singular_group_block():
    dims = Dims(1, 1)
    sys_ = free_particle()
    bad = ShapingParams.zero(dims)
    sys_sing = type(sys_)(dims, sys_.g_ss, sys_.g_sg,
                          [[fl.constant(0.0, 1)]], sys_.V)
    with pytest.raises(SingularBlockError, match="g_gg"):
        ctilde_and_block_inverse(sys_sing, bad, np.array([0.0, 0.0]))


# ---------------------------------------------------------------------------
# feedback control and the controlled field
# ---------------------------------------------------------------------------

def test_feedback_zero_tau_is_zero(cartpole):
    shp = ShapingParams.zero(cartpole.dims)
    st = State(q=[0.4, 0.2], qdot=[0.5, -0.1])
    u = feedback_control(cartpole, shp, st, np.array([0.3, 0.7]))
    assert np.abs(u).max() == 0.0


def test_feedback_agrees_with_position_control(reference_params, cartpole):
    shp = cartpole_shaping(reference_params, GainSelection(k=35.0, sigma=1.0))
    field = controlled_implicit_sode(cartpole, shp)
    tau_fields = [shp.tau[0][0]]
    for seed in range(5):
        st = random_state(seed, cartpole.dims, x_max=1.2, v_max=3.0)
        acc = solve_accel(field, st)
        u_gen = feedback_control(cartpole, shp, st, acc)
        u_pos = position_feedback_control(cartpole, tau_fields, st.q)
        assert np.abs(u_gen - u_pos).max() < 1e-10


def test_feedback_incline_degenerates(reference_params):
    # rho = 1, psi = 0, no extra potential: matches the flat-system expression
    flat = incline_system(InclineParams(psi=0.0))
    cp = cartpole_system(reference_params)
    k = 20.0
    tau_i = new_tau_closed_form(flat, k)
    tau_c = new_tau_closed_form(cp, k)
    shp_i = ShapingParams(tau=((tau_i,),), sigma=scalar_sigma_matrix(flat, 1.0), rho=1.0)
    shp_c = ShapingParams(tau=((tau_c,),), sigma=scalar_sigma_matrix(cp, 1.0))
    st = State(q=[0.3, 0.4], qdot=[0.6, -0.2])
    accel = np.array([0.25, -0.5])
    assert np.allclose(feedback_control(flat, shp_i, st, accel),
                       feedback_control(cp, shp_c, st, accel), rtol=0, atol=1e-14)


def test_controlled_sode_zero_tau_matches_uncontrolled(cartpole):
    shp = ShapingParams.zero(cartpole.dims)
    ctrl = controlled_implicit_sode(cartpole, shp)
    plain = uncontrolled_sode(cartpole)
    st = State(q=[0.2, 0.5], qdot=[0.9, -0.4])
    accel = [0.1, 0.2]
    assert np.allclose(ctrl.phi_floats(st.q, st.qdot, accel),
                       plain.phi_floats(st.q, st.qdot, accel))


def test_controlled_sode_onshell_roundtrip(reference_params, cartpole):
    shp = cartpole_shaping(reference_params, GainSelection(k=35.0, sigma=1.0))
    field = controlled_implicit_sode(cartpole, shp)
    for seed in range(5):
        st = random_state(seed + 10, cartpole.dims, x_max=1.2, v_max=4.0)
        acc = solve_accel(field, st)
        assert np.abs(field.phi_floats(st.q, st.qdot, acc)).max() < 1e-12


def test_incline_sode_matches_display(incline_params):
    # group-row covector against the displayed closed-loop equation
    p = incline_params
    sys_ = incline_system(p)
    from matchctl.control import GainSelection as GS
    from matchctl.control import incline_hessian_check, incline_shaping
    shpA = ShapingParams(tau=((new_tau_closed_form(sys_, 35.0),),),
                         sigma=scalar_sigma_matrix(sys_, 1.0), rho=2.0)
    _, _, c_min = incline_hessian_check(p, shpA, GS(k=35.0, sigma=1.0, rho=2.0))
    gains = GS(k=35.0, sigma=1.0, rho=2.0, c=c_min + 1.0)
    shp = incline_shaping(p, gains)
    field = controlled_implicit_sode(sys_, shp)
    x, s, xd, sd = 0.31, -0.2, 0.7, 0.4
    xdd, sdd = -0.6, 0.9
    phi = field.phi_floats([x, s], [xd, sd], [xdd, sdd])
    from matchctl.control import incline_h
    cpx = math.cos(p.psi - x)
    D = p.alpha * p.gamma - p.beta ** 2 * cpx ** 2
    t = 35.0 * math.sqrt(D)
    tp = 35.0 * p.beta ** 2 * cpx * math.sin(x - p.psi) / math.sqrt(D)
    hx = incline_h(p, shp, x)
    dVeps_ds = p.gamma * p.grav * math.sin(p.psi) + s - hx - gains.s0
    expect_s = (p.beta * math.sin(p.psi - x) + p.gamma * tp) * xd ** 2 \
        + (p.beta * cpx + p.gamma * t) * xdd + p.gamma * sdd \
        + dVeps_ds / gains.rho - p.grav * p.gamma / gains.rho * math.sin(p.psi)
    expect_x = p.alpha * xdd + p.beta * cpx * sdd + p.d * math.sin(x)
    assert phi[1] == pytest.approx(expect_s, rel=1e-9)
    assert phi[0] == pytest.approx(expect_x, rel=1e-12)


def test_solve_accel_free_particle():
    sys_ = free_particle()
    field = uncontrolled_sode(sys_)
    acc = solve_accel(field, State(q=[0.3, 0.4], qdot=[1.0, -1.0]))
    assert np.abs(acc).max() == 0.0


def test_solve_accel_uncontrolled_equilibrium(cartpole):
    field = uncontrolled_sode(cartpole)
    acc = solve_accel(field, State(q=[0.0, 0.0], qdot=[0.0, 0.0]))
    assert np.abs(acc).max() < 1e-15


def test_solve_accel_matches_closed_form(reference_params, cartpole):
    from matchctl.control import cartpole_closed_loop
    gains = GainSelection(k=35.0, sigma=1.0)
    shp = cartpole_shaping(reference_params, gains)
    field = controlled_implicit_sode(cartpole, shp)
    loop = cartpole_closed_loop(reference_params, gains)
    st = State(q=[0.1, 0.0], qdot=[0.0, 0.0])
    assert np.abs(solve_accel(field, st) - loop.gamma_floats(st.q, st.qdot)).max() < 1e-12


# ---------------------------------------------------------------------------
# contraction identities
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(8))
def test_fw_identities_random(seed):
    dims = Dims(1, 2) if seed % 2 else Dims(2, 1)
    sys_ = random_system(seed + 20, dims)
    shp = random_shaping(seed + 60, sys_)
    st = random_state(seed + 200, dims)
    r1, r2 = fw_identity_residuals(sys_, shp, st)
    assert r1 < 1e-10
    assert r2 < 1e-10
