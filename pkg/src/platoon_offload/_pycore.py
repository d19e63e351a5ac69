"""Pure NumPy implementation of the hot solver kernels.

This is the reference twin of the compiled extension ``_ccore``: identical
entry points, identical iteration rules, NumPy arithmetic instead of C loops.
It is selected automatically when the extension is unavailable and is what the
parity tests compare the extension against.

Backend API (shared with ``_ccore``):
    project_capped_simplex, o2_value, dc_parts, power_surrogate_eval,
    bandwidth_objective_eval, solve_power_block, solve_bandwidth_block,
    bsum_solve, rates_matrix, slot_step

A "context" is any object with attributes gain (K x K), queue (K,),
mask (K x K bool), c_sigma, noise_psd, v_weight, tau, p_cap, w_cap and oma;
``platoon_offload.bsum.CommContext`` is the canonical one.

Per sender k with allowed targets n (queue[k] > queue[n]) the comm objective
uses, with delta_n = Q_k - Q_n > 0 and S the sender's total power:

    den_n  = gain_n * (power on strictly stronger targets) + w_k*N0 + c_sigma*S
    rate_n = w_k * log2(1 + p_n * gain_n / den_n)
    O2     = sum_k sum_n tau * (-delta_n) * rate_n + V * tau * total power

and the orthogonal (per-pair band) variant replaces den with
w_kn*N0 + c_sigma*p_kn. The convex/concave split keeps
F- = tau * sum w * delta * log2(den), F+ = O2 - F-.
"""

import math
from types import SimpleNamespace

import numpy as np

from .lyapunov import (
    Decision,
    constraint_violation,
    drift_penalty_objective,
    lyapunov_bound_check,
    optimal_cpu_freq,
    prune_links,
)
from .queueing import ComputeParams, QueueState, slot_energy, slot_flows, update_queue

LN2 = math.log(2.0)

SCHEME_LOCAL = 0
SCHEME_NOMA = 1
SCHEME_OMA = 2

name = "python"
compiled = False


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def project_capped_simplex(x: np.ndarray, cap: float, floor: float = 0.0) -> np.ndarray:
    """Euclidean projection onto {y >= floor, sum(y) <= cap}."""
    x = np.asarray(x, dtype=float)
    if floor != 0.0:
        n = x.shape[0]
        if cap <= n * floor:  # degenerate budget: ignore the floor
            return project_capped_simplex(x, cap)
        return floor + project_capped_simplex(x - floor, cap - n * floor)
    y = np.maximum(x, 0.0)
    total = y.sum()
    if total <= cap:
        return y
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, x.shape[0] + 1)
    theta_cand = (css - cap) / j
    rho = np.nonzero(u > theta_cand)[0][-1]
    return np.maximum(x - theta_cand[rho], 0.0)


# ---------------------------------------------------------------------------
# per-sender terms
# ---------------------------------------------------------------------------

def _sender_prep(ctx, k: int):
    """Targets of sender k sorted by ascending gain, with tie groups."""
    idx = np.flatnonzero(ctx.mask[k])
    if idx.size == 0:
        return None
    gains = ctx.gain[k, idx]
    order = np.argsort(gains, kind="stable")
    idx = idx[order]
    a = gains[order]
    delta = ctx.queue[k] - ctx.queue[idx]
    _, gid = np.unique(a, return_inverse=True)
    return idx, a, delta, gid


def _suffix_stronger(p: np.ndarray, gid: np.ndarray) -> np.ndarray:
    """Per target, total power on strictly larger-gain targets."""
    gsum = np.bincount(gid, weights=p)
    return p.sum() - np.cumsum(gsum)[gid]


def _prefix_weaker(e: np.ndarray, gid: np.ndarray) -> np.ndarray:
    """Per target, sum of e over strictly smaller-gain targets."""
    gsum = np.bincount(gid, weights=e)
    cum = np.cumsum(gsum)
    return cum[gid] - gsum[gid]


def _noma_sender_value_grad(p, w, a, delta, gid, ctx, want_grad: bool):
    """(F- , F+, grad F-, grad F+) of one sender's own terms.

    F+ includes the sender's V * tau * sum(p) energy term. With w == 0 the log
    terms vanish identically and only the energy term survives.
    """
    vt = ctx.v_weight * ctx.tau
    s = p.sum()
    if w <= 0.0:
        gm = np.zeros_like(p) if want_grad else None
        gp = np.full_like(p, vt) if want_grad else None
        return 0.0, vt * s, gm, gp
    c0 = ctx.tau * w
    den = a * _suffix_stronger(p, gid) + w * ctx.noise_psd + ctx.c_sigma * s
    dplus = den + p * a
    fminus = c0 * float(delta @ np.log2(den))
    fplus = -c0 * float(delta @ np.log2(dplus)) + vt * s
    if not want_grad:
        return fminus, fplus, None, None
    e_den = delta * a / den
    e_dp = delta * a / dplus
    gm = (c0 / LN2) * (ctx.c_sigma * np.sum(delta / den) + _prefix_weaker(e_den, gid))
    gp = -(c0 / LN2) * (
        ctx.c_sigma * np.sum(delta / dplus) + _prefix_weaker(e_dp, gid) + e_dp
    ) + vt
    return fminus, fplus, gm, gp


def _oma_sender_value_grad(p, w_row, a, delta, ctx, want_grad: bool):
    """Orthogonal variant: each pair has its own band, no cross interference."""
    vt = ctx.v_weight * ctx.tau
    s = p.sum()
    act = w_row > 0.0
    fminus = 0.0
    fplus = vt * s
    gm = np.zeros_like(p) if want_grad else None
    gp = np.full_like(p, vt) if want_grad else None
    if np.any(act):
        c0 = ctx.tau * w_row[act]
        den = w_row[act] * ctx.noise_psd + ctx.c_sigma * p[act]
        dplus = den + p[act] * a[act]
        fminus = float((c0 * delta[act]) @ np.log2(den))
        fplus += -float((c0 * delta[act]) @ np.log2(dplus))
        if want_grad:
            gm[act] = (c0 * delta[act] / LN2) * ctx.c_sigma / den
            gp[act] += -(c0 * delta[act] / LN2) * (ctx.c_sigma + a[act]) / dplus
    return fminus, fplus, gm, gp


def _band_piece_value_grad(w, h, c, delta, tau, nu, want_grad: bool):
    """-tau * w * sum(delta * log2(1 + c/(h + nu w))) and d/dw, for scalar w."""
    if w <= 0.0:
        return 0.0, 0.0
    den = h + nu * w
    ratio = c / den
    logs = np.log1p(ratio) / LN2
    val = -tau * w * float(delta @ logs)
    if not want_grad:
        return val, 0.0
    grad = -tau * float(delta @ (logs - (w * c * nu / LN2) / (den * (den + c))))
    return val, grad


# ---------------------------------------------------------------------------
# objective evaluation
# ---------------------------------------------------------------------------

def dc_parts(P, w, ctx):
    """(F+, F-) over all senders; F+ + F- equals the comm objective O2."""
    fplus_tot = 0.0
    fminus_tot = 0.0
    for k in range(ctx.gain.shape[0]):
        prep = _sender_prep(ctx, k)
        if prep is None:
            continue
        idx, a, delta, gid = prep
        p = np.asarray(P, dtype=float)[k, idx]
        if ctx.oma:
            fm, fp, _, _ = _oma_sender_value_grad(
                p, np.asarray(w, dtype=float)[k, idx], a, delta, ctx, False
            )
        else:
            fm, fp, _, _ = _noma_sender_value_grad(
                p, float(np.asarray(w, dtype=float)[k]), a, delta, gid, ctx, False
            )
        fplus_tot += fp
        fminus_tot += fm
    return fplus_tot, fminus_tot


def o2_value(P, w, ctx) -> float:
    """Comm objective O2(P, w), evaluated directly from the rate expression."""
    total = ctx.v_weight * ctx.tau * float(np.asarray(P, dtype=float).sum())
    rates = rates_matrix(P, w, ctx)
    diff = ctx.queue[None, :] - ctx.queue[:, None]
    return total + ctx.tau * float(np.sum(diff * rates))


def rates_matrix(P, w, ctx) -> np.ndarray:
    """Scheduled robust rates (bits/s) on allowed links, zero elsewhere."""
    P = np.asarray(P, dtype=float)
    w = np.asarray(w, dtype=float)
    K = ctx.gain.shape[0]
    rates = np.zeros((K, K))
    for k in range(K):
        prep = _sender_prep(ctx, k)
        if prep is None:
            continue
        idx, a, delta, gid = prep
        p = P[k, idx]
        if ctx.oma:
            wr = w[k, idx]
            act = (wr > 0.0) & (p > 0.0)
            if np.any(act):
                den = wr[act] * ctx.noise_psd + ctx.c_sigma * p[act]
                rates[k, idx[act]] = wr[act] * np.log1p(p[act] * a[act] / den) / LN2
        else:
            wk = float(w[k])
            if wk > 0.0:
                den = (
                    a * _suffix_stronger(p, gid)
                    + wk * ctx.noise_psd
                    + ctx.c_sigma * p.sum()
                )
                rates[k, idx] = wk * np.log1p(p * a / den) / LN2
    return rates


# ---------------------------------------------------------------------------
# projected gradient with backtracking
# ---------------------------------------------------------------------------

def _pg_minimize(x0, fun_grad, project, scale, cfg):
    """Monotone projected-gradient descent with an Armijo-type prox test.

    Accepted steps satisfy f(y) <= f(x) + g(x).(y-x) + |y-x|^2 / (2t), which
    for y = proj(x - t g) forces strict descent; the step grows after each
    success and halves on rejection.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    gmax = float(np.max(np.abs(g))) if g.size else 0.0
    if gmax == 0.0:
        return x, 0, True
    t = 0.25 * scale / gmax
    iters = 0
    converged = False
    for _ in range(cfg.max_inner):
        accepted = False
        for _ in range(cfg.max_backtracks):
            y = project(x - t * g)
            d = y - x
            dn2 = float(d @ d)
            if dn2 == 0.0:
                return x, iters, True
            fy, gy = fun_grad(y)
            if fy <= f + float(g @ d) + 0.5 * dn2 / t + 1e-12 * abs(f):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        step_inf = float(np.max(np.abs(d)))
        x, f, g = y, fy, gy
        iters += 1
        t *= cfg.step_growth
        if step_inf <= cfg.step_tol * scale:
            converged = True
            break
    return x, iters, converged


def power_surrogate_eval(k, p_row, P_ref, w_ref, ctx):
    """Sender-local convex surrogate around (P_ref, w_ref) and its gradient.

    Value is F+_k(p) + grad F-_k(ref) . (p - ref_k); adding the other senders'
    F+ terms (a constant) gives the full block surrogate.
    """
    prep = _sender_prep(ctx, k)
    if prep is None:
        raise ValueError(f"sender {k} has no allowed links")
    idx, a, delta, gid = prep
    pref = np.asarray(P_ref, dtype=float)[k, idx]
    p = np.asarray(p_row, dtype=float)[idx]
    if ctx.oma:
        wk = np.asarray(w_ref, dtype=float)[k, idx]
        _, _, gamma, _ = _oma_sender_value_grad(pref, wk, a, delta, ctx, True)
        _, fplus, _, gplus = _oma_sender_value_grad(p, wk, a, delta, ctx, True)
    else:
        wk = float(np.asarray(w_ref, dtype=float)[k])
        _, _, gamma, _ = _noma_sender_value_grad(pref, wk, a, delta, gid, ctx, True)
        _, fplus, _, gplus = _noma_sender_value_grad(p, wk, a, delta, gid, ctx, True)
    value = fplus + float(gamma @ (p - pref))
    grad = np.zeros(ctx.gain.shape[0])
    grad[idx] = gplus + gamma
    return value, grad


def solve_power_block(k, P, w, ctx, cfg):
    """Minimize sender k's surrogate over its power simplex; returns a row."""
    prep = _sender_prep(ctx, k)
    K = ctx.gain.shape[0]
    if prep is None:
        return np.zeros(K), 0, True
    idx, a, delta, gid = prep
    pref = np.asarray(P, dtype=float)[k, idx]
    if ctx.oma:
        wk = np.asarray(w, dtype=float)[k, idx]
        _, _, gamma, _ = _oma_sender_value_grad(pref, wk, a, delta, ctx, True)

        def fun_grad(p):
            _, fplus, _, gplus = _oma_sender_value_grad(p, wk, a, delta, ctx, True)
            return fplus + float(gamma @ p), gplus + gamma

    else:
        wk = float(np.asarray(w, dtype=float)[k])
        _, _, gamma, _ = _noma_sender_value_grad(pref, wk, a, delta, gid, ctx, True)

        def fun_grad(p):
            _, fplus, _, gplus = _noma_sender_value_grad(p, wk, a, delta, gid, ctx, True)
            return fplus + float(gamma @ p), gplus + gamma

    proj = lambda x: project_capped_simplex(x, ctx.p_cap)
    p_new, iters, converged = _pg_minimize(pref, fun_grad, proj, ctx.p_cap, cfg)
    row = np.zeros(K)
    row[idx] = p_new
    return row, iters, converged


def _bandwidth_pieces(P, ctx):
    """Fixed-power data for the band subproblem: (owner, h, c, delta) pieces."""
    pieces = []
    for k in range(ctx.gain.shape[0]):
        prep = _sender_prep(ctx, k)
        if prep is None:
            continue
        idx, a, delta, gid = prep
        p = np.asarray(P, dtype=float)[k, idx]
        if ctx.oma:
            for j, n in enumerate(idx):
                pieces.append(
                    ((k, n), ctx.c_sigma * p[j], p[j] * a[j], delta[j : j + 1])
                )
        else:
            h = a * _suffix_stronger(p, gid) + ctx.c_sigma * p.sum()
            pieces.append((k, h, p * a, delta))
    return pieces


def bandwidth_objective_eval(w_flat, P, ctx, pieces=None):
    """O2(P, w) and its gradient in the free band variables.

    ``w_flat`` holds one entry per active sender (or per active pair in the
    orthogonal variant), ordered as produced by ``_bandwidth_pieces``.
    """
    if pieces is None:
        pieces = _bandwidth_pieces(P, ctx)
    const = ctx.v_weight * ctx.tau * float(np.asarray(P, dtype=float).sum())
    val = const
    grad = np.zeros(len(pieces))
    for j, (_, h, c, delta) in enumerate(pieces):
        h_arr = h if isinstance(h, np.ndarray) else np.asarray([h] * len(delta), dtype=float)
        v, g = _band_piece_value_grad(
            float(w_flat[j]), h_arr, np.atleast_1d(c), delta, ctx.tau, ctx.noise_psd, True
        )
        val += v
        grad[j] = g
    return val, grad


def solve_bandwidth_block(P, w, ctx, cfg):
    """Minimize O2(P, .) over the shared band budget; returns the w array."""
    pieces = _bandwidth_pieces(P, ctx)
    K = ctx.gain.shape[0]
    shape = (K, K) if ctx.oma else (K,)
    if not pieces:
        return np.zeros(shape), 0, True
    w = np.asarray(w, dtype=float)
    w0 = np.array([w[key] for key, *_ in pieces], dtype=float)

    def fun_grad(wf):
        return bandwidth_objective_eval(wf, P, ctx, pieces)

    floor = cfg.w_floor
    proj = lambda x: project_capped_simplex(x, ctx.w_cap, floor)
    w_new, iters, converged = _pg_minimize(w0, fun_grad, proj, ctx.w_cap, cfg)
    out = np.zeros(shape)
    for j, (key, *_rest) in enumerate(pieces):
        out[key] = w_new[j]
    return out, iters, converged


# ---------------------------------------------------------------------------
# BSUM outer loop
# ---------------------------------------------------------------------------

def even_split_init(ctx):
    """Feasible start: budgets spread evenly over allowed links."""
    K = ctx.gain.shape[0]
    P = np.zeros((K, K))
    rows = ctx.mask.sum(axis=1)
    active = np.flatnonzero(rows)
    for k in active:
        P[k, ctx.mask[k]] = ctx.p_cap / rows[k]
    if ctx.oma:
        w = np.zeros((K, K))
        n_pairs = int(ctx.mask.sum())
        if n_pairs:
            w[ctx.mask] = ctx.w_cap / n_pairs
    else:
        w = np.zeros(K)
        if active.size:
            w[active] = ctx.w_cap / active.size
    return P, w


def bsum_solve(ctx, cfg, P_init=None, w_init=None):
    """Cyclic block updates of the sender powers then the band split.

    Returns (P, w, trace, n_outer, converged, inner_iters); the trace holds
    O2 at the initial point and after every outer iteration and never
    increases. Stops when the relative objective change drops below
    ``cfg.delta0`` or after ``cfg.max_outer`` iterations.
    """
    if P_init is None or w_init is None:
        P, w = even_split_init(ctx)
    else:
        P = np.asarray(P_init, dtype=float).copy()
        w = np.asarray(w_init, dtype=float).copy()
    senders = np.flatnonzero(ctx.mask.any(axis=1))
    trace = [o2_value(P, w, ctx)]
    inner_total = 0
    converged = False
    n_outer = 0
    for n_outer in range(1, cfg.max_outer + 1):
        for k in senders:
            row, iters, _ = solve_power_block(k, P, w, ctx, cfg)
            P[k] = row
            inner_total += iters
        w, iters, _ = solve_bandwidth_block(P, w, ctx, cfg)
        inner_total += iters
        trace.append(o2_value(P, w, ctx))
        if abs(trace[-1] - trace[-2]) <= cfg.delta0 * abs(trace[-2]):
            converged = True
            break
    # no-traffic senders release their band (w* = 0 when the power row is 0)
    if ctx.oma:
        w[np.asarray(P) == 0.0] = 0.0
    else:
        w[np.asarray(P).sum(axis=1) == 0.0] = 0.0
    return P, w, np.asarray(trace), n_outer, converged, inner_total


# ---------------------------------------------------------------------------
# full slot step
# ---------------------------------------------------------------------------

def make_context(gain, queue, mask, c_sigma, noise_psd, v_weight, tau, p_cap,
                 w_cap, oma):
    return SimpleNamespace(
        gain=np.asarray(gain, dtype=float),
        queue=np.asarray(queue, dtype=float),
        mask=np.asarray(mask, dtype=bool),
        c_sigma=float(c_sigma),
        noise_psd=float(noise_psd),
        v_weight=float(v_weight),
        tau=float(tau),
        p_cap=float(p_cap),
        w_cap=float(w_cap),
        oma=bool(oma),
    )


def slot_step(gain, queue, generated, c_sigma, noise_psd, v_weight, tau, p_cap,
              w_cap, f_max, energy_coeff, cycles_per_bit, scheme, cfg):
    """One scheduling slot: prune, solve, rate, account, and evolve queues.

    Composes the library operations directly; the compiled twin reimplements
    the same pipeline. Returns the tuple
    (q_next, f, P, w, rates, e_k, e_total, objective, o2, n_outer, converged,
    inner_iters, bound_lhs, bound_rhs, violation, identity_err).
    """
    q = np.asarray(queue, dtype=float)
    K = q.shape[0]
    mask = prune_links(q)
    f = optimal_cpu_freq(q, v_weight, energy_coeff, cycles_per_bit, f_max)
    oma = scheme == SCHEME_OMA
    n_outer = 0
    converged = True
    inner_iters = 0
    if scheme == SCHEME_LOCAL or not mask.any():
        P = np.zeros((K, K))
        w = np.zeros((K, K)) if oma else np.zeros(K)
        rates = np.zeros((K, K))
    else:
        ctx = make_context(
            gain, q, mask, c_sigma, noise_psd, v_weight, tau, p_cap, w_cap, oma
        )
        P, w, _trace, n_outer, converged, inner_iters = bsum_solve(ctx, cfg)
        rates = rates_matrix(P, w, ctx)

    compute = ComputeParams(
        max_freq=f_max, cycles_per_bit=cycles_per_bit, energy_coeff=energy_coeff
    )
    decision = Decision(power=P, bandwidth=w, cpu_freq=f)
    flows = slot_flows(rates, f, generated, compute, tau)
    e_k, e_total = slot_energy(P, f, compute, tau)
    terms = drift_penalty_objective(decision, q, rates, generated, compute, v_weight, tau)
    identity_err = abs(
        terms.total - (terms.arrival_term + terms.compute_term + terms.comm_term)
    ) / max(abs(terms.total), 1.0)
    state_next = update_queue(QueueState(backlog=q), flows)
    lhs, rhs = lyapunov_bound_check(q, state_next.backlog, flows, e_total, v_weight)
    violation = constraint_violation(decision, p_cap, w_cap, f_max)
    return (
        state_next.backlog,
        f,
        P,
        w,
        rates,
        e_k,
        e_total,
        terms.total,
        terms.comm_term,
        n_outer,
        converged,
        inner_iters,
        lhs,
        rhs,
        violation,
        identity_err,
    )
