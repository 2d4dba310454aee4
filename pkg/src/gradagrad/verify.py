"""Executable checks for the optimizer's identities, inequalities and rates.

Checks are pure functions over traces, runs, or gradient sequences; they
never mutate optimizer state. Each returns a CheckReport whose passed flag
is equivalent to worst_violation <= the check's tolerance.

Trace-based checks expect the full consecutive trace sequence of a run
(starting at step 0), since several identities relate step k to step k-1.
"""

from dataclasses import dataclass

import numpy as np

from .core import (
    BRANCH_CAPPED,
    BRANCH_NEGATIVE,
    AdaGrad,
    GradaGrad,
    HyperParams,
    StepTrace,
)

TOL_IDENTITY = 1e-12
TOL_MOMENTUM = 1e-10
TOL_FINITE_DIFF = 1e-5


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_violation: float
    location: tuple[int, int] | None = None  # (step, coordinate)
    details: str = ""


def _report(name, worst, tol, location, details=""):
    worst = float(worst)
    return CheckReport(
        name=name,
        passed=worst <= tol,
        worst_violation=worst,
        location=location,
        details=details or f"tolerance {tol:g}",
    )


def check_errnegativity(traces: list[StepTrace], rho: float | None = None) -> CheckReport:
    """Restricted-increase inequality on every negative-branch step:

        g^2 / A_{k+1} - rho * g * m_prev / A_k <= 0

    evaluated from trace values alone: rho * g * m_prev = g^2 - v_raw, so
    the rho argument is informational only. Meaningful for traces produced
    with the adaptive clip; a fixed clip r need not satisfy the inequality.
    Vacuously passes when no negative branch occurred.
    """
    worst = 0.0
    location = None
    count = 0
    for t, tr in enumerate(traces):
        for i, branch in enumerate(tr.branch):
            if branch != BRANCH_NEGATIVE:
                continue
            if t == 0:
                raise ValueError("negative branch in the first trace: traces must start at step 0")
            count += 1
            prev = traces[t - 1]
            g_sq = tr.g[i] ** 2
            term_new = g_sq / tr.a_after[i]
            term_old = (g_sq - tr.v_raw[i]) / prev.a_after[i]
            scaled = (term_new - term_old) / max(1.0, abs(term_new), abs(term_old))
            if scaled > worst:
                worst = scaled
                location = (tr.k, i)
    return _report(
        "errnegativity",
        worst,
        TOL_IDENTITY,
        location,
        f"{count} negative-branch coordinate-steps, tolerance {TOL_IDENTITY:g}",
    )


def alpha_identity_sides(gs) -> tuple[float, float]:
    """Both sides of the rho=1 accumulator identity:

        g_0^2 + sum_k (g_k^2 - g_k g_{k-1})
          = g_0^2/2 + g_n^2/2 + sum_k (g_{k+1} - g_k)^2 / 2
    """
    gs = np.asarray(gs, dtype=float)
    if gs.size == 0:
        raise ValueError("need at least one gradient")
    lhs = gs[0] ** 2 + float(np.sum(gs[1:] ** 2 - gs[1:] * gs[:-1]))
    rhs = 0.5 * gs[0] ** 2 + 0.5 * gs[-1] ** 2 + 0.5 * float(np.sum(np.diff(gs) ** 2))
    return lhs, rhs


def check_alpha_identity_rho1(gs) -> CheckReport:
    """rho=1 identity check; requires every increment g_k^2 - g_k g_{k-1}
    to be nonnegative (otherwise the no-reparameterization precondition
    fails and the identity is not asserted)."""
    gs = np.asarray(gs, dtype=float)
    v = gs[1:] ** 2 - gs[1:] * gs[:-1]
    if np.any(v < 0):
        k_bad = int(np.argmax(v < 0)) + 1
        return CheckReport(
            name="alpha_identity_rho1",
            passed=True,
            worst_violation=0.0,
            location=(k_bad, 0),
            details=f"precondition not met: increment at k={k_bad} is negative; identity not asserted",
        )
    lhs, rhs = alpha_identity_sides(gs)
    worst = abs(lhs - rhs) / (1.0 + abs(lhs))
    return _report(
        "alpha_identity_rho1", worst, TOL_IDENTITY, None, f"lhs={lhs!r} rhs={rhs!r}"
    )


def check_adagrad_equivalence(problem, steps: int, gamma: float, x0=None) -> CheckReport:
    """With rho=0 (practical mode, beta=0, unconstrained) the diagonal
    stepper accumulates exactly g^2 and never rescales gamma, so its
    trajectory must match AdaGrad's coordinate-for-coordinate."""
    if x0 is None:
        x0 = np.ones(problem.dim)
    gg = GradaGrad(x0, HyperParams(gamma0=gamma, rho=0.0, beta=0.0, mode="practical"))
    ag = AdaGrad(x0, gamma=gamma)
    worst = 0.0
    location = None
    for k in range(steps):
        gg.step(problem.grad_full(gg.x))
        ag.step(problem.grad_full(ag.x))
        denom = np.maximum(1.0, np.maximum(np.abs(gg.x), np.abs(ag.x)))
        dev = np.abs(gg.x - ag.x) / denom
        i = int(np.argmax(dev))
        if dev[i] > worst:
            worst = float(dev[i])
            location = (k, i)
    return _report("adagrad_equivalence", worst, TOL_IDENTITY, location, f"{steps} steps")


def check_finite_diff(problem, point, h: float = 1e-6) -> CheckReport:
    """Central-difference validation of the exact gradient at a point.

    Skipped (vacuous pass) when the objective is not smooth within 2h of
    the point, e.g. at a kink of the absolute-value objective.
    """
    point = np.asarray(point, dtype=float)
    if not problem.smooth_at(point, 2.0 * h):
        return CheckReport(
            name="finite_diff",
            passed=True,
            worst_violation=0.0,
            details="skipped: objective not smooth at the evaluation point",
        )
    grad = problem.grad_full(point)
    worst = 0.0
    location = None
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = h
        fd = (problem.loss_full(point + e) - problem.loss_full(point - e)) / (2.0 * h)
        rel = abs(fd - grad[i]) / max(1.0, abs(grad[i]))
        if rel > worst:
            worst = rel
            location = (0, i)
    return _report("finite_diff", worst, TOL_FINITE_DIFF, location, f"h={h:g}")


def check_convergence_trend(
    problem,
    optimizer_factory,
    x0,
    n_small: int,
    factor: int = 4,
    n_seeds: int = 10,
    threshold: float = 0.75,
    seed0: int = 0,
) -> CheckReport:
    """Averaged-iterate error ratio e(factor*n) / e(n) over seeded runs.

    The 1/sqrt(n) rate predicts a ratio of 1/sqrt(factor); the default
    threshold 0.75 at factor 4 leaves room for constants and transients.
    The threshold is recorded in the report. Runs that are already
    converged at n (error below 1e-14) pass vacuously.
    """
    if problem.f_star is None:
        raise ValueError("trend check needs a problem with known optimal value")
    errs_small = []
    errs_big = []
    for s in range(n_seeds):
        opt = optimizer_factory(np.asarray(x0, dtype=float))
        state = problem.init_state(seed0 + s)
        f_small = None
        for _ in range(factor * n_small):
            opt.step(problem.grad_sample(opt.x, state))
            if opt.k == n_small:
                f_small = problem.loss_full(opt.averaged_iterate())
        errs_small.append(f_small - problem.f_star)
        errs_big.append(problem.loss_full(opt.averaged_iterate()) - problem.f_star)
    e_small = float(np.mean(errs_small))
    e_big = float(np.mean(errs_big))
    if e_small < 1e-14:
        return CheckReport(
            name="convergence_trend",
            passed=True,
            worst_violation=0.0,
            details=f"vacuous pass: e({n_small}) = {e_small:g} already converged",
        )
    ratio = e_big / e_small
    return CheckReport(
        name="convergence_trend",
        passed=ratio <= threshold,
        worst_violation=ratio,
        details=(
            f"e({n_small})={e_small:g} e({factor * n_small})={e_big:g} "
            f"ratio={ratio:g} threshold={threshold:g} seeds={n_seeds}"
        ),
    )


def check_monotone_and_cap(
    traces: list[StepTrace], d_inf: float | None = None, gamma0: float | None = None
) -> CheckReport:
    """alpha and gamma never decrease, gamma stays at or below the cap, and
    state changes match the branch taken (alpha moves only on init/capped/
    positive branches, gamma only on negative ones)."""
    worst = 0.0
    location = None
    details = []
    for t, tr in enumerate(traces):
        if t == 0:
            gamma_prev = (
                np.full_like(tr.gamma_after, gamma0) if gamma0 is not None else tr.gamma_after
            )
            alpha_prev = np.zeros_like(tr.alpha_after)
        else:
            gamma_prev = traces[t - 1].gamma_after
            alpha_prev = traces[t - 1].alpha_after
        for i, branch in enumerate(tr.branch):
            viol = max(
                (alpha_prev[i] - tr.alpha_after[i]) / max(1.0, abs(alpha_prev[i])),
                (gamma_prev[i] - tr.gamma_after[i]) / max(1.0, abs(gamma_prev[i])),
            )
            if d_inf is not None:
                viol = max(viol, (tr.gamma_after[i] - d_inf) / d_inf)
            if branch == BRANCH_NEGATIVE:
                if tr.alpha_after[i] != alpha_prev[i]:
                    viol = max(viol, abs(tr.alpha_after[i] - alpha_prev[i]))
                    details.append(f"alpha changed on a negative branch at k={tr.k} i={i}")
            elif tr.gamma_after[i] != gamma_prev[i]:
                viol = max(viol, abs(tr.gamma_after[i] - gamma_prev[i]))
                details.append(f"gamma changed on a {branch} branch at k={tr.k} i={i}")
            if viol > worst:
                worst = viol
                location = (tr.k, i)
    return _report("monotone_and_cap", worst, 0.0, location, "; ".join(details[:3]))


def check_reparam_invariance(traces: list[StepTrace], d_inf: float | None = None) -> CheckReport:
    """On every negative-branch step where the cap did not bind,

        gamma_{k+1} / sqrt(alpha_k - v_clipped) = gamma_k / sqrt(alpha_k)

    i.e. the rescale leaves the step size unchanged before v is absorbed.

    With d_inf given, capped steps are those with gamma at or above it;
    without it, a binding cap is self-detected as gamma landing materially
    below the uncapped rescale value (only an under-growth could hide
    there, and that direction is covered by the monotonicity check).
    """
    worst = 0.0
    location = None
    count = 0
    for t, tr in enumerate(traces):
        for i, branch in enumerate(tr.branch):
            if branch != BRANCH_NEGATIVE:
                continue
            if t == 0:
                raise ValueError("negative branch in the first trace: traces must start at step 0")
            gamma_prev = traces[t - 1].gamma_after[i]
            alpha = tr.alpha_after[i]  # unchanged on the negative branch
            if d_inf is not None:
                if tr.gamma_after[i] >= d_inf:
                    continue  # cap bound; the identity is intentionally broken
            else:
                uncapped = gamma_prev * np.sqrt(1.0 - tr.v_clipped[i] / alpha)
                if tr.gamma_after[i] < uncapped * (1.0 - 1e-9):
                    continue
            count += 1
            lhs = tr.gamma_after[i] / np.sqrt(alpha - tr.v_clipped[i])
            rhs = gamma_prev / np.sqrt(alpha)
            rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
            if rel > worst:
                worst = rel
                location = (tr.k, i)
    return _report(
        "reparam_invariance", worst, TOL_IDENTITY, location, f"{count} uncapped negative steps"
    )


@dataclass
class RunHistory:
    """Full iterate/auxiliary/direction history of a diagonal run."""

    xs: list[np.ndarray]
    zs: list[np.ndarray]
    ms: list[np.ndarray]
    traces: list[StepTrace]
    beta: float


def record_run(opt: GradaGrad, grad_fn, steps: int) -> RunHistory:
    """Step a diagonal optimizer `steps` times, recording everything the
    identity checks need. grad_fn maps the current iterate to a gradient."""
    xs = [opt.x.copy()]
    zs = [opt.z.copy()]
    ms = []
    traces = []
    for _ in range(steps):
        traces.append(opt.step(grad_fn(opt.x)))
        xs.append(opt.x.copy())
        zs.append(opt.z.copy())
        ms.append(opt.m_prev.copy())
    return RunHistory(xs=xs, zs=zs, ms=ms, traces=traces, beta=opt.params.beta)


def check_momentum_identities(run: RunHistory) -> CheckReport:
    """The two coupling identities of the momentum form:

        z_k = x_k / (1 - beta) - beta * x_{k-1} / (1 - beta)   (k >= 1)
        m_k = A_{k+1} * (x_k - x_{k+1})                         (every k)
    """
    beta = run.beta
    worst_z = 0.0
    location = None
    for k in range(1, len(run.xs)):
        z_expected = run.xs[k] / (1.0 - beta) - beta * run.xs[k - 1] / (1.0 - beta)
        rel = np.abs(run.zs[k] - z_expected) / np.maximum(1.0, np.abs(z_expected))
        i = int(np.argmax(rel))
        if rel[i] > worst_z:
            worst_z = float(rel[i])
            location = (k, i)
    worst_m = 0.0
    for k, m in enumerate(run.ms):
        expected = run.traces[k].a_after * (run.xs[k] - run.xs[k + 1])
        rel = np.abs(m - expected) / np.maximum(1.0, np.abs(expected))
        i = int(np.argmax(rel))
        if rel[i] > worst_m:
            worst_m = float(rel[i])
            if worst_m > worst_z:
                location = (k, i)
    worst = max(worst_z, worst_m)
    return _report(
        "momentum_identities",
        worst,
        TOL_MOMENTUM,
        location,
        f"z-identity worst {worst_z:g}, direction-identity worst {worst_m:g}",
    )
