"""Non-monotone adaptive gradient steppers and baselines.

GradaGrad keeps an AdaGrad-style update x <- x - (gamma / sqrt(alpha)) * g,
but each accumulator increment is v = g^2 - rho * g * m_prev instead of g^2.
Positive v is added to alpha as usual; negative v is absorbed by rescaling
the numerator, gamma <- gamma * sqrt(1 - v / alpha), which leaves alpha
unchanged and *grows* the effective step size. The clip v >= -r * alpha
bounds that growth so the per-step gradient error never increases.

Two variants are provided: ScalarGradaGrad (one gamma/alpha pair scales the
whole gradient, fixed or adaptive clip r) and GradaGrad (per-coordinate
gamma/alpha with momentum and box projection, always adaptive r). AdaGrad,
SGD and Adam baselines share the same single-step interface.

All state is double precision; numerators much below 1e-6 lose adaptivity
in single precision.
"""

import math
from dataclasses import dataclass

import numpy as np

BRANCH_INIT = "init"
BRANCH_CAPPED = "capped"
BRANCH_POSITIVE = "positive"
BRANCH_NEGATIVE = "negative"
BRANCHES = (BRANCH_INIT, BRANCH_CAPPED, BRANCH_POSITIVE, BRANCH_NEGATIVE)


@dataclass
class HyperParams:
    """Tunables shared by the GradaGrad steppers.

    gamma0   initial step-size numerator, > 0
    rho      adaptivity constant weighting the consecutive-gradient inner
             product, >= 0; 2.0 is the recommended default
    beta     classical momentum in [0, 1), diagonal variant only
    g_inf    element-wise gradient bound; g_inf^2 seeds the accumulator at
             step 0 in theory mode
    d_inf    cap on gamma (diagonal variant); the default 1e10 is
             effectively uncapped for practical use
    r_fixed  fixed clip parameter for the scalar variant (default 1.0, a
             plain tunable with no principled value); None opts into the
             adaptive clip. The diagonal variant always clips adaptively.
    mode     "theory" seeds alpha with g_inf^2 at step 0; "practical" uses
             the observed first gradient instead
    """

    gamma0: float = 1.0
    rho: float = 2.0
    beta: float = 0.0
    g_inf: float = 1.0
    d_inf: float = 1e10
    r_fixed: float | None = 1.0
    mode: str = "practical"

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        if self.g_inf <= 0:
            raise ValueError(f"g_inf must be positive, got {self.g_inf}")
        if self.d_inf <= 0:
            raise ValueError(f"d_inf must be positive, got {self.d_inf}")
        if self.r_fixed is not None and self.r_fixed < 0:
            raise ValueError(f"r_fixed must be nonnegative, got {self.r_fixed}")
        if self.mode not in ("theory", "practical"):
            raise ValueError(f"mode must be 'theory' or 'practical', got {self.mode!r}")
        if self.mode == "theory" and self.gamma0 > self.d_inf:
            # gamma only grows, so a cap below the start would never be reachable
            raise ValueError(
                f"theory mode needs gamma0 <= d_inf, got {self.gamma0} > {self.d_inf}"
            )


@dataclass
class CoordState:
    """One coordinate's numerator/accumulator pair.

    alpha never decreases; gamma never decreases. The preconditioner entry
    is sqrt(alpha) / gamma once alpha > 0.
    """

    gamma: float
    alpha: float


@dataclass
class Domain:
    """Feasible set: unconstrained (default) or an axis-aligned box."""

    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if (self.lower is None) != (self.upper is None):
            raise ValueError("box domain needs both lower and upper bounds")
        if self.lower is not None:
            self.lower = np.asarray(self.lower, dtype=float)
            self.upper = np.asarray(self.upper, dtype=float)
            if self.lower.shape != self.upper.shape:
                raise ValueError("box bounds must have matching shapes")
            if not np.all(self.lower < self.upper):
                raise ValueError("box bounds must satisfy lower < upper element-wise")

    @property
    def kind(self) -> str:
        return "unconstrained" if self.lower is None else "box"

    @classmethod
    def box(cls, lower, upper) -> "Domain":
        return cls(lower=lower, upper=upper)


@dataclass
class StepTrace:
    """Per-step, per-coordinate record of one optimizer step.

    The scalar variant emits a single record (i = 0) whose g field holds
    the gradient norm, the whole-vector analogue of a coordinate entry;
    only g^2 and v enter the downstream checks, so the formulas coincide.
    r is NaN on steps where no clip happened.
    """

    k: int
    g: np.ndarray
    v_raw: np.ndarray
    v_clipped: np.ndarray
    branch: list[str]
    r: np.ndarray
    gamma_after: np.ndarray
    alpha_after: np.ndarray
    a_after: np.ndarray
    f_sample: float | None = None


# ---------------------------------------------------------------------------
# elementary operations
# ---------------------------------------------------------------------------

def compute_v_scalar(g, g_prev, rho: float) -> float:
    """Whole-vector increment v = ||g||^2 - rho * <g, g_prev>."""
    g = np.asarray(g, dtype=float)
    g_prev = np.asarray(g_prev, dtype=float)
    if g.shape != g_prev.shape:
        raise ValueError(f"shape mismatch: {g.shape} vs {g_prev.shape}")
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    return float(g @ g - rho * (g @ g_prev))


def compute_v_coord(
    g_i: float, m_prev_i: float, rho: float, k: int, gamma_i: float, params: HyperParams
) -> tuple[float, str]:
    """Coordinate increment and the branch that produced it.

    Step 0 seeds the accumulator (g_inf^2 in theory mode, g_i^2 otherwise);
    a coordinate whose gamma has reached the cap reverts to plain squared
    accumulation; everything else uses g_i^2 - rho * g_i * m_prev_i.
    The cap comparison is gamma >= d_inf: the min() in the negative branch
    lands gamma exactly on the cap only up to rounding.
    """
    if k < 0:
        raise ValueError(f"step index must be nonnegative, got {k}")
    if k == 0:
        v = params.g_inf ** 2 if params.mode == "theory" else g_i * g_i
        return v, BRANCH_INIT
    if gamma_i >= params.d_inf:
        return g_i * g_i, BRANCH_CAPPED
    v = g_i * g_i - rho * g_i * m_prev_i
    return v, (BRANCH_NEGATIVE if v < 0 else BRANCH_POSITIVE)


def clip_negative_v(
    v: float,
    g_i: float,
    m_prev_i: float,
    rho: float,
    alpha_i: float,
    r_fixed: float | None = None,
) -> tuple[float, float]:
    """Clip a negative v to -r * alpha so the step-size growth stays bounded.

    With r_fixed absent, r = (rho * m_prev_i / g_i)^2 - 1, the largest value
    for which the per-step gradient error stays nonpositive. v < 0 forces
    rho * g_i * m_prev_i > g_i^2 >= 0, so g_i != 0 and r > 0.
    """
    if v >= 0:
        raise ValueError(f"clip applies to negative v only, got {v}")
    if alpha_i <= 0:
        raise ValueError(
            f"negative v with alpha = {alpha_i}: the accumulator is positive "
            "before any negative branch can occur"
        )
    if r_fixed is not None:
        r = float(r_fixed)
    else:
        r = (rho * m_prev_i / g_i) ** 2 - 1.0
    return max(v, -r * alpha_i), r


def apply_reparam(gamma: float, alpha: float, v: float) -> float:
    """Absorb a nonpositive v into the numerator: gamma * sqrt(1 - v/alpha).

    The rescaled pair keeps the current step size: the implied accumulator
    alpha - v satisfies gamma' / sqrt(alpha - v) = gamma / sqrt(alpha).
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if v > 0:
        raise ValueError(f"reparameterization applies to v <= 0, got {v}")
    return gamma * math.sqrt(1.0 - v / alpha)


def accumulate_positive(alpha: float, v: float) -> float:
    """Plain accumulator update alpha + v for nonnegative v."""
    if v < 0:
        raise ValueError(f"negative v must be clipped and reparameterized, got {v}")
    return alpha + v


def preconditioner_entry(coord: CoordState) -> float:
    """Diagonal preconditioner entry sqrt(alpha) / gamma."""
    if coord.alpha <= 0:
        raise ValueError("unbootstrapped coordinate: alpha is zero")
    return math.sqrt(coord.alpha) / coord.gamma


def project(point, domain: Domain) -> np.ndarray:
    """Euclidean projection onto the domain (identity, or box clamp)."""
    p = np.asarray(point, dtype=float)
    if domain.kind == "unconstrained":
        return p
    if p.shape != domain.lower.shape:
        raise ValueError(f"dimension mismatch: point {p.shape}, box {domain.lower.shape}")
    return np.clip(p, domain.lower, domain.upper)


# ---------------------------------------------------------------------------
# steppers
# ---------------------------------------------------------------------------

class Optimizer:
    """Base single-step optimizer: owns the iterate, the step counter, and
    the running average over all iterates (x0 included)."""

    def __init__(self, x0):
        x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
        if x.ndim != 1:
            raise ValueError(f"x0 must be one-dimensional, got shape {x.shape}")
        self.x = x
        self.k = 0
        self._x_sum = x.copy()

    @property
    def dim(self) -> int:
        return self.x.size

    def step(self, g):
        raise NotImplementedError

    def averaged_iterate(self) -> np.ndarray:
        """Arithmetic mean of x0 ... x_k; requires at least one step."""
        if self.k == 0:
            raise ValueError("no steps taken yet")
        return self._x_sum / (self.k + 1)

    def stats(self) -> dict:
        """Step-size statistics for run records; keys absent where undefined."""
        return {}

    def _check_grad(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != self.x.shape:
            raise ValueError(f"gradient shape {g.shape} does not match iterate {self.x.shape}")
        return g

    def _commit(self, x_new: np.ndarray):
        self.x = x_new
        self.k += 1
        self._x_sum += x_new


class ScalarGradaGrad(Optimizer):
    """Scalar-step-size GradaGrad: one gamma/alpha pair for the whole vector.

        v = ||g||^2 - rho * <g, g_prev>
        v >= 0:  alpha += v
        v <  0:  v = max(v, -r * alpha);  gamma *= sqrt(1 - v / alpha)
        x <- x - (gamma / sqrt(alpha)) * g

    r is params.r_fixed, or derived from the gradient pair when r_fixed is
    None. gamma is uncapped in this variant. A zero gradient before anything
    has accumulated leaves the state untouched (zero-step rule).
    """

    def __init__(self, x0, params: HyperParams | None = None):
        super().__init__(x0)
        self.params = params if params is not None else HyperParams()
        self.coord = CoordState(gamma=self.params.gamma0, alpha=0.0)
        self.g_prev = np.zeros_like(self.x)

    def step(self, g) -> StepTrace:
        g = self._check_grad(g)
        p = self.params
        k = self.k
        v = compute_v_scalar(g, self.g_prev, p.rho)
        if v >= 0:
            self.coord.alpha = accumulate_positive(self.coord.alpha, v)
            v_clip, r, branch = v, math.nan, BRANCH_POSITIVE
        else:
            # ||g||^2 and <g, g_prev> play the (g_i, m_prev_i) roles: the clip
            # only uses the ratio rho*m/g = rho*<g,g_prev>/||g||^2.
            v_clip, r = clip_negative_v(
                v, float(g @ g), float(g @ self.g_prev), p.rho, self.coord.alpha, p.r_fixed
            )
            self.coord.gamma = apply_reparam(self.coord.gamma, self.coord.alpha, v_clip)
            branch = BRANCH_NEGATIVE
        if self.coord.alpha > 0:
            x_new = self.x - (self.coord.gamma / math.sqrt(self.coord.alpha)) * g
            a = preconditioner_entry(self.coord)
        else:
            x_new = self.x.copy()
            a = 0.0
        self.g_prev = g.copy()
        self._commit(x_new)
        return StepTrace(
            k=k,
            g=np.array([float(np.linalg.norm(g))]),
            v_raw=np.array([v]),
            v_clipped=np.array([v_clip]),
            branch=[branch],
            r=np.array([r]),
            gamma_after=np.array([self.coord.gamma]),
            alpha_after=np.array([self.coord.alpha]),
            a_after=np.array([a]),
        )

    def stats(self) -> dict:
        c = self.coord
        ainv = c.gamma / math.sqrt(c.alpha) if c.alpha > 0 else None
        return {
            "gamma_mean": c.gamma,
            "gamma_max": c.gamma,
            "alpha_mean": c.alpha,
            "alpha_max": c.alpha,
            "ainv_mean": ainv,
        }


class GradaGrad(Optimizer):
    """Diagonal GradaGrad with momentum and projection.

    Per coordinate i at step k:

        k == 0            -> v = g_inf^2 (theory mode) or g_i^2
        gamma_i >= d_inf  -> v = g_i^2   (cap reached: plain accumulation)
        otherwise         -> v = g_i^2 - rho * g_i * m_prev_i

        v >= 0:  alpha_i += v
        v <  0:  v = max(v, -r * alpha_i), r = (rho * m_prev_i / g_i)^2 - 1
                 gamma_i = min(gamma_i * sqrt(1 - v / alpha_i), d_inf)

    Then, with A = sqrt(alpha) / gamma element-wise:

        z <- proj(z - g / A);  x <- beta * x + (1 - beta) * z
        m <- A * (x_old - x)

    m feeds the next step's v. With beta = 0 on an unconstrained domain,
    z tracks x exactly and m equals g.
    """

    def __init__(self, x0, params: HyperParams | None = None, domain: Domain | None = None):
        super().__init__(x0)
        self.params = params if params is not None else HyperParams()
        self.domain = domain if domain is not None else Domain()
        if self.domain.kind == "box" and self.domain.lower.shape != self.x.shape:
            raise ValueError("domain bounds must match the iterate dimension")
        self.z = self.x.copy()
        self.m_prev = np.zeros_like(self.x)
        self.gamma = np.full(self.dim, self.params.gamma0, dtype=float)
        self.alpha = np.zeros(self.dim, dtype=float)

    def step(self, g) -> StepTrace:
        g = self._check_grad(g)
        p = self.params
        k = self.k
        d = self.dim
        v_raw = np.empty(d)
        v_clip = np.empty(d)
        r_arr = np.full(d, math.nan)
        branches = []
        for i in range(d):
            v, branch = compute_v_coord(g[i], self.m_prev[i], p.rho, k, self.gamma[i], p)
            v_raw[i] = v
            if branch == BRANCH_NEGATIVE:
                vc, r = clip_negative_v(v, g[i], self.m_prev[i], p.rho, self.alpha[i], None)
                self.gamma[i] = min(apply_reparam(self.gamma[i], self.alpha[i], vc), p.d_inf)
                v_clip[i] = vc
                r_arr[i] = r
            else:
                self.alpha[i] = accumulate_positive(self.alpha[i], v)
                v_clip[i] = v
            branches.append(branch)

        a = np.zeros(d)
        ainv = np.zeros(d)  # unbootstrapped coordinates take a zero step
        live = self.alpha > 0
        root = np.sqrt(self.alpha[live])
        a[live] = root / self.gamma[live]
        ainv[live] = self.gamma[live] / root

        z_new = project(self.z - ainv * g, self.domain)
        x_new = p.beta * self.x + (1.0 - p.beta) * z_new
        m = a * (self.x - x_new)

        trace = StepTrace(
            k=k,
            g=g.copy(),
            v_raw=v_raw,
            v_clipped=v_clip,
            branch=branches,
            r=r_arr,
            gamma_after=self.gamma.copy(),
            alpha_after=self.alpha.copy(),
            a_after=a,
        )
        self.z = z_new
        self.m_prev = m
        self._commit(x_new)
        return trace

    def stats(self) -> dict:
        live = self.alpha > 0
        if self.k > 0 and np.any(live):
            ainv = np.zeros(self.dim)
            ainv[live] = self.gamma[live] / np.sqrt(self.alpha[live])
            ainv_mean = float(np.mean(ainv))
        else:
            ainv_mean = None
        return {
            "gamma_mean": float(np.mean(self.gamma)),
            "gamma_max": float(np.max(self.gamma)),
            "alpha_mean": float(np.mean(self.alpha)),
            "alpha_max": float(np.max(self.alpha)),
            "ainv_mean": ainv_mean,
        }


class AdaGrad(Optimizer):
    """Diagonal AdaGrad: x_i -= gamma / sqrt(sum_t g_{i,t}^2) * g_i.

    No epsilon is added to the denominator; coordinates whose accumulated
    sum is zero take a zero step instead.
    """

    def __init__(self, x0, gamma: float = 1.0):
        super().__init__(x0)
        if gamma <= 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        self.gamma = float(gamma)
        self.sum_sq = np.zeros(self.dim, dtype=float)

    def step(self, g) -> None:
        g = self._check_grad(g)
        self.sum_sq += g * g
        ainv = np.zeros(self.dim)
        live = self.sum_sq > 0
        ainv[live] = self.gamma / np.sqrt(self.sum_sq[live])
        self._commit(self.x - ainv * g)

    def stats(self) -> dict:
        live = self.sum_sq > 0
        if self.k > 0 and np.any(live):
            ainv = np.zeros(self.dim)
            ainv[live] = self.gamma / np.sqrt(self.sum_sq[live])
            ainv_mean = float(np.mean(ainv))
        else:
            ainv_mean = None
        return {
            "gamma_mean": self.gamma,
            "gamma_max": self.gamma,
            "alpha_mean": float(np.mean(self.sum_sq)),
            "alpha_max": float(np.max(self.sum_sq)),
            "ainv_mean": ainv_mean,
        }


class SGD(Optimizer):
    """Plain stochastic gradient descent with a constant step size."""

    def __init__(self, x0, lr: float = 0.01):
        super().__init__(x0)
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        self.lr = float(lr)

    def step(self, g) -> None:
        g = self._check_grad(g)
        self._commit(self.x - self.lr * g)

    def stats(self) -> dict:
        return {"ainv_mean": self.lr}


class Adam(Optimizer):
    """Adam with bias-corrected first and second moments."""

    def __init__(self, x0, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        super().__init__(x0)
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError(f"betas must be in [0, 1), got ({beta1}, {beta2})")
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros(self.dim, dtype=float)
        self.v = np.zeros(self.dim, dtype=float)

    def step(self, g) -> None:
        g = self._check_grad(g)
        t = self.k + 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1 ** t)
        v_hat = self.v / (1.0 - self.beta2 ** t)
        self._commit(self.x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))

    def stats(self) -> dict:
        if self.k == 0:
            return {"ainv_mean": None}
        v_hat = self.v / (1.0 - self.beta2 ** self.k)
        return {"ainv_mean": float(np.mean(self.lr / (np.sqrt(v_hat) + self.eps)))}
