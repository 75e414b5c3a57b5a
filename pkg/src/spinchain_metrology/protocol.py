"""Adaptive feedforward magnetometry on the thermal XX ring.

One protocol run repeats:  equilibrate at coupling J_k, measure the total
magnetization nu times, invert the (monotone) magnetization curve to an
estimate h_k +- delta_h_k, retune J_{k+1} = h_k + margin * delta_h_k so the
probe approaches the crossover from the interaction-dominated side, repeat.
delta_h_k is the honest standard error of the data: the sample standard
deviation of the nu single-shot inversions divided by sqrt(nu).

Sampling and inversion share one statistical model, the exact
parity-resolved thermal state: outcomes are drawn per parity sector
(occupation Bernoullis filtered on total parity, sectors weighted by their
partition-function shares) and the inversion targets the matching exact
magnetization curve, so the estimator is unbiased by construction.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .model import ChainSpec

__all__ = [
    "FLOOR_POLICIES",
    "RNG_ALGORITHM",
    "ProtocolConfig",
    "IterationRecord",
    "ProtocolTrace",
    "MagnetizationCurve",
    "sample_jz",
    "InversionResult",
    "invert_magnetization",
    "run_protocol",
    "run_ensemble",
    "ScalingResult",
    "scaling_exponent",
    "write_traces",
    "read_traces",
]

FLOOR_POLICIES = ("stop_at_thermal_floor", "run_to_kmax")
RNG_ALGORITHM = "numpy.random.PCG64"

_LOG2 = math.log(2.0)
_Y_MIN = 1e-280  # |beta e / 2| clamp: keeps log tanh finite, error O(1e-280)


def _mix_weights(logw0, logw1):
    """Sector weights summing to one exactly.

    The individual log-traces are order beta N J and quantized at ~1e-10
    absolute; exponentiating each against logsumexp separately would leak
    that quantization into mixed expectations at full scale.
    """
    dw = logw1 - logw0
    dw = np.where(np.isnan(dw), 0.0, dw)
    lam0 = np.exp(-np.logaddexp(0.0, dw))
    return lam0, 1.0 - lam0

try:  # fused kernel; the numpy path below is the reference implementation
    from numba import njit, prange

    # an outdated TBB triggers a harmless fallback warning at first use
    warnings.filterwarnings("ignore", message=".*TBB.*")
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _sector_eval_kernel(c, hs, beta, sigma, n_above, n_below,
                            sum_above, sum_below, out):  # pragma: no cover
        nm = c.size
        for r in prange(hs.size):
            h = hs[r]
            rho = 0.0
            slc = 0.0
            st = 0.0
            ssl = 0.0
            neg = 0
            for q in range(nm):
                y = beta * (c[q] - h)
                if y < 0.0:
                    neg += 1
                ay = abs(y)
                if ay < _Y_MIN:
                    ay = _Y_MIN
                    y = _Y_MIN
                t = math.tanh(y)
                at = abs(t)
                e2 = (1.0 - at) / (1.0 + at)
                slc += ay + math.log1p(e2)
                rho += math.log(at)
                st += t
                ssl += 1.0 - t * t
            neg += n_below
            gsign = float(sigma) if neg % 2 == 0 else -float(sigma)
            if rho > 0.0:
                rho = 0.0
            if gsign > 0.0:
                log_dtot = math.log1p(math.exp(rho))
            else:
                d = -math.expm1(rho)
                log_dtot = math.log(d) if d > 0.0 else -math.inf
            kexp = rho - log_dtot
            kfac = gsign * math.exp(kexp) if kexp > -740.0 else 0.0
            corr = 0.0
            if kfac != 0.0:
                for q in range(nm):
                    y = beta * (c[q] - h)
                    if abs(y) < _Y_MIN:
                        y = _Y_MIN
                    t = math.tanh(y)
                    corr += (1.0 - t * t) / t
                corr *= kfac
            out[r, 0] = -(st + corr + n_above - n_below)
            out[r, 1] = beta * ssl
            out[r, 2] = (
                beta * ((sum_above - n_above * h) - (sum_below - n_below * h))
                + slc
                - _LOG2
                + log_dtot
            )


@dataclass(frozen=True)
class ProtocolConfig:
    """Inputs of one feedforward run (the field h_true is hidden data)."""

    h_true: float
    h_min: float
    h_max: float
    beta: float
    n: int
    nu: int
    k_max: int
    retune_margin: float = 3.0
    floor_policy: str = "stop_at_thermal_floor"
    seed: int = 0

    def __post_init__(self):
        if not self.h_min < self.h_true < self.h_max:
            raise ValueError("need h_min < h_true < h_max")
        if self.nu < 2:
            raise ValueError("nu >= 2 repetitions are needed for an error bar")
        if self.retune_margin < 1.0:
            raise ValueError("retune margin must be >= 1")
        if self.floor_policy not in FLOOR_POLICIES:
            raise ValueError(f"floor_policy must be one of {FLOOR_POLICIES}")
        if self.k_max < 1:
            raise ValueError("k_max >= 1")
        if self.h_max <= 0:
            raise ValueError("the initial coupling J_1 = h_max must be positive")


@dataclass
class IterationRecord:
    k: int
    j: float
    outcomes: list
    h_est: float
    delta_h: float
    f_empirical: float | None
    clamped_mean: bool
    clamped_singles: int


@dataclass
class ProtocolTrace:
    config: ProtocolConfig
    iterations: list
    terminated_by: str
    rng_algorithm: str = RNG_ALGORITHM


class MagnetizationCurve:
    """Exact parity-resolved magnetization of the XX ring as a function of h.

    Built once per (n, J, beta) and an h window of interest; modes whose
    thermal factor cannot move anywhere in the window (|beta(J cos p - h)|
    > 21, where tanh rounds to +-1) are frozen into exact aggregates, the
    rest are kept as active arrays.  ``mean`` accepts vectors of fields.
    """

    def __init__(self, n: int, j: float, beta: float, h_lo: float, h_hi: float):
        if h_hi < h_lo:
            raise ValueError("empty field window")
        self.n = n
        self.j = j
        self.beta = beta
        self.h_lo = h_lo
        self.h_hi = h_hi
        w = 42.0 / beta
        self._sector = []
        for grid, sigma in (("half", +1), ("int", -1)):
            l = np.arange(-n // 2, n // 2)
            if grid == "half":
                p = np.pi * (2 * l + 1) / n
                c = j * np.cos(p)
            else:
                p = 2.0 * np.pi * l / n
                c = j * np.cos(p)
                c[n // 2] = j
                c[0] = -j
            active = (c > h_lo - w) & (c < h_hi + w)
            above = c >= h_hi + w   # e = 2(c - h) > 0 on the whole window
            below = c <= h_lo - w
            self._sector.append(
                {
                    "sigma": sigma,
                    "c_act": np.ascontiguousarray(c[active]),
                    "n_above": int(np.count_nonzero(above)),
                    "n_below": int(np.count_nonzero(below)),
                    "sum_above": float(np.sum(c[above])),
                    "sum_below": float(np.sum(c[below])),
                }
            )

    # -- shared evaluation core ------------------------------------------------
    def _eval_chunk(self, h: np.ndarray, want_occ: bool = False):
        """(mean, slope, logw_even, logw_odd[, occupations]) for <= ~16 fields."""
        beta = self.beta
        means = []
        slopes = []
        logws = []
        occs = []
        for sec in self._sector:
            y = beta * (sec["c_act"][None, :] - h[:, None])
            y = np.where(np.abs(y) < _Y_MIN, _Y_MIN, y)
            t = np.tanh(y)
            abst = np.abs(t)
            e2 = (1.0 - abst) / (1.0 + abst)  # exp(-2|y|)
            lc = np.abs(y) + np.log1p(e2)
            lt = np.log(abst)  # loses tails below e^-36, negligible here
            ls2 = 2.0 * (_LOG2 - lc)
            rho = np.sum(lt, axis=1)
            neg = np.sum(y < 0.0, axis=1) + sec["n_below"]
            gsign = sec["sigma"] * np.where(neg % 2 == 0, 1.0, -1.0)
            with np.errstate(divide="ignore"):
                log_dtot = np.where(
                    gsign > 0,
                    np.log1p(np.exp(np.minimum(rho, 0.0))),
                    np.log(np.maximum(-np.expm1(np.minimum(rho, 0.0)), 0.0)),
                )
            logc_frozen = beta * (
                (sec["sum_above"] - sec["n_above"] * h)
                - (sec["sum_below"] - sec["n_below"] * h)
            )
            logws.append(logc_frozen + np.sum(lc, axis=1) - _LOG2 + log_dtot)
            with np.errstate(invalid="ignore", over="ignore"):
                corr = gsign[:, None] * np.sign(y) * np.exp(
                    (rho[:, None] - lt) + ls2 - log_dtot[:, None]
                )
            corr = np.where(np.isfinite(corr), corr, 0.0)
            means.append(
                -(np.sum(t + corr, axis=1) + sec["n_above"] - sec["n_below"])
            )
            # Newton slope: population term only, parity corrections dropped
            slopes.append(beta * np.sum(1.0 - t * t, axis=1))
            if want_occ:
                occs.append(0.5 * (1.0 - t[0]))
        lam0, lam1 = _mix_weights(logws[0], logws[1])

        def mix(a, b):
            out = np.where(lam0 > 0.0, lam0 * np.nan_to_num(a), 0.0)
            return out + np.where(lam1 > 0.0, lam1 * np.nan_to_num(b), 0.0)

        m = mix(means[0], means[1])
        s = np.maximum(mix(slopes[0], slopes[1]), 1e-300)
        if want_occ:
            return m, s, logws[0], logws[1], occs, lam0
        return m, s, logws[0], logws[1]

    _CHUNK = 16

    def _eval_fast(self, h: np.ndarray):
        rows = []
        logws = []
        for sec in self._sector:
            out = np.empty((h.size, 3))
            _sector_eval_kernel(
                sec["c_act"], h, self.beta, sec["sigma"],
                sec["n_above"], sec["n_below"],
                sec["sum_above"], sec["sum_below"], out,
            )
            rows.append(out)
            logws.append(out[:, 2])
        lam0, lam1 = _mix_weights(logws[0], logws[1])

        def mix(a, b):
            out = np.where(lam0 > 0.0, lam0 * np.nan_to_num(a), 0.0)
            return out + np.where(lam1 > 0.0, lam1 * np.nan_to_num(b), 0.0)

        m = mix(rows[0][:, 0], rows[1][:, 0])
        s = np.maximum(mix(rows[0][:, 1], rows[1][:, 1]), 1e-300)
        return m, s

    def _eval(self, h: np.ndarray):
        if _HAVE_NUMBA:
            return self._eval_fast(h)
        n = h.size
        if n <= self._CHUNK:
            return self._eval_chunk(h)[:2]
        m = np.empty(n)
        s = np.empty(n)
        for i in range(0, n, self._CHUNK):
            sl = slice(i, min(i + self._CHUNK, n))
            m[sl], s[sl] = self._eval_chunk(h[sl])[:2]
        return m, s

    def logw_pair(self, h) -> tuple[np.ndarray, np.ndarray]:
        h = np.atleast_1d(np.asarray(h, dtype=float))
        _, _, w0, w1 = self._eval_chunk(h)
        return w0, w1

    def mean(self, h):
        """<J_z>(h); h may be a scalar or a vector."""
        scalar = np.isscalar(h)
        h = np.atleast_1d(np.asarray(h, dtype=float))
        m, _ = self._eval(h)
        return float(m[0]) if scalar else m

    def slope(self, h):
        """Approximate d<J_z>/dh, good enough to drive Newton steps."""
        scalar = np.isscalar(h)
        h = np.atleast_1d(np.asarray(h, dtype=float))
        _, s = self._eval(h)
        return float(s[0]) if scalar else s

    # -- sampling -------------------------------------------------------------
    def sample(self, h_true: float, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` magnetization outcomes at the hidden field."""
        h = np.array([h_true])
        _, _, _, _, occs, lam0 = self._eval_chunk(h, want_occ=True)
        lam0 = float(lam0[0])
        base_occupied = [sec["n_below"] for sec in self._sector]
        out = np.empty(count, dtype=np.int64)
        for i in range(count):
            sector = 0 if rng.random() < lam0 else 1
            sigma = self._sector[sector]["sigma"]
            occ = occs[sector]
            frozen = base_occupied[sector]
            need_even = sigma > 0
            for _try in range(200):
                b = rng.random(occ.size) < occ
                total = frozen + int(np.count_nonzero(b))
                if (total % 2 == 0) == need_even:
                    break
            else:
                # flip the most uncertain mode to fix parity; weight error
                # is O(exp(-beta gap)) in this regime
                flip = int(np.argmin(np.abs(occ - 0.5)))
                b[flip] = ~b[flip]
                total = frozen + int(np.count_nonzero(b))
            out[i] = 2 * total - self.n
        return out

    # -- inversion -------------------------------------------------------------
    def invert(self, targets, lo: float, hi: float, tol: float | None = None,
               start=None):
        """Solve mean(h) = target per entry by safeguarded Newton/bisection.

        Targets outside mean([lo, hi]) clamp to the bracket endpoint.
        ``start`` optionally warm-starts the iteration (clipped inside the
        bracket).  Returns (h_estimates, clamped_mask).
        """
        t = np.atleast_1d(np.asarray(targets, dtype=float))
        if tol is None:
            tol = 1e-10 * self.n
        m_ends = self.mean(np.array([lo, hi]))
        x = np.full(t.size, 0.5 * (lo + hi))
        if start is not None:
            span = hi - lo
            x = np.clip(np.atleast_1d(np.asarray(start, dtype=float)),
                        lo + 1e-9 * span, hi - 1e-9 * span)
        low_mask = t <= m_ends[0]
        high_mask = t >= m_ends[1]
        clamped = low_mask | high_mask
        x[low_mask] = lo
        x[high_mask] = hi
        idx = np.flatnonzero(~clamped)
        xi = x[idx]
        ai = np.full(idx.size, float(lo))
        bi = np.full(idx.size, float(hi))
        ti = t[idx]
        eps = np.finfo(float).eps
        for _ in range(120):
            if idx.size == 0:
                break
            mi, si = self._eval(xi)
            fi = mi - ti
            hib = fi > 0.0
            bi = np.where(hib, xi, bi)
            ai = np.where(hib, ai, xi)
            done = (np.abs(fi) <= tol) | (
                (bi - ai) <= 4.0 * eps * np.maximum(1.0, np.abs(xi))
            )
            if np.any(done):
                x[idx[done]] = xi[done]
                keep = ~done
                idx, xi, ai, bi = idx[keep], xi[keep], ai[keep], bi[keep]
                ti, fi, si = ti[keep], fi[keep], si[keep]
                if idx.size == 0:
                    break
            xn = xi - fi / si
            outside = ~((xn > ai) & (xn < bi))
            xi = np.where(outside, 0.5 * (ai + bi), xn)
        if idx.size:
            x[idx] = 0.5 * (ai + bi)
        return x, clamped


def _curve_for(spec_like, h_lo: float, h_hi: float) -> MagnetizationCurve:
    return MagnetizationCurve(spec_like.n, spec_like.j, spec_like.beta, h_lo, h_hi)


def sample_jz(spec: ChainSpec, rng: np.random.Generator) -> int:
    """One projective measurement of the total magnetization J_z.

    Outcomes are 2 (number of occupied modes) - n with mode occupations
    drawn per parity sector, so the marginal mean equals
    magnetization_z(spec) exactly.
    """
    if spec.model != "XX":
        raise ValueError("magnetization sampling is defined for the XX chain")
    curve = MagnetizationCurve(spec.n, spec.j, spec.beta, spec.h, spec.h)
    return int(curve.sample(spec.h, 1, rng)[0])


@dataclass(frozen=True)
class InversionResult:
    h: float
    clamped: bool


def invert_magnetization(
    mean_outcome: float,
    n: int,
    j: float,
    beta: float,
    bracket: tuple[float, float],
) -> InversionResult:
    """Invert the exact magnetization curve on a bracket.

    The curve is strictly increasing in h, so the root is unique;
    out-of-range targets clamp to the nearer endpoint and are flagged.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    curve = MagnetizationCurve(n, j, beta, lo, hi)
    h, clamped = curve.invert([mean_outcome], lo, hi)
    return InversionResult(h=float(h[0]), clamped=bool(clamped[0]))


def run_protocol(cfg: ProtocolConfig) -> ProtocolTrace:
    """Simulate one seeded feedforward run."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    j = cfg.h_max
    floor = 1.0 / cfg.beta
    iterations: list[IterationRecord] = []
    terminated = "kmax_reached"
    for k in range(1, cfg.k_max + 1):
        curve = MagnetizationCurve(cfg.n, j, cfg.beta, cfg.h_min, cfg.h_max)
        outcomes = curve.sample(cfg.h_true, cfg.nu, rng)
        y_bar = float(np.mean(outcomes))
        h_mean, clamp_mean = curve.invert([y_bar], cfg.h_min, cfg.h_max)
        h_est = float(h_mean[0])
        # linearized warm starts around the mean estimate
        sl = curve.slope(h_est)
        starts = h_est + (outcomes.astype(float) - y_bar) / sl
        singles, clamp_single = curve.invert(
            outcomes.astype(float), cfg.h_min, cfg.h_max, start=starts
        )
        delta = float(np.std(singles, ddof=1) / math.sqrt(cfg.nu))
        rec = IterationRecord(
            k=k,
            j=j,
            outcomes=[int(v) for v in outcomes],
            h_est=h_est,
            delta_h=delta,
            f_empirical=(1.0 / (delta * delta)) if delta > 0 else None,
            clamped_mean=bool(clamp_mean[0]),
            clamped_singles=int(np.count_nonzero(clamp_single)),
        )
        iterations.append(rec)
        if rec.clamped_mean or h_est >= j:
            terminated = "window_violation"
            break
        if delta <= 0.0:
            terminated = (
                "thermal_floor"
                if cfg.floor_policy == "stop_at_thermal_floor"
                else "window_violation"
            )
            break
        if cfg.floor_policy == "stop_at_thermal_floor" and delta < floor:
            terminated = "thermal_floor"
            break
        if k < cfg.k_max:
            j_next = h_est + cfg.retune_margin * delta
            if j_next <= 0.0:
                terminated = "window_violation"
                break
            j = j_next
    return ProtocolTrace(config=cfg, iterations=iterations, terminated_by=terminated)


def run_ensemble(base: ProtocolConfig, n_values, seeds: int) -> list:
    """Independent runs over a grid of ring sizes, deterministic seeding."""
    from dataclasses import replace

    traces = []
    for i_n, n in enumerate(n_values):
        for s in range(seeds):
            seed = int(
                np.random.SeedSequence([int(base.seed), i_n, s]).generate_state(1)[0]
            )
            cfg = replace(base, n=int(n), seed=seed)
            traces.append(run_protocol(cfg))
    return traces


@dataclass(frozen=True)
class ScalingResult:
    slope: float
    stderr: float
    k: int
    n_values: tuple
    medians: tuple
    n_excluded: int


def scaling_exponent(traces, k: int | None = None) -> ScalingResult:
    """OLS slope of log(delta_h_k) against log(n) at a common depth k.

    Runs that terminated before reaching depth k are excluded with a
    warning.  The per-size statistic is the median of delta_h_k over seeds.
    """
    by_n: dict[int, list[float]] = {}
    excluded = 0
    if k is None:
        k = min(len(t.iterations) for t in traces)
    for t in traces:
        if len(t.iterations) < k:
            excluded += 1
            continue
        by_n.setdefault(t.config.n, []).append(t.iterations[k - 1].delta_h)
    if excluded:
        warnings.warn(
            f"{excluded} run(s) terminated before iteration {k} and were excluded"
        )
    if len(by_n) < 2:
        raise ValueError("need at least two ring sizes to fit a scaling exponent")
    ns = sorted(by_n)
    med = [float(np.median(by_n[n])) for n in ns]
    x = np.log(np.array(ns, dtype=float))
    y = np.log(np.array(med))
    xm = x - x.mean()
    slope = float(np.dot(xm, y) / np.dot(xm, xm))
    resid = y - y.mean() - slope * xm
    dof = max(len(ns) - 2, 1)
    stderr = float(math.sqrt(np.dot(resid, resid) / dof / np.dot(xm, xm)))
    return ScalingResult(
        slope=slope,
        stderr=stderr,
        k=k,
        n_values=tuple(ns),
        medians=tuple(med),
        n_excluded=excluded,
    )


# ---------------------------------------------------------------------------
# trace persistence: JSON lines, one iteration per line, config header
# ---------------------------------------------------------------------------
def write_traces(path, traces) -> None:
    with open(path, "w") as fh:
        for t in traces:
            head = {"type": "config", "rng": t.rng_algorithm}
            head.update(asdict(t.config))
            fh.write(json.dumps(head, sort_keys=True) + "\n")
            for it in t.iterations:
                row = {"type": "iteration"}
                row.update(asdict(it))
                fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.write(
                json.dumps({"type": "end", "terminated_by": t.terminated_by}) + "\n"
            )


def read_traces(path) -> list:
    traces = []
    cfg = None
    iters: list[IterationRecord] = []
    with open(path) as fh:
        for line in fh:
            row = json.loads(line)
            kind = row.pop("type")
            if kind == "config":
                row.pop("rng", None)
                cfg = ProtocolConfig(**row)
                iters = []
            elif kind == "iteration":
                iters.append(IterationRecord(**row))
            elif kind == "end":
                traces.append(
                    ProtocolTrace(
                        config=cfg, iterations=iters, terminated_by=row["terminated_by"]
                    )
                )
    return traces
