"""Seeded generation of the simulation design and the sweep harness.

Covariates follow a time-varying AR(2) whose coefficients and
innovation scale are smooth functions of rescaled time; responses are a
fixed smooth target surface plus, in the source domain, a parametric
bias surface of chosen curvature, plus Gaussian noise. Every draw is a
pure function of (seed, replication, domain, position), so replications
parallelize without any shared random state.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .bandwidth import CvPlan, blocked_cv_grid, cv_select
from .errors import (
    ConfigError,
    DegenerateInputError,
    LskrError,
    SweepError,
    ValidationError,
)
from .estimators import Domain, KernelFit, Method, Sample, fit_surface
from .kernels import Bandwidth, KernelSpec
from .metrics import ErrorReport, GridSpec, grid_median_error
from .transfer import fit_transfer, residual_sample, tl_surface

BIAS_FAMILIES = ("quad", "cubic", "exp")

_MASK64 = (1 << 64) - 1


class StreamRng:
    """Counter-based generator with independent named streams.

    Each stream is a Philox4x64-10 generator keyed by
    ``(seed, replication * 2**32 + channel)``. Raw 64-bit words ``w``
    map to uniforms as ``(w >> 11) * 2**-53`` and to standard normals
    through the inverse normal CDF applied to ``((w >> 11) + 0.5) *
    2**-53``, so the whole draw sequence is reproducible from this
    description alone.
    """

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValidationError("seed must fit in 64 bits")
        self.seed = int(seed)

    def stream(self, replication: int, channel: int) -> "Stream":
        if not 0 <= replication < (1 << 32) or not 0 <= channel < (1 << 32):
            raise ValidationError("stream indices must fit in 32 bits")
        key = np.array([self.seed, (replication << 32) | channel], dtype=np.uint64)
        return Stream(np.random.Philox(key=key))


class Stream:
    """One deterministic draw sequence of a StreamRng."""

    def __init__(self, bit_generator):
        self._bg = bit_generator

    def raw(self, n: int) -> np.ndarray:
        return self._bg.random_raw(n)

    def uniforms(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        k = (self.raw(n) >> np.uint64(11)).astype(np.float64)
        return ndtri((k + 0.5) * 2.0**-53)


def coeff_a1(u):
    """First autoregressive coefficient as a function of rescaled time."""
    return 0.15 * math.cos(math.pi / 3) + 0.3 * ((u - 0.5) ** 2 - 1.0 / 12.0)


def coeff_a2(u):
    """Second autoregressive coefficient as a function of rescaled time."""
    return 0.15 * math.cos(2 * math.pi / 3) + 0.3 * ((u - 0.5) ** 2 - 1.0 / 12.0)


def vol_s(u):
    """Innovation scale curve, floored away from zero."""
    return np.maximum(0.10 + 0.10 * (0.5 + 0.5 * np.sin(0.5 * math.pi * u)), 1e-3)


def _eval_curve(f, u: np.ndarray) -> np.ndarray:
    """Evaluate a coefficient curve elementwise, tolerating scalar-only callables."""
    try:
        out = np.asarray(f(u), dtype=np.float64)
        if out.shape == u.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(f(v)) for v in u])


@dataclass(frozen=True)
class Tvar2Spec:
    """Time-varying AR(2): coefficient curves, volatility curve, start values."""

    a1: callable = coeff_a1
    a2: callable = coeff_a2
    s: callable = vol_s
    x_init: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        grid = np.linspace(0.0, 1.0, 10_001)
        worst = float(
            np.max(np.abs(_eval_curve(self.a1, grid)) + np.abs(_eval_curve(self.a2, grid)))
        )
        if worst >= 1.0:
            raise ValidationError(f"unstable coefficient curves: sup |a1|+|a2| = {worst}")


def simulate_tvar2(spec: Tvar2Spec, t_len: int, stream: Stream) -> np.ndarray:
    """Run the AR(2) recursion with coefficients evaluated at u = t/T."""
    if t_len < 1:
        raise ValidationError("series length must be positive")
    u = np.arange(1, t_len + 1) / t_len
    a1 = _eval_curve(spec.a1, u)
    a2 = _eval_curve(spec.a2, u)
    shock = _eval_curve(spec.s, u) * stream.normals(t_len)
    x = np.empty(t_len)
    prev2, prev1 = spec.x_init
    for t in range(t_len):
        x[t] = a1[t] * prev1 + a2[t] * prev2 + shock[t]
        prev2, prev1 = prev1, x[t]
    return x


def rescale_unit(series: np.ndarray) -> np.ndarray:
    """Min-max rescale onto [0, 1]."""
    series = np.asarray(series, dtype=np.float64)
    span = float(series.max() - series.min())
    if span <= 0.0:
        raise DegenerateInputError("cannot rescale a zero-spread series")
    return (series - series.min()) / span


def target_surface(u, x):
    """True regression surface of the target domain."""
    return 2.0 * np.sin(np.pi * x) * (0.5 * u + 2.0) + u * (1.0 - x) + 2.0


@dataclass(frozen=True)
class BiasFamily:
    """Parametric cross-domain discrepancy surface with curvature gamma."""

    kind: str
    gamma: float

    def __post_init__(self):
        if self.kind not in BIAS_FAMILIES:
            raise ValidationError(f"unknown bias family {self.kind!r}")
        if not math.isfinite(self.gamma):
            raise ValidationError("gamma must be finite")


def bias_eval(fam: BiasFamily, u, x):
    """Evaluate the discrepancy surface at (u, x)."""
    if fam.kind == "quad":
        return fam.gamma * (np.asarray(u) ** 2 + np.asarray(x) ** 2) / 2.0
    if fam.kind == "cubic":
        return fam.gamma * (np.asarray(u) ** 3 + np.asarray(x) ** 3) / 6.0
    return fam.gamma * (np.exp(u) + np.exp(x)) / math.e


@dataclass(frozen=True)
class SimConfig:
    """Scale, noise, sweep layout and seed of one simulation study."""

    t0: int
    t1: int
    noise_sd: float = 0.1
    gamma_sweep: tuple[float, ...] = tuple(float(g) for g in range(-10, 11, 2))
    families: tuple[str, ...] = BIAS_FAMILIES
    replications: int = 50
    grid_n: int = 50
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gamma_sweep", tuple(float(g) for g in self.gamma_sweep))
        object.__setattr__(self, "families", tuple(self.families))
        if not self.t1 >= self.t0 >= 10:
            raise ValidationError(f"need t1 >= t0 >= 10, got t0={self.t0}, t1={self.t1}")
        if self.replications < 1:
            raise ValidationError("need at least one replication")
        if self.grid_n < 2:
            raise ValidationError("grid_n must be at least 2")
        if not (math.isfinite(self.noise_sd) and self.noise_sd >= 0.0):
            raise ValidationError("noise_sd must be finite and nonnegative")
        for fam in self.families:
            if fam not in BIAS_FAMILIES:
                raise ValidationError(f"unknown bias family {fam!r}")


_CHANNEL = {Domain.TARGET: 0, Domain.SOURCE: 1}


def _domain_sample(
    cfg: SimConfig,
    fam: BiasFamily,
    replication: int,
    domain: Domain,
    tvar: Tvar2Spec,
) -> Sample:
    t_len = cfg.t0 if domain is Domain.TARGET else cfg.t1
    stream = StreamRng(cfg.base_seed).stream(replication, _CHANNEL[domain])
    # First t_len normals drive the covariate recursion, the next t_len
    # the observation noise.
    x_raw = simulate_tvar2(tvar, t_len, stream)
    noise = cfg.noise_sd * stream.normals(t_len)
    u = np.arange(1, t_len + 1) / t_len
    x = rescale_unit(x_raw)
    y = target_surface(u, x)
    if domain is Domain.SOURCE:
        y = y + bias_eval(fam, u, x)
    return Sample(u=u, x=x, y=y + noise, domain_label=domain)


_DEFAULT_TVAR: Tvar2Spec | None = None


def _default_tvar() -> Tvar2Spec:
    global _DEFAULT_TVAR
    if _DEFAULT_TVAR is None:
        _DEFAULT_TVAR = Tvar2Spec()
    return _DEFAULT_TVAR


def generate_pair(
    cfg: SimConfig, fam: BiasFamily, replication: int, tvar: Tvar2Spec | None = None
) -> tuple[Sample, Sample]:
    """Deterministically generate the (target, source) pair of one replication."""
    tvar = tvar or _default_tvar()
    target = _domain_sample(cfg, fam, replication, Domain.TARGET, tvar)
    source = _domain_sample(cfg, fam, replication, Domain.SOURCE, tvar)
    return target, source


ESTIMATOR_IDS = ("NW-T", "LL-T", "NW-TL", "LL-TL")


@dataclass
class SweepRow:
    estimator: str
    family: str
    gamma: float
    replication: int
    median_sq_err: float
    n_missing: int
    bw: Bandwidth | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    reports: list[ErrorReport]
    failures: list[str] = field(default_factory=list)


def _cv(sample: Sample, spec: KernelSpec, method: Method, folds: int, per_axis: int) -> Bandwidth:
    plan = CvPlan(
        grid=tuple(blocked_cv_grid(sample, folds, per_axis=per_axis)),
        folds=folds,
        method=method,
    )
    return cv_select(sample, spec, plan).best


def _replication_rows(args) -> tuple[str, object]:
    (cfg, fam_kind, gamma, rep, suite, folds, per_axis) = args
    try:
        fam = BiasFamily(fam_kind, gamma)
        spec = KernelSpec()
        target, source = generate_pair(cfg, fam, rep)
        grid = GridSpec(cfg.grid_n, (0.0, 1.0), ((0.0, 1.0),))
        truth = target_surface
        rows = []
        method_of = {"NW-T": Method.NW, "LL-T": Method.LL, "NW-TL": Method.NW, "LL-TL": Method.LL}
        src_bw: dict[Method, Bandwidth] = {}
        for est in suite:
            method = method_of[est]
            if est.endswith("-TL"):
                if method not in src_bw:
                    src_bw[method] = _cv(source, spec, method, folds, per_axis)
                h1 = src_bw[method]
                resid, _ = residual_sample(target, KernelFit(source, spec, h1, method))
                h_tl = _cv(resid, spec, method, folds, per_axis)
                fit = fit_transfer(target, source, spec, h1, h_tl, method)
                surf = tl_surface(fit, grid)
                bw = h_tl
            else:
                bw = _cv(target, spec, method, folds, per_axis)
                surf = fit_surface(target, spec, bw, grid, method)
            med, miss = grid_median_error(surf, truth, grid)
            rows.append(SweepRow(est, fam_kind, gamma, rep, med, miss, bw))
        return ("ok", rows)
    except (LskrError, np.linalg.LinAlgError) as exc:
        return ("fail", f"{fam_kind} gamma={gamma} rep={rep}: {type(exc).__name__}: {exc}")


def run_sweep(
    cfg: SimConfig,
    suite: tuple[str, ...] = ESTIMATOR_IDS,
    jobs: int = 1,
    cv_folds: int = 10,
    cv_per_axis: int = 5,
    max_failure_share: float = 0.2,
) -> SweepResult:
    """Replicate the full (family, gamma) sweep and summarize grid errors.

    Every replication is generated, cross-validated and scored
    independently; results are reduced in task order, so the output is
    byte-stable for any worker count. Failed replications are recorded
    and excluded; more than ``max_failure_share`` of them fails the
    sweep.
    """
    for est in suite:
        if est not in ESTIMATOR_IDS:
            raise ValidationError(f"unknown estimator id {est!r}")
    tasks = [
        (cfg, fam, gamma, rep, tuple(suite), cv_folds, cv_per_axis)
        for fam in cfg.families
        for gamma in cfg.gamma_sweep
        for rep in range(cfg.replications)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_replication_rows, tasks, chunksize=1))
    else:
        outcomes = [_replication_rows(t) for t in tasks]

    rows: list[SweepRow] = []
    failures: list[str] = []
    for status, payload in outcomes:
        if status == "ok":
            rows.extend(payload)
        else:
            failures.append(payload)
    if len(failures) > max_failure_share * len(tasks):
        raise SweepError(
            f"{len(failures)} of {len(tasks)} replications failed: {failures[:3]}"
        )

    reports = []
    for fam in cfg.families:
        for gamma in cfg.gamma_sweep:
            for est in suite:
                sel = [
                    r
                    for r in rows
                    if r.estimator == est and r.family == fam and r.gamma == gamma
                ]
                if not sel:
                    continue
                sel.sort(key=lambda r: r.replication)
                reports.append(
                    ErrorReport(
                        estimator_id=est,
                        family=fam,
                        gamma=gamma,
                        per_replication_median=[r.median_sq_err for r in sel],
                        per_replication_missing=[r.n_missing for r in sel],
                    )
                )
    return SweepResult(rows=rows, reports=reports, failures=failures)


def rate_curve(
    t_values: tuple[int, ...],
    replications: int,
    base_seed: int,
    h_scale: float = 0.5,
    noise_sd: float = 0.1,
    grid_n: int = 50,
    jobs: int = 1,
) -> dict[int, list[float]]:
    """Grid-median errors of the target-only local linear fit versus T.

    The bandwidth follows h = h_scale * T**(-1/6) on both axes, so the
    curve isolates the sample-size scaling of the error.
    """
    tasks = [(int(t), rep, base_seed, h_scale, noise_sd, grid_n) for t in t_values for rep in range(replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            medians = list(pool.map(_rate_task, tasks, chunksize=1))
    else:
        medians = [_rate_task(t) for t in tasks]
    out: dict[int, list[float]] = {int(t): [] for t in t_values}
    for (t, _rep, *_), med in zip(tasks, medians):
        out[t].append(med)
    return out


def _rate_task(args) -> float:
    t_len, rep, base_seed, h_scale, noise_sd, grid_n = args
    cfg = SimConfig(
        t0=t_len,
        t1=t_len,
        noise_sd=noise_sd,
        gamma_sweep=(0.0,),
        families=("quad",),
        replications=1,
        grid_n=grid_n,
        base_seed=base_seed,
    )
    target, _ = generate_pair(cfg, BiasFamily("quad", 0.0), rep)
    h = h_scale * t_len ** (-1.0 / 6.0)
    surf = fit_surface(target, KernelSpec(), Bandwidth(h, (h,)), GridSpec(grid_n), Method.LL)
    med, _ = grid_median_error(surf, target_surface, GridSpec(grid_n))
    return med


CONFIG_KEYS = (
    "t0",
    "t1",
    "noise_sd",
    "gamma_min",
    "gamma_max",
    "gamma_step",
    "families",
    "replications",
    "grid_n",
    "seed",
)


def load_sim_config(path: str) -> SimConfig:
    """Parse the flat ``key = value`` config format into a SimConfig."""
    raw: dict[str, str] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value.strip()

    def _get(key, conv, default):
        if key not in raw:
            return default
        try:
            return conv(raw[key])
        except ValueError as exc:
            raise ConfigError(f"{path}: key {key!r}: {exc}") from exc

    gamma_min = _get("gamma_min", float, -10.0)
    gamma_max = _get("gamma_max", float, 10.0)
    gamma_step = _get("gamma_step", float, 2.0)
    if gamma_step <= 0.0:
        raise ConfigError(f"{path}: gamma_step must be positive")
    if gamma_max < gamma_min:
        raise ConfigError(f"{path}: gamma_max below gamma_min")
    n_steps = int(math.floor((gamma_max - gamma_min) / gamma_step + 1e-9))
    gammas = tuple(gamma_min + k * gamma_step for k in range(n_steps + 1))

    families = _get(
        "families", lambda v: tuple(f.strip() for f in v.split(",") if f.strip()), BIAS_FAMILIES
    )
    try:
        return SimConfig(
            t0=_get("t0", int, 500),
            t1=_get("t1", int, 5000),
            noise_sd=_get("noise_sd", float, 0.1),
            gamma_sweep=gammas,
            families=families,
            replications=_get("replications", int, 20),
            grid_n=_get("grid_n", int, 50),
            base_seed=_get("seed", int, 0),
        )
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
