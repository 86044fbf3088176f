"""Simulated 2IFC experiments with level-set (straddle) sampling.

An experiment starts from a fixed initialisation design, then repeatedly
refits the probit GP and presents the lattice candidate that best
straddles the target iso-probability contour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import FullyCensored, ObserverSpecError
from .threshold.contour import ThresholdContour, extract_contour
from .threshold.gp import GPModel, Limits, TrialRecord, fit_gp_arrays
from .threshold.projection import DEFAULT_M, project_moments, to_polar

N_SUPRA = 8
SUPRA_RADIUS = 0.9
INNER_EXTENT = 0.4
LATTICE_SIZE = 33
STRADDLE_BETA = 1.96


@dataclass(frozen=True)
class SimulatedObserver:
    """Ground-truth psychometric surface ``Phi((rho - a) / s)``.

    ``rho`` is the displacement norm after dividing x and z by per-axis
    scales (both 1 for a circular observer). With ``chance_floor`` the
    probability never drops below the 2IFC guessing rate of 0.5, which
    leaves the 75% point unchanged.
    """

    a_mm: float = 8.0
    s_mm: float = 2.0
    x_scale: float = 1.0
    z_scale: float = 1.0
    lapse: float = 0.0
    seed: int = 0
    chance_floor: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lapse <= 0.1:
            raise ValueError("lapse rate must lie in [0, 0.1]")
        if not (self.s_mm > 0 and self.x_scale > 0 and self.z_scale > 0):
            raise ValueError("slope and axis scales must be positive")
        if self.a_mm < 0:
            raise ValueError("a_mm must be non-negative")

    @property
    def kind(self) -> str:
        return "circular" if self.x_scale == self.z_scale == 1.0 else "elliptical"

    def p_true(self, x_mm, z_mm):
        rho = np.hypot(np.asarray(x_mm, float) / self.x_scale, np.asarray(z_mm, float) / self.z_scale)
        p = ndtr((rho - self.a_mm) / self.s_mm)
        return np.maximum(p, 0.5) if self.chance_floor else p

    def threshold_radius_mm(self, p_target: float = 0.75) -> float:
        """Analytic radius (scaled units) where ``p_true`` reaches ``p_target``."""
        return self.a_mm + self.s_mm * float(ndtri(p_target))

    def respond(self, x_mm: float, z_mm: float, rng: np.random.Generator) -> bool:
        correct = bool(rng.random() < self.p_true(x_mm, z_mm))
        if self.lapse and rng.random() < self.lapse:
            correct = not correct
        return correct

    @classmethod
    def parse(cls, spec: str, seed: int = 0) -> "SimulatedObserver":
        """Parse ``circular:a=8,s=2,lapse=0`` or ``elliptical:a=8,s=2,kx=1,kz=2``."""
        kind, _, rest = spec.partition(":")
        kind = kind.strip()
        if kind not in ("circular", "elliptical"):
            raise ObserverSpecError(f"unknown observer kind {kind!r}")
        keys = {"a": "a_mm", "s": "s_mm", "lapse": "lapse", "kx": "x_scale", "kz": "z_scale",
                "floor": "chance_floor"}
        if kind == "circular":
            keys.pop("kx")
            keys.pop("kz")
        kwargs = {}
        for item in filter(None, (p.strip() for p in rest.split(","))):
            k, eq, v = item.partition("=")
            if not eq or k.strip() not in keys:
                raise ObserverSpecError(f"bad observer parameter {item!r}")
            try:
                kwargs[keys[k.strip()]] = bool(int(v)) if k.strip() == "floor" else float(v)
            except ValueError as exc:
                raise ObserverSpecError(f"bad value in {item!r}") from exc
        try:
            return cls(seed=seed, **kwargs)
        except ValueError as exc:
            raise ObserverSpecError(str(exc)) from exc


@dataclass(frozen=True)
class ExperimentConfig:
    limits: Limits = field(default_factory=Limits)
    n_init: int = 25
    budget: int = 110
    p_target: float = 0.75
    seed: int = 0
    n_angles: int = 64
    n_restarts: int = 1
    # trial indices whose simulated response is forced wrong
    forced_lapses: tuple[int, ...] = ()
    subject: str = "sim"
    condition: str = "sim"

    def __post_init__(self):
        if not 25 <= self.n_init <= 32:
            raise ValueError("n_init must lie in [25, 32]")
        if self.n_init > self.budget:
            raise ValueError("n_init cannot exceed budget")
        if not 0.5 < self.p_target < 1.0:
            raise ValueError("p_target must lie in (0.5, 1)")


@dataclass
class ExperimentLog:
    trials: list[TrialRecord] = field(default_factory=list)
    phases: list[str] = field(default_factory=list)

    def append(self, trial: TrialRecord, phase: str) -> None:
        if self.phases and self.phases[-1] == "adaptive" and phase == "init":
            raise ValueError("init trials must precede adaptive trials")
        self.trials.append(trial)
        self.phases.append(phase)

    def __len__(self) -> int:
        return len(self.trials)


@dataclass
class ExperimentResult:
    log: ExperimentLog
    contour: ThresholdContour
    model: GPModel


def init_design(config: ExperimentConfig) -> list[tuple[float, float]]:
    """Suprathreshold ring on the axes and diagonals, then a grid near zero."""
    lx, lz = config.limits.lx, config.limits.lz
    pts = []
    for k in range(N_SUPRA):
        a = k * math.pi / 4.0
        pts.append((SUPRA_RADIUS * math.cos(a), SUPRA_RADIUS * math.sin(a)))
    n_inner = config.n_init - N_SUPRA
    side = math.ceil(math.sqrt(n_inner))
    if side % 2 == 0:
        side += 1
    g = np.linspace(-INNER_EXTENT, INNER_EXTENT, side)
    gx, gz = np.meshgrid(g, g)
    gx, gz = gx.ravel(), gz.ravel()
    r, th = to_polar(gx, gz)
    order = np.lexsort((np.round(th, 12), np.round(r, 12)))[:n_inner]
    pts.extend(zip(gx[order].tolist(), gz[order].tolist()))
    return [(x * lx, z * lz) for x, z in pts]


def candidate_lattice(n: int = LATTICE_SIZE) -> np.ndarray:
    """Normalised ``(n*n, 2)`` candidate points, row-major."""
    g = np.linspace(-1.0, 1.0, n)
    gz, gx = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([gx.ravel(), gz.ravel()])


def straddle_scores(mu, sd, p_target: float = 0.75, beta: float = STRADDLE_BETA):
    return beta * np.asarray(sd, float) - np.abs(np.asarray(mu, float) - ndtri(p_target))


@lru_cache(maxsize=4)
def _lattice_rays(n: int, m: int):
    """Unique ray sample points for every lattice candidate plus the gather index."""
    k = (n - 1) // 2
    j = np.arange(-k, k + 1)
    gz, gx = np.meshgrid(j, j, indexing="ij")
    steps = np.arange(m + 1)
    # integer coordinates in units of 1 / (k * m) keep duplicates exact
    ix = np.stack([np.outer(gx.ravel(), steps), np.outer(gz.ravel(), steps)], axis=-1)
    uniq, inverse = np.unique(ix.reshape(-1, 2), axis=0, return_inverse=True)
    return uniq / float(k * m), inverse.reshape(n * n, m + 1)


def lattice_projection(model: GPModel, n: int = LATTICE_SIZE, m: int = DEFAULT_M):
    """Projected posterior moments at every lattice candidate (row-major)."""
    pts, idx = _lattice_rays(n, m)
    mu, var = model.predict(pts)
    sd = np.sqrt(var)
    return project_moments(mu[idx], sd[idx])


def acquire_next(model: GPModel, config: ExperimentConfig) -> tuple[float, float]:
    """Lattice point (mm) maximising the straddle score; lowest index wins ties."""
    cand = candidate_lattice()
    mu_hat, sd_hat = lattice_projection(model)
    scores = straddle_scores(mu_hat, sd_hat, config.p_target)
    best = int(np.argmax(scores))
    return float(cand[best, 0] * config.limits.lx), float(cand[best, 1] * config.limits.lz)


def _fit(X, y, config, start):
    return fit_gp_arrays(
        np.asarray(X), np.asarray(y), config.limits,
        lengthscales=start[0], variance=start[1],
        n_restarts=config.n_restarts, seed=config.seed,
    )


def run_experiment(observer: SimulatedObserver, config: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    """Run one seeded simulated experiment to its trial budget.

    A fully censored outcome is returned with ``contour.fully_censored`` set.
    """
    rng = np.random.default_rng([config.seed, observer.seed])
    log = ExperimentLog()
    X, y = [], []
    lx, lz = config.limits.lx, config.limits.lz

    def present(x, z, phase):
        correct = observer.respond(x, z, rng)
        if len(log) in config.forced_lapses:
            correct = False
        log.append(TrialRecord(x, z, correct, config.subject, config.condition), phase)
        X.append((x / lx, z / lz))
        y.append(1.0 if correct else -1.0)

    for x, z in init_design(config)[: config.budget]:
        present(x, z, "init")
    start = ((0.3, 0.3), 4.0)
    model = _fit(X, y, config, start)
    while len(log) < config.budget:
        x, z = acquire_next(model, config)
        present(x, z, "adaptive")
        # warm start from the previous hyperparameters
        start = (tuple(model.lengthscales), model.variance)
        model = _fit(X, y, config, start)

    try:
        contour = extract_contour(model, config.p_target, config.n_angles, config.limits)
    except FullyCensored as exc:
        contour = exc.contour
    return ExperimentResult(log=log, contour=contour, model=model)
