"""Seeded experiment runners behind the command-line tool.

Every runner takes an :class:`ExperimentConfig` and returns either a
JSON-ready dict or a header plus rows for CSV output. Trial ``i`` draws
its randomness from ``SeedSequence([seed, i, stream])`` so results do not
depend on the number of workers or on completion order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from .analysis import RipGuardError, certified_radii, rip_radius, theorem_constants, verify_bound, verify_ctr_bound
from .ctr import build_ctr, recover_ctr
from .sensing import SensingOperator, make_ensemble, measure, read_matrix_csv
from .signals import SupportSet, generate_signal, known_support, read_vector, support_from_threshold
from .solver import SolverConfig, check_optimality, solve_ibpdn

__all__ = ["EXPERIMENTS", "CSV_FIELDS", "ExperimentConfig", "CertifiedDraws", "draw_instance",
           "draw_certified_matrices", "run", "format_csv"]

EXPERIMENTS = ("solve", "constants", "rip", "exact_recovery", "noise_sweep", "phase",
               "ctr_compare", "sequence")

CSV_FIELDS = {
    "exact_recovery": ["trial", "seed", "error", "relative_error", "converged", "iterations", "status"],
    "noise_sweep": ["epsilon", "mean_error", "bound_rhs", "margin", "trials_ok"],
    "phase": ["m", "k", "success_rate"],
    "ctr_compare": ["trial", "seed", "delta_2k", "delta_s2k", "ibpdn_error_tc", "ctr_error_tc",
                    "ibpdn_bound", "ctr_bound", "status"],
    "sequence": ["frame", "known_size", "error_tracking", "error_baseline"],
}

SUCCESS_RTOL = 1e-3

# stream ids for SeedSequence([seed, trial, stream])
_SIGNAL, _SUPPORT, _MATRIX, _NOISE, _SWAP = range(5)


@dataclass
class ExperimentConfig:
    experiment: str = "solve"
    n: int = 128
    m: int = 64
    k_true: int = 16
    s_known: int = 14
    rho_good: float = 0.75
    epsilon: float = 0.0
    epsilons: list = field(default_factory=lambda: [0.0, 0.01, 0.05, 0.1])
    trials: int = 10
    seed: int = 0
    ensemble: str = "gaussian"
    signal_model: str = "exact_sparse"
    exponent: float = 1.5
    k: int = 1
    m_values: list = field(default_factory=lambda: [16, 32, 48, 64])
    k_values: list = field(default_factory=lambda: [0, 4, 8, 16])
    frames: int = 10
    swaps: int = 1
    tau: float = 0.5
    delta_2k: float = 0.02
    delta_s2k: float = 0.2
    q: int = 2
    rip_method: str = "exact"
    samples: int = 5000
    phi_path: Optional[str] = None
    y_path: Optional[str] = None
    t_indices: Optional[list] = None
    gamma: Optional[float] = None
    alpha: float = 1.0
    max_iters: int = 20000
    tolerance: float = 1e-9
    polish: bool = True
    workers: int = 1
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.rho_good <= 1.0:
            raise ValueError("rho_good must lie in [0, 1]")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.experiment not in ("constants", "rip"):
            if not 0 <= self.s_known <= self.n:
                raise ValueError("s_known must lie in [0, n]")
            if not 0 <= self.k_true <= self.n:
                raise ValueError("k_true must lie in [0, n]")
        if self.epsilon < 0 or any(e < 0 for e in self.epsilons):
            raise ValueError("noise bounds must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        SolverConfig(**self._solver_kwargs())

    def _solver_kwargs(self) -> dict:
        return dict(gamma=self.gamma, alpha=self.alpha, max_iters=self.max_iters,
                    tolerance=self.tolerance, polish=self.polish)

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(**self._solver_kwargs())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def _seed(cfg, trial, stream):
    return np.random.SeedSequence([cfg.seed, trial, stream])


def _seed_label(cfg, trial):
    return f"{cfg.seed}:{trial}"


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _prior_support(cfg, true_support: SupportSet, k: int, trial: int, tag: int = 0) -> SupportSet:
    """``round(rho_good * k)`` true indices plus enough spurious ones to reach ``s_known``."""
    good = int(round(cfg.rho_good * k))
    outside = true_support.ambient_dim - len(true_support)
    spurious = min(max(cfg.s_known - good, 0), outside)
    return known_support(true_support, cfg.rho_good, spurious,
                         np.random.SeedSequence([cfg.seed, trial, _SUPPORT, tag]))


def draw_instance(cfg, trial, m=None, k=None, epsilon=None, tag=0):
    """Signal, known support, operator and measurement for trial ``trial``."""
    m = cfg.m if m is None else m
    k = cfg.k_true if k is None else k
    eps = cfg.epsilon if epsilon is None else epsilon
    x, supp = generate_signal(cfg.n, k, cfg.signal_model, _seed(cfg, trial, _SIGNAL), cfg.exponent)
    t_set = _prior_support(cfg, supp, k, trial, tag)
    phi = make_ensemble(m, cfg.n, cfg.ensemble, np.random.SeedSequence([cfg.seed, trial, _MATRIX, m]))
    meas = measure(phi, x, eps, np.random.SeedSequence([cfg.seed, trial, _NOISE, tag]))
    return x, t_set, phi, meas


@dataclass
class CertifiedDraws:
    """Matrices accepted by :func:`draw_certified_matrices`.

    ``accepted`` holds ``(phi, delta_2k, delta_s2k)``; ``best_condition``
    is the smallest ``delta_2k**2 + 2 delta_s2k`` seen over all draws.
    """

    accepted: list
    draws: int
    best_condition: float


def draw_certified_matrices(m: int, n: int, s: int, k: int, count: int, max_draws: int, seed: int,
                            ensemble: str = "gaussian", accept: Optional[Callable] = None
                            ) -> CertifiedDraws:
    """Rejection-sample ensemble matrices whose exact RIP radii satisfy ``accept``.

    ``accept(delta_2k, delta_s2k)`` defaults to the stability condition
    ``delta_2k**2 + 2 delta_s2k < 1``. Radii come from full support
    enumeration, so only small ``n`` is practical. Stops after ``count``
    acceptances or ``max_draws`` draws.
    """
    if accept is None:
        def accept(d2k, ds2k):
            return d2k ** 2 + 2.0 * ds2k < 1.0
    accepted = []
    best = math.inf
    draws = 0
    while len(accepted) < count and draws < max_draws:
        phi = make_ensemble(m, n, ensemble, np.random.SeedSequence([seed, draws, _MATRIX])).effective
        draws += 1
        d2k, ds2k = certified_radii(phi, s, k)
        best = min(best, d2k ** 2 + 2.0 * ds2k)
        if accept(d2k, ds2k):
            accepted.append((phi, d2k, ds2k))
    return CertifiedDraws(accepted, draws, best)


def _rel_error(x, x_star) -> float:
    nx = float(np.linalg.norm(x))
    err = float(np.linalg.norm(x - x_star))
    return err / nx if nx > 0 else err


def _status(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")


def run_solve(cfg) -> dict:
    if cfg.phi_path:
        phi = SensingOperator(read_matrix_csv(cfg.phi_path), "custom")
        if not cfg.y_path:
            raise ValueError("phi_path requires y_path")
        y = read_vector(cfg.y_path)
        n = phi.shape[1]
        t_set = SupportSet.from_indices(cfg.t_indices or [], n)
        x = None
    else:
        x, t_set, phi, meas = draw_instance(cfg, 0)
        y = meas.y
        if cfg.t_indices is not None:
            t_set = SupportSet.from_indices(cfg.t_indices, cfg.n)
    res = solve_ibpdn(phi, y, cfg.epsilon, t_set, cfg.solver)
    out = {"result": res.to_dict(), "known_support": list(t_set.indices)}
    if res.converged:
        out["certificate_passed"] = bool(check_optimality(res.x_star, phi, y, cfg.epsilon, t_set).passed)
    if x is not None:
        out["error"] = float(np.linalg.norm(x - res.x_star))
        out["relative_error"] = _rel_error(x, res.x_star)
    return out


def run_constants(cfg) -> dict:
    return theorem_constants(cfg.delta_s2k, cfg.delta_2k).to_dict()


def run_rip(cfg) -> dict:
    if cfg.phi_path:
        phi = read_matrix_csv(cfg.phi_path)
    else:
        phi = make_ensemble(cfg.m, cfg.n, cfg.ensemble, cfg.seed).effective
    return rip_radius(phi, cfg.q, cfg.rip_method, cfg.samples, cfg.seed).to_dict()


def run_exact_recovery(cfg):
    def trial(i):
        x, t_set, phi, meas = draw_instance(cfg, i, epsilon=0.0)
        try:
            res = solve_ibpdn(phi, meas.y, 0.0, t_set, cfg.solver)
        except Exception as exc:  # recorded per trial, the run continues
            return [i, _seed_label(cfg, i), None, None, None, None, _status(exc)]
        return [i, _seed_label(cfg, i), float(np.linalg.norm(x - res.x_star)),
                _rel_error(x, res.x_star), res.converged, res.iterations, "ok"]
    return CSV_FIELDS["exact_recovery"], _map(trial, range(cfg.trials), cfg.workers)


def _radii_or_none(phi, s, k):
    try:
        return certified_radii(phi, s, k)
    except RipGuardError:
        return None


def run_noise_sweep(cfg):
    def trial(args):
        i, eps = args
        x, t_set, phi, meas = draw_instance(cfg, i, epsilon=eps)
        try:
            res = solve_ibpdn(phi, meas.y, eps, t_set, cfg.solver)
        except Exception:
            return None
        err = float(np.linalg.norm(x - res.x_star))
        radii = _radii_or_none(phi, len(t_set), cfg.k)
        if radii is None:
            return err, None, None
        rep = theorem_constants(radii[1], radii[0]) if radii[1] < 1 and radii[0] < 1 else None
        if rep is None or not rep.condition_ok:
            return err, None, None
        chk = verify_bound(x, res.x_star, eps, t_set, cfg.k, rep)
        return err, chk.rhs, chk.margin

    rows = []
    for eps in cfg.epsilons:
        out = _map(trial, [(i, eps) for i in range(cfg.trials)], cfg.workers)
        ok = [o for o in out if o is not None]
        mean_err = float(np.mean([o[0] for o in ok])) if ok else None
        bounded = [o for o in ok if o[1] is not None]
        if ok and len(bounded) == len(ok):
            rhs = float(np.mean([o[1] for o in bounded]))
            margin = float(min(o[2] for o in bounded))
        else:
            rhs = margin = None
        rows.append([float(eps), mean_err, rhs, margin, len(ok)])
    return CSV_FIELDS["noise_sweep"], rows


def run_phase(cfg):
    rows = []
    for m in cfg.m_values:
        for k in cfg.k_values:
            def trial(i, m=m, k=k):
                x, t_set, phi, meas = draw_instance(cfg, i, m=m, k=k, epsilon=0.0, tag=m)
                try:
                    res = solve_ibpdn(phi, meas.y, 0.0, t_set, cfg.solver)
                except Exception:
                    return False
                return _rel_error(x, res.x_star) < SUCCESS_RTOL
            wins = _map(trial, range(cfg.trials), cfg.workers)
            rows.append([int(m), int(k), sum(wins) / len(wins)])
    return CSV_FIELDS["phase"], rows


def run_ctr_compare(cfg):
    def trial(i):
        x, t_set, phi, meas = draw_instance(cfg, i)
        eps = cfg.epsilon
        tc = ~t_set.mask
        label = _seed_label(cfg, i)
        try:
            res = solve_ibpdn(phi, meas.y, eps, t_set, cfg.solver)
            rec = recover_ctr(build_ctr(phi, t_set), meas.y, eps, cfg.solver)
        except Exception as exc:
            return [i, label, None, None, None, None, None, None, _status(exc)]
        e_ib = float(np.linalg.norm((x - res.x_star)[tc]))
        e_ctr = float(np.linalg.norm((x - rec.x_tilde)[tc]))
        radii = _radii_or_none(phi, len(t_set), cfg.k)
        d2 = ds = b_ib = b_ctr = None
        if radii is not None:
            d2, ds = radii
            if d2 < 1 and ds < 1:
                rep = theorem_constants(ds, d2)
                if rep.condition_ok:
                    b_ib = verify_bound(x, res.x_star, eps, t_set, cfg.k, rep).rhs
                if rep.d_tilde is not None and eps == 0:
                    b_ctr = verify_ctr_bound(x, rec.x_tilde, t_set, cfg.k, rep).rhs
        return [i, label, d2, ds, e_ib, e_ctr, b_ib, b_ctr, "ok"]
    return CSV_FIELDS["ctr_compare"], _map(trial, range(cfg.trials), cfg.workers)


def _evolve(x, swaps, rng):
    """Move ``swaps`` support entries to fresh random positions."""
    x = x.copy()
    supp = np.flatnonzero(x)
    off = np.flatnonzero(x == 0)
    swaps = min(swaps, supp.size, off.size)
    if swaps == 0:
        return x
    leave = rng.choice(supp, swaps, replace=False)
    enter = rng.choice(off, swaps, replace=False)
    x[leave] = 0.0
    x[enter] = rng.choice((-1.0, 1.0), size=swaps) * rng.uniform(1.0, 2.0, size=swaps)
    return x


def run_sequence(cfg):
    x, _ = generate_signal(cfg.n, cfg.k_true, "exact_sparse", _seed(cfg, 0, _SIGNAL))
    rng = np.random.default_rng(_seed(cfg, 0, _SWAP))
    t_set = SupportSet.empty(cfg.n)
    rows = []
    for f in range(cfg.frames):
        if f:
            x = _evolve(x, cfg.swaps, rng)
        phi = make_ensemble(cfg.m, cfg.n, cfg.ensemble, np.random.SeedSequence([cfg.seed, f, _MATRIX]))
        meas = measure(phi, x, cfg.epsilon, np.random.SeedSequence([cfg.seed, f, _NOISE]))
        track = solve_ibpdn(phi, meas.y, cfg.epsilon, t_set, cfg.solver)
        base = solve_ibpdn(phi, meas.y, cfg.epsilon, None, cfg.solver)
        rows.append([f, len(t_set), float(np.linalg.norm(x - track.x_star)),
                     float(np.linalg.norm(x - base.x_star))])
        t_set = support_from_threshold(track.x_star, cfg.tau)
    return CSV_FIELDS["sequence"], rows


_RUNNERS = {
    "solve": run_solve,
    "constants": run_constants,
    "rip": run_rip,
    "exact_recovery": run_exact_recovery,
    "noise_sweep": run_noise_sweep,
    "phase": run_phase,
    "ctr_compare": run_ctr_compare,
    "sequence": run_sequence,
}


def run(cfg: ExperimentConfig):
    """Dispatch; returns a dict (JSON experiments) or ``(header, rows)`` (CSV experiments)."""
    return _RUNNERS[cfg.experiment](cfg)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.17g}"
    return str(v)


def format_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"
