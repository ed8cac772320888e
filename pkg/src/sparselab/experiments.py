"""Stage runners shared by the command line and the acceptance suite.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns a
:class:`StageResult`: flat tables (lists of row dicts, ready for CSV) plus a
small summary mapping. Everything is a pure function of (config, seed), and
parallel work goes through :func:`ordered_map`, so worker count never changes
a number.
"""

from __future__ import annotations

import math
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import measure as M
from . import model as _model
from . import spectra as S
from . import theory as Th
from . import transfer as Tr
from .errors import SparseLabError, ValidationError
from .parallel import ordered_map

SCHEMA = "sparselab.result/1"


@dataclass(frozen=True)
class StageResult:
    tables: dict
    summary: dict = field(default_factory=dict)
    # arrays for figures only; never serialized
    extras: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass(frozen=True)
class ResultRecord:
    schema: str
    version: str
    config: dict
    stages: dict
    tables: dict
    summaries: dict
    meta: dict

    def numeric_payload(self) -> dict:
        """Everything except wall-clock and host metadata."""
        return {k: getattr(self, k) for k in ("schema", "version", "config", "stages", "tables", "summaries")}


def clean(x):
    """Plain JSON-safe Python values; non-finite floats become None."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [clean(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _stage_params(cfg):
    return cfg.model, cfg.profile


def _truncation(cfg):
    return None if cfg.truncation == "auto" else int(cfg.truncation)


def _n_floor(cfg, J):
    return _truncation(cfg) or _model.truncation_floor(cfg.profile, J)


def theta_values(cfg) -> list:
    """Uniform grid on [theta_min, 1] followed by the seeded uniform draws."""
    pol = cfg.theta
    grid = list(np.linspace(pol.theta_min, 1.0, pol.grid)) if pol.grid > 1 else ([1.0] if pol.grid else [])
    gen = _model.philox_generator(cfg.seed, 2**32)
    draws = list(gen.uniform(pol.theta_min, 1.0, pol.draws))
    return [float(t) for t in grid + draws]


# phase diagram -------------------------------------------------------------

def run_phase_diagram(cfg) -> StageResult:
    lams = np.linspace(-2.0, 2.0, cfg.phase_lambdas + 2)[1:-1]
    ratios = np.linspace(0.0, 1.0, cfg.phase_ratios, endpoint=False)
    L, R, tag = Th.phase_diagram(lams, ratios)
    rows = [{"lambda": float(a), "ratio": float(b), "region": str(c)} for a, b, c in zip(L, R, tag)]
    d = cfg.model.derived()
    edges = Th.mobility_edges(d.v, cfg.model.beta)
    summary = {"ratio": d.ratio, "v": d.v, "v_c": d.v_c, "p_c": d.p_c,
               "mobility_edge": None if edges is None else edges[1]}
    return StageResult({"phase_diagram": rows}, summary)


# transfer-matrix stages ----------------------------------------------------

def _inside_I(params, lam):
    edges = Th.mobility_edges(params.v, params.beta)
    return edges is not None and abs(lam) < edges[1]


def run_growth(cfg, workers=1) -> StageResult:
    params, profile = _stage_params(cfg)
    rows, rate_rows = [], []
    extras = {}
    short = max(1, cfg.angle_depth // 4)
    for e in cfg.energy_points:
        est = Tr.growth_rate(params, e, cfg.growth_depth, cfg.growth_samples, cfg.seed, profile, workers=workers)
        _, ang = Tr.growth_rate(params, e, cfg.angle_depth, cfg.angle_samples, cfg.seed, profile,
                                return_angles=True, workers=workers)
        d_short = np.array([Tr.angle_discrepancy(a[:short]) for a in ang])
        d_long = np.array([Tr.angle_discrepancy(a) for a in ang])
        inside = _inside_I(params, e.lam)
        target = Tr.growth_target(params, e)
        rows.append({
            "label": e.label, "lambda": e.lam, "rationality": e.rationality, "excluded": e.excluded,
            "inside_I": inside, "J": cfg.growth_depth, "samples": cfg.growth_samples,
            "rate_mean": est.rate_mean, "rate_stderr": est.rate_stderr, "target": target,
            "rel_error": (est.rate_mean - target) / target if target else None,
            "angle_depth": cfg.angle_depth, "short_depth": short,
            "disc_short_mean": float(d_short.mean()), "disc_long_mean": float(d_long.mean()),
            "frac_long_below_short": float(np.mean(d_long < d_short)),
        })
        rate_rows += [{"label": e.label, "sample": k, "rate": float(r)} for k, r in enumerate(est.rates)]
        extras[e.label] = ang
    return StageResult({"growth": rows, "growth_samples": rate_rows}, {}, {"angles": extras})


# spectral stages -----------------------------------------------------------

def run_spectrum(cfg) -> StageResult:
    params, profile = _stage_params(cfg)
    rz = _model.realize(params, cfg.spectrum_depth, cfg.seed, 0, _truncation(cfg), profile)
    T = S.truncation(rz.coeffs, params.phi)
    mu = S.spectral_measure(T)
    rows = [{"atom": float(a), "weight": float(w)} for a, w in zip(mu.atoms, mu.weights)]
    summary = {"N": T.N, "placed": rz.coeffs.placed, "dropped": rz.coeffs.dropped,
               "total_mass": mu.total_mass, "first_moment": mu.moment(1)}
    return StageResult({"spectrum": rows}, summary)


def _dimension_target(params, lam):
    a = Th.local_dimension(lam, params.v, params.beta) if abs(lam) < 2 else -math.inf
    return max(0.0, a) if math.isfinite(a) else 0.0


def run_dimension(cfg, workers=1) -> StageResult:
    params, profile = _stage_params(cfg)
    lo, hi = cfg.scale_exponents
    n_floor = _n_floor(cfg, cfg.spectrum_depth)
    scales = S.dyadic_scales(lo, hi, N=n_floor)
    if scales.size < 2:
        raise ValidationError(
            f"fewer than two dyadic scales in [2^{lo}, 2^{hi}] clear the level-spacing floor for N={n_floor}",
            "spectra", "scales")
    rows, mass_rows = [], []
    for e in cfg.energy_points:
        fit = S.dimension_fit(params, e.lam, cfg.spectrum_depth, cfg.samples, scales, cfg.seed,
                              _truncation(cfg), workers, profile=profile)
        target = _dimension_target(params, e.lam)
        rows.append({
            "label": e.label, "lambda0": e.lam, "inside_I": _inside_I(params, e.lam),
            "alpha_hat": fit.alpha_hat, "alpha_target": target, "residual": fit.residual,
            "samples": fit.samples, "spacing_floor": fit.spacing_floor,
            "scale_min": float(fit.scales.min()), "scale_max": float(fit.scales.max()),
        })
        mass_rows += [{"label": e.label, "scale": float(s), "mass": float(m)}
                      for s, m in zip(fit.scales, fit.masses)]
    summary = {"scales_used": [float(s) for s in scales], "n_floor": n_floor}
    return StageResult({"dimension": rows, "dimension_masses": mass_rows}, summary)


def _window_measure(task):
    params, J, seed, stream, N, profile, lo, hi = task
    rz = _model.realize(params, J, seed, stream, N, profile)
    T = S.truncation(rz.coeffs, params.phi)
    return S.spectral_measure(T, 1e-12, lo, hi)


def window_measures(params, J, seed, samples, lo, hi, N=None, profile=None, workers=1):
    """Site-0 spectral measures restricted to [lo, hi), one per disorder stream."""
    tasks = [(params, J, seed, k, N, profile, lo, hi) for k in range(samples)]
    return ordered_map(_window_measure, tasks, workers)


def averaged_decay(measures, t_min=10.0):
    """Disorder-averaged I(T) on dyadic times in (t_min, min heis/10]."""
    heis = min(M.heisenberg_time(mu) for mu in measures)
    T = M.dyadic_times(t_min, heis)
    M.check_time_grid(T, heis, t_min=min(1.0, t_min))
    I = np.mean([M.time_average(mu, T) for mu in measures], axis=0)
    slope, icpt, resid = S.loglog_slope(T, I)
    return M.DecayFit(slope, math.exp(icpt), (float(T[0]), float(T[-1])), resid,
                      M.TimeAverage(T, I, heis))


def run_decay(cfg, workers=1) -> StageResult:
    params, profile = _stage_params(cfg)
    hw = cfg.decay_half_width
    rows, curve_rows = [], []
    for e in cfg.energy_points:
        mus = window_measures(params, cfg.spectrum_depth, cfg.seed, cfg.decay_samples,
                              e.lam - hw, e.lam + hw, _truncation(cfg), profile, workers)
        fit = averaged_decay(mus, cfg.decay_t_min)
        rows.append({
            "label": e.label, "lambda0": e.lam, "half_width": hw, "samples": cfg.decay_samples,
            "exponent_hat": fit.exponent_hat, "target": 1.0 - _dimension_target(params, e.lam),
            "C_hat": fit.C_hat, "T_min": fit.window[0], "T_max": fit.window[1],
            "residual": fit.residual, "heis_time": fit.curve.heis_time,
        })
        curve_rows += [{"label": e.label, "T": float(t), "I": float(i)}
                       for t, i in zip(fit.curve.T_grid, fit.curve.I_values)]
    return StageResult({"decay": rows, "decay_curves": curve_rows})


# Kronecker stage -----------------------------------------------------------

def auto_bins(W, n_atoms, factor=10.0):
    """Largest power of two whose half-bins stay above ``factor`` level spacings 4/N."""
    floor = factor * 4.0 / n_atoms
    bins = 16
    while (2 * W) / (4 * bins) >= floor:
        bins *= 2
    return bins


def _factor_measure(task):
    params, J, seed, stream, N, profile = task
    rz = _model.realize(params, J, seed, stream, N, profile)
    T = S.truncation(rz.coeffs, params.phi)
    return S.spectral_measure(T), T.N


def _outer_measure(params, J, seed, stream, N, profile, cut):
    rz = _model.realize(params, J, seed, stream, N, profile)
    T = S.truncation(rz.coeffs, params.phi)
    lo = S.spectral_measure(T, 1e-12, None, -cut)
    hi = S.spectral_measure(T, 1e-12, cut, None)
    return M.AtomicMeasure(np.r_[lo.atoms, hi.atoms], np.r_[lo.weights, hi.weights])


def _gershgorin_hi(params, J, seed, stream, N, profile):
    rz = _model.realize(params, J, seed, stream, N, profile)
    return max(abs(x) for x in S.truncation(rz.coeffs, params.phi).gershgorin())


def _outer_task(task):
    return _outer_measure(*task)


def kronecker_factors(cfg, workers=1):
    params, profile = _stage_params(cfg)
    kc = cfg.kronecker
    tasks = [(params, kc.J, cfg.seed, s, _truncation(cfg), profile) for s in kc.streams]
    (mu1, n1), (mu2, n2) = ordered_map(_factor_measure, tasks, workers)
    return mu1, mu2, n1, n2


def run_kronecker(cfg, workers=1) -> StageResult:
    params, profile = _stage_params(cfg)
    kc = cfg.kronecker
    ap = Th.choose_parameters(params.p, params.beta, kc.a)
    lt, lp = ap.lambda_tilde_plus, ap.lambda_plus
    mu1, mu2, n1, n2 = kronecker_factors(cfg, workers)
    w0 = ap.window
    r1, r2 = M.restrict(mu1, w0), M.restrict(mu2, w0)
    # outer atoms again with every truncation doubled; a sum above lp (1 + theta)
    # needs both atoms above lp - (G - lp) / theta, G the Gershgorin bound
    thetas = theta_values(cfg)
    G = max(_gershgorin_hi(params, kc.J, cfg.seed, s, 2 * n, profile) for s, n in zip(kc.streams, (n1, n2)))
    cut = max(0.0, lp - (G - lp) / min(thetas)) - 1e-9
    o_tasks = [(params, kc.J, cfg.seed, s, 2 * n, profile, cut) for s, n in zip(kc.streams, (n1, n2))]
    d1, d2 = ordered_map(_outer_task, o_tasks, workers)
    rows, dens_rows = [], []
    for th in thetas:
        W = lt * (1.0 + th)
        bins = kc.bins if kc.bins != "auto" else auto_bins(W, min(n1, n2))
        hd = M.histogram_density((mu1, mu2), bins, (-W, W), theta=th)
        heis = min(M.heisenberg_time(r1), M.heisenberg_time(r2) / th)
        l2 = M.l2_criterion(r1, r2, th, M.dyadic_times(1.0, heis))
        thr = lp * (1.0 + th)
        m_n = M.kronecker_outer_max_atom(mu1, mu2, th, thr)
        m_2n = M.kronecker_outer_max_atom(d1, d2, th, thr)
        rows.append({
            "theta": th, "central_half_width": W, "bins": bins, "stability": hd.stability,
            "l2_tail_slope": l2.tail_slope, "l2_T_max": float(l2.T_grid[-1]),
            "outer_threshold": thr, "outer_max_atom_N": m_n, "outer_max_atom_2N": m_2n,
            "outer_ratio": m_2n / m_n if m_n > 0 else None,
        })
        centers = 0.5 * (hd.edges[:-1] + hd.edges[1:])
        dens_rows += [{"theta": th, "center": float(c), "density": float(d)} for c, d in zip(centers, hd.density)]
    summary = {"N1": n1, "N2": n2, "atoms1": len(mu1), "atoms2": len(mu2),
               "lambda_tilde_plus": lt, "lambda_plus": lp,
               "restricted_mass1": r1.total_mass, "restricted_mass2": r2.total_mass}
    return StageResult({"kronecker": rows, "kronecker_density": dens_rows}, summary)


def run_params(cfg) -> StageResult:
    p, beta, a = cfg.model.p, cfg.model.beta, cfg.kronecker.a
    checks = [{"inequality": c.name, "lhs": c.lhs, "rhs": c.rhs, "ok": c.ok} for c in Th.admissibility(p, beta, a)]
    ap = Th.choose_parameters(p, beta, a)
    ver = [{"inequality": k, "lhs": None, "rhs": None, "ok": v} for k, v in Th.verify_appendix(ap).items()]
    d = ap.as_dict()
    d.pop("partition", None)
    return StageResult({"params_checks": checks + ver}, {"appendix": d})


# suite ---------------------------------------------------------------------

STAGES = {
    "phase_diagram": lambda cfg, w: run_phase_diagram(cfg),
    "params": lambda cfg, w: run_params(cfg),
    "growth": run_growth,
    "spectrum": lambda cfg, w: run_spectrum(cfg),
    "dimension": run_dimension,
    "decay": run_decay,
    "kronecker": run_kronecker,
}


def build_record(cfg, results: dict, errors: dict, started: float, workers: int) -> ResultRecord:
    tables, summaries, stages = {}, {}, {}
    for name in results:
        stages[name] = {"status": "ok", "kind": None, "error": None}
        tables.update(results[name].tables)
        if results[name].summary:
            summaries[name] = results[name].summary
    for name, (kind, msg) in errors.items():
        stages[name] = {"status": "error", "kind": kind, "error": msg}
    meta = {"wall_clock_s": time.time() - started, "workers": workers,
            "python": platform.python_version(), "numpy": np.__version__,
            "created_unix": time.time()}
    return ResultRecord(SCHEMA, __version__, clean(cfg.to_dict()), clean(stages), clean(tables),
                        clean(summaries), clean(meta))


def run_stages(cfg, names, workers=1):
    """Run the named stages; a failing stage is recorded and the rest continue."""
    started = time.time()
    results, errors = {}, {}
    for name in names:
        if name == "kronecker" and not cfg.kronecker.enabled:
            continue
        try:
            results[name] = STAGES[name](cfg, workers)
        except ValidationError as exc:
            errors[name] = ("validation", str(exc))
        except SparseLabError as exc:
            errors[name] = ("compute", str(exc))
    return build_record(cfg, results, errors, started, workers), results


def run_transition_suite(cfg, workers=1):
    return run_stages(cfg, list(STAGES), workers)
