"""Command-line driver: config parsing, loss sweeps, verdicts and plot-ready dumps.

Usage::

    calr spectrum --config run.json --out results/
    calr sweep    --config run.json --out results/ --engine both --workers 4
    calr classify --config run.json --out results/
    calr field    --config run.json --out results/

Exit codes: 0 on success, 1 when a numerical tolerance is violated, 2 for an
invalid configuration.  All floats are written with 17 significant digits, so
identical configurations give byte-identical files.

Config
------
A JSON object.  Lengths are dimensionless.

``geometry`` (required)
    ``{"annulus": {"r_i": 1, "r_e": 2}, "n_nodes": 256}`` or
    ``{"inner": {"kind": "ellipse", "a": 2, "b": 1}, "outer": {"kind": "circle", "radius": 3}, "n_nodes": 256}``.
``source`` (required)
    ``kind`` is one of ``dipole`` (``y``, ``a``), ``quadrupole`` (``y``, ``A``),
    ``charge-collection`` (``points``, ``charges``), ``fourier-coeffs`` or
    ``shell-bump`` (``r1``, ``r2``).  The last two take their coefficients
    from ``coeffs`` (``{"n": [...], "re": [...], "im": [...]}``), ``csv``
    (columns ``n,re,im``) or ``counterexample`` (``{"j_max": 40}``).
``delta``
    ``{"start": 1e-2, "stop": 1e-10, "points_per_decade": 5}`` or ``{"values": [...]}``.
``engine``, ``n_max``, ``sample_count``, ``direct_energy``, ``field``, ``fit``, ``tolerances``
    See :class:`RunConfig`.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import annulus as an
from . import npsystem as nps
from .geometry import GeometryError, ProblemGeometry, make_curve, distance_to_curve
from .potentials import NEAR_BOUNDARY_REL, NearBoundaryError
from .sources import (
    ChargeCollection,
    CoeffSequence,
    Dipole,
    FourierCoeffs,
    Quadrupole,
    ShellBump,
    SourceError,
    boundary_data,
)
from .utils.validation import check_delta_grid
from .verdict import Verdict

logger = logging.getLogger("calr")

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG = 0, 1, 2
ENGINES = ("analytic", "bem", "both")
SWEEP_COLUMNS = ("delta", "re_z", "im_z", "e_spectral", "e_direct", "sup_v_rstar", "sup_v_a", "cond_est")
FIELD_COLUMNS = ("delta", "x", "y", "re_v", "im_v", "grad_abs", "re_v_norm", "im_v_norm")
# the field at |x| = a sits on the boundary of the region where the limit field
# stays bounded; samples are taken just outside
A_SAMPLE_FACTOR = 1.01

DEFAULT_TOLERANCES = {
    "spectrum_match": 1e-6,
    "containment": 1e-3,
    "cross_energy_rtol": 1e-2,
    "cross_field_rtol": 1e-6,
    "cross_field_atol": 1e-12,
    "cross_delta_min": 0.0,
}
DEFAULT_STOP = {"analytic": 1e-10, "bem": 1e-6}


class ConfigError(ValueError):
    """Invalid or incomplete run configuration (exit code 2)."""


class ToleranceError(RuntimeError):
    """A numerical check failed (exit code 1)."""


# --------------------------------------------------------------------------
# configuration


def delta_grid(start, stop, points_per_decade):
    """Log-spaced decreasing grid from ``start`` to ``stop`` inclusive."""
    if not (start > 0 and stop > 0 and start > stop):
        raise ConfigError("delta grid needs start > stop > 0")
    if int(points_per_decade) != points_per_decade or points_per_decade < 1:
        raise ConfigError("points_per_decade must be a positive integer")
    decades = math.log10(start / stop)
    count = int(round(decades * points_per_decade)) + 1
    return np.logspace(math.log10(start), math.log10(stop), count)


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing key {key!r} in {where}")
    return mapping[key]


def _build_geometry(spec):
    if not isinstance(spec, dict):
        raise ConfigError("geometry must be an object")
    n = spec.get("n_nodes", 256)
    if int(n) != n or n < 16 or n % 2:
        raise ConfigError("n_nodes must be an even integer >= 16")
    n = int(n)
    if "annulus" in spec:
        ann = spec["annulus"]
        r_i, r_e = float(_require(ann, "r_i", "annulus")), float(_require(ann, "r_e", "annulus"))
        return ProblemGeometry.annulus(r_i, r_e, n)
    inner, outer = dict(_require(spec, "inner", "geometry")), dict(_require(spec, "outer", "geometry"))
    ni = int(inner.pop("n_nodes", n))
    no = int(outer.pop("n_nodes", n))
    ci = make_curve(_require(inner, "kind", "inner"), **{k: v for k, v in inner.items() if k != "kind"})
    co = make_curve(_require(outer, "kind", "outer"), **{k: v for k, v in outer.items() if k != "kind"})
    return ProblemGeometry(ci, co, ni, no)


def _load_coeffs(spec, config, base_dir):
    if "counterexample" in spec:
        if config is None:
            raise ConfigError("counterexample coefficients need an annulus geometry")
        j_max = int(spec["counterexample"].get("j_max", 40))
        return an.counterexample(config, j_max)[0]
    if "coeffs" in spec:
        c = spec["coeffs"]
        n = np.asarray(_require(c, "n", "coeffs"), dtype=np.int64)
        vals = np.asarray(_require(c, "re", "coeffs"), float) + 1j * np.asarray(c.get("im", [0.0] * n.size), float)
        return CoeffSequence.from_values(n, vals, realizability="shell-bump-only")
    if "csv" in spec:
        path = Path(spec["csv"])
        if not path.is_absolute():
            path = base_dir / path
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read coefficient file {path}: {exc}") from exc
        n = [int(r["n"]) for r in rows]
        vals = [complex(float(r["re"]), float(r.get("im") or 0.0)) for r in rows]
        return CoeffSequence.from_values(n, vals, realizability="shell-bump-only")
    raise ConfigError("coefficient sources need one of 'coeffs', 'csv' or 'counterexample'")


def _build_source(spec, geometry, base_dir):
    kind = _require(spec, "kind", "source")
    config = _annulus_config(geometry)
    if kind == "dipole":
        return Dipole(y=tuple(_require(spec, "y", "source")), a=tuple(spec.get("a", (1.0, 0.0))))
    if kind == "quadrupole":
        return Quadrupole(y=tuple(_require(spec, "y", "source")), A=tuple(map(tuple, spec.get("A", ((1.0, 0.0), (0.0, 0.0))))))
    if kind == "charge-collection":
        return ChargeCollection(points=tuple(map(tuple, _require(spec, "points", "source"))), charges=tuple(_require(spec, "charges", "source")))
    if kind in ("fourier-coeffs", "shell-bump"):
        if config is None:
            raise ConfigError(f"{kind} sources are defined on a centred annulus only")
        coeffs = _load_coeffs(spec, config, base_dir)
        if kind == "fourier-coeffs":
            return FourierCoeffs(coeffs=coeffs, r_e=config.r_e)
        return ShellBump(
            coeffs=coeffs,
            r_e=config.r_e,
            r1=float(_require(spec, "r1", "source")),
            r2=float(_require(spec, "r2", "source")),
            r_star=config.r_star,
        )
    raise ConfigError(f"unknown source kind {kind!r}")


def _annulus_config(geometry):
    if geometry.is_concentric_annulus() and geometry.outer.center == (0.0, 0.0):
        return an.AnnulusConfig(geometry.inner.radius, geometry.outer.radius)
    return None


@dataclass
class RunConfig:
    """Validated run configuration.

    Attributes
    ----------
    geometry : ProblemGeometry
    source : SourceSpec
    deltas : ndarray
        Strictly decreasing loss grid.
    engine : {"analytic", "bem", "both"}
    n_max : int
        Fourier modes kept by the analytic engine.
    sample_count : int
        Points per circle for the field sup-norms.
    direct_energy : bool
        Run the shell quadrature in the dense engine.
    field : dict
        ``radii``, ``n_theta``, optional ``points``, ``deltas`` and ``include_layers``.
    fit : dict
        ``delta_max`` and ``min_decades`` for the blow-up exponent fit.
    tolerances : dict
    """

    geometry: ProblemGeometry
    source: object
    deltas: np.ndarray
    engine: str
    n_max: int = 256
    sample_count: int = 256
    direct_energy: bool = True
    field: dict = dc_field(default_factory=dict)
    fit: dict = dc_field(default_factory=dict)
    tolerances: dict = dc_field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    raw: dict = dc_field(default_factory=dict, repr=False)

    @property
    def annulus(self):
        return _annulus_config(self.geometry)

    @classmethod
    def from_dict(cls, raw, engine=None, base_dir=Path(".")):
        if not isinstance(raw, dict) or not raw:
            raise ConfigError("configuration is empty")
        try:
            geometry = _build_geometry(_require(raw, "geometry", "config"))
            source = _build_source(_require(raw, "source", "config"), geometry, base_dir)
        except (GeometryError, SourceError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        engine = engine or raw.get("engine") or ("analytic" if _annulus_config(geometry) else "bem")
        if engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")
        if engine in ("analytic", "both") and _annulus_config(geometry) is None:
            raise ConfigError("the analytic engine requires a centred concentric annulus")
        dspec = raw.get("delta", {})
        try:
            if "values" in dspec:
                deltas = check_delta_grid(dspec["values"])
            else:
                stop = DEFAULT_STOP["analytic" if engine == "analytic" else "bem"]
                deltas = delta_grid(
                    float(dspec.get("start", 1e-2)), float(dspec.get("stop", stop)), dspec.get("points_per_decade", 5)
                )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid delta grid: {exc}") from exc
        tol = dict(DEFAULT_TOLERANCES)
        unknown = set(raw.get("tolerances", {})) - set(tol)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
        tol.update({k: float(v) for k, v in raw.get("tolerances", {}).items()})
        n_max = raw.get("n_max", 256)
        sample_count = raw.get("sample_count", 256)
        for name, val in (("n_max", n_max), ("sample_count", sample_count)):
            if int(val) != val or val < 1:
                raise ConfigError(f"{name} must be a positive integer")
        fspec = dict(raw.get("field", {}))
        fit = {"delta_max": 1e-3, "min_decades": 5.0}
        fit.update(raw.get("fit", {}))
        return cls(
            geometry=geometry,
            source=source,
            deltas=deltas,
            engine=engine,
            n_max=int(n_max),
            sample_count=int(sample_count),
            direct_energy=bool(raw.get("direct_energy", True)),
            field=fspec,
            fit=fit,
            tolerances=tol,
            raw=raw,
        )

    @classmethod
    def from_file(cls, path, engine=None):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not text.strip():
            raise ConfigError(f"config file {path} is empty")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw, engine=engine, base_dir=path.parent)


# --------------------------------------------------------------------------
# deterministic output


def fmt_float(x):
    """17 significant digits; empty when missing, ``nan``/``inf`` spelled out."""
    if x is None:
        return ""
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return format(x, ".17g")


def _json_text(obj, indent=0):
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_json_text(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) or v is None for v in seq):
            return "[" + ", ".join(_json_text(v) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + _json_text(v, indent + 1) for v in seq) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj):
    Path(path).write_text(_json_text(obj) + "\n")


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt_float(row.get(c)) if not isinstance(row.get(c), str) else row[c] for c in columns])


# --------------------------------------------------------------------------
# engines


def _sup_radii(cfg):
    """Sup-norm circles ``r_*``, ``1.01 a`` and ``2 a`` (annulus only)."""
    ac = cfg.annulus
    if ac is None:
        return {}
    return {"sup_v_rstar": ac.r_star, "sup_v_a": A_SAMPLE_FACTOR * ac.a, "sup_v_2a": 2 * ac.a}


class AnalyticEngine:
    """Mode-sum oracle on a centred annulus."""

    name = "analytic"

    def __init__(self, cfg):
        self.cfg = cfg
        self.config = cfg.annulus
        self.coeffs = an.source_coeffs(cfg.source, self.config, cfg.n_max)
        self.circles = {k: an.circle_points(r, cfg.sample_count) for k, r in _sup_radii(cfg).items()}

    def record(self, delta):
        z = complex(nps.z_delta(delta))
        rec = {"delta": delta, "re_z": z.real, "im_z": z.imag}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            es = an.energy_series(delta, self.coeffs, self.config)
        rec.update(e_spectral=es.exact_layer, e_direct=es.exact, e_series=es.series, cond_est=None)
        for key, pts in self.circles.items():
            rec[key] = float(np.abs(an.layer_series(pts, delta, self.coeffs, self.config)).max())
        return rec

    def field(self, delta, x, include_layers=True):
        if include_layers:
            V, G = an.layer_series(x, delta, self.coeffs, self.config, gradient=True)
            energy = an.energy_series(delta, self.coeffs, self.config).exact
        else:
            V, G = np.zeros(x.shape[0], complex), np.zeros((x.shape[0], 2), complex)
            energy = delta * an.source_shell_energy(self.coeffs, self.config)
        F, dF = self.cfg.source.potential(x)
        return F + V, dF + G, energy


class DenseEngine:
    """Nystrom discretization with dense LU solves."""

    name = "bem"

    def __init__(self, cfg):
        self.cfg = cfg
        geo = cfg.geometry
        self.ops = nps.assemble_block_operators(geo)
        self.spec = nps.build_symmetrization(self.ops)
        self.g = boundary_data(cfg.source, geo, with_coeffs=False).stacked
        self.circles = {k: an.circle_points(r, cfg.sample_count) for k, r in _sup_radii(cfg).items()}

    def _layers(self, Phi, x, gradient=False):
        geo = self.cfg.geometry
        vi = nps.layer_field(geo.inner_bnd, Phi.phi_i, x, gradient)
        ve = nps.layer_field(geo.outer_bnd, Phi.phi_e, x, gradient)
        if gradient:
            return vi[0] + ve[0], vi[1] + ve[1]
        return vi + ve

    def record(self, delta):
        solver = nps.factorize_perturbed(self.ops, delta)
        Phi = solver.solve(self.g)
        rec = {"delta": delta, "re_z": solver.z.real, "im_z": solver.z.imag, "cond_est": solver.cond_est}
        rec["e_spectral"] = float(nps.shell_energy_spectral(self.spec, delta, self.g))
        rec["e_direct"] = None
        if self.cfg.direct_energy:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", nps.RefinementWarning)
                rec["e_direct"] = nps.shell_energy_direct(self.cfg.geometry, Phi, self.cfg.source, delta)
            msgs = [str(w.message) for w in caught if issubclass(w.category, nps.RefinementWarning)]
            if msgs:
                rec["warnings"] = msgs
        for key, pts in self.circles.items():
            rec[key] = float(np.abs(self._layers(Phi, pts)).max())
        return rec

    def field(self, delta, x, include_layers=True):
        Phi = nps.solve_perturbed(self.ops, delta, self.g)
        if not include_layers:
            Phi = nps.DensityPair(np.zeros_like(Phi.phi_i), np.zeros_like(Phi.phi_e))
        V, G = self._layers(Phi, x, gradient=True)
        F, dF = self.cfg.source.potential(x)
        energy = nps.shell_energy_direct(self.cfg.geometry, Phi, self.cfg.source, delta)
        return F + V, dF + G, energy


def _engines(cfg):
    names = ("analytic", "bem") if cfg.engine == "both" else (cfg.engine,)
    return [AnalyticEngine(cfg) if n == "analytic" else DenseEngine(cfg) for n in names]


def _safe_record(engine, delta):
    try:
        return engine.record(float(delta))
    except (ArithmeticError, ValueError, np.linalg.LinAlgError, NearBoundaryError) as exc:
        logger.warning("%s engine failed at delta=%g: %s", engine.name, delta, exc)
        z = complex(nps.z_delta(delta))
        rec = {c: None for c in SWEEP_COLUMNS}
        rec.update(delta=float(delta), re_z=z.real, im_z=z.imag, error=str(exc))
        return rec


def run_records(engine, deltas, workers=1):
    """Per-delta records in grid order, computed on up to ``workers`` threads."""
    if workers <= 1:
        return [_safe_record(engine, d) for d in deltas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda d: _safe_record(engine, d), deltas))


def fit_exponent(records, fit):
    """Blow-up fit on the full energy (the layer energy when it is missing)."""
    key = "e_direct" if all(r.get("e_direct") is not None for r in records) else "e_spectral"
    sel = [r for r in records if r["delta"] <= fit["delta_max"] and r.get(key) is not None]
    if len(sel) < 4:
        return {"energy": key, "error": "fewer than 4 usable points below delta_max"}
    d = np.array([r["delta"] for r in sel])
    E = np.array([r[key] for r in sel])
    try:
        bf = an.blowup_exponent_fit(d, E, min_decades=fit["min_decades"])
    except ValueError as exc:
        return {"energy": key, "error": str(exc)}
    return {
        "energy": key,
        "window": [float(d.min()), float(d.max())],
        "slope": bf.slope,
        "log_coef": bf.log_coef,
        "intercept": bf.intercept,
        "r2": bf.r2,
    }


def _close(a, b, rtol, atol=0.0):
    return abs(a - b) <= atol + rtol * max(abs(a), abs(b))


def cross_check(analytic, dense, tol):
    """Compare shared scalars; returns a list of violation messages."""
    bad = []
    for ra, rb in zip(analytic, dense):
        if ra["delta"] < tol["cross_delta_min"]:
            continue
        for key in ("e_spectral", "e_direct"):
            a, b = ra.get(key), rb.get(key)
            if a is not None and b is not None and not _close(a, b, tol["cross_energy_rtol"]):
                bad.append(f"{key} at delta={ra['delta']:.3g}: analytic {a:.6g} vs bem {b:.6g}")
        # field sups are compared relative to the largest sampled sup of the record
        keys = ("sup_v_rstar", "sup_v_a", "sup_v_2a")
        scale = max([abs(ra[k]) for k in keys if ra.get(k) is not None], default=0.0)
        for key in keys:
            a, b = ra.get(key), rb.get(key)
            if a is not None and b is not None and abs(a - b) > tol["cross_field_atol"] + tol["cross_field_rtol"] * scale:
                bad.append(f"{key} at delta={ra['delta']:.3g}: analytic {a:.6g} vs bem {b:.6g}")
    return bad


# --------------------------------------------------------------------------
# commands


def _base_report(cfg):
    rep = {"engine": cfg.engine, "geometry": cfg.raw.get("geometry"), "source": cfg.raw.get("source")}
    if cfg.annulus is not None:
        rep["annulus"] = cfg.annulus.to_dict()
    return rep


def cmd_spectrum(cfg, out, workers=1):
    """Eigenvalues of the symmetrized operator plus the annulus comparison."""
    sym = nps.NPSymmetrizer().fit(cfg.geometry)
    lam = sym.eigenvalues_
    tol = cfg.tolerances
    rows = [{"index": i, "eigenvalue": float(v)} for i, v in enumerate(lam)]
    report = _base_report(cfg)
    report.update(
        n_eigenvalues=int(lam.size),
        max_abs=float(np.abs(lam).max()),
        calderon_residual=sym.calderon_residual_,
        intertwining_residual=sym.spectrum_.intertwining_residual(),
    )
    failures = []
    bound = 0.5 + tol["containment"]
    if np.abs(lam).max() > bound:
        failures.append(f"eigenvalue {np.abs(lam).max():.6g} outside [-{bound:g}, {bound:g}]")
    ac = cfg.annulus
    if ac is not None:
        exact = an.analytic_A_eigenvalues(ac, lam.size // 4 + 1)[: lam.size]
        # degenerate +/- pairs come out in either order: pair by value inside
        # the top block, then row by row below it
        k = min(32, lam.size)
        paired = exact.copy()
        order = np.argsort(lam[:k])
        paired[order] = np.sort(exact[:k])
        for i, row in enumerate(rows):
            row["analytic"] = float(paired[i])
            row["abs_error"] = float(abs(lam[i] - paired[i]))
        err = np.abs(lam[:k] - paired[:k])
        report["top_match_max_error"] = float(err.max())
        if err.max() > tol["spectrum_match"]:
            failures.append(f"top eigenvalues deviate from +/-rho^n/2 by {err.max():.3e}")
    cols = ("index", "eigenvalue", "analytic", "abs_error")
    write_csv(out / "spectrum.csv", cols, rows)
    report["failures"] = failures
    write_json(out / "spectrum.json", report)
    if failures:
        raise ToleranceError("; ".join(failures))
    return report


def cmd_sweep(cfg, out, workers=1):
    engines = _engines(cfg)
    results = {e.name: run_records(e, cfg.deltas, workers) for e in engines}
    report = _base_report(cfg)
    report["engines"] = {}
    for name, recs in results.items():
        report["engines"][name] = {"fit": fit_exponent(recs, cfg.fit), "records": recs}
    primary = engines[0].name
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, results[primary])
    failures = []
    if cfg.engine == "both":
        write_csv(out / "sweep_bem.csv", SWEEP_COLUMNS, results["bem"])
        failures = cross_check(results["analytic"], results["bem"], cfg.tolerances)
    report["cross_check_failures"] = failures
    report["fit"] = report["engines"][primary]["fit"]
    write_json(out / "sweep.json", report)
    if failures:
        raise ToleranceError("; ".join(failures[:5]))
    return report


def _spectral_exponent(spec, g, cfg):
    recs = [{"delta": float(d), "e_spectral": float(nps.shell_energy_spectral(spec, d, g))} for d in cfg.deltas]
    return fit_exponent(recs, cfg.fit)


def cmd_classify(cfg, out, workers=1):
    ac = cfg.annulus
    report = _base_report(cfg)
    if ac is not None and cfg.engine in ("analytic", "both"):
        coeffs = an.source_coeffs(cfg.source, ac, cfg.n_max)
        verdict = an.classify(coeffs, ac)
        recs = [{"delta": float(d), "e_direct": an.energy_series(d, coeffs, ac).exact} for d in cfg.deltas]
        verdict.evidence["blowup_fit"] = fit_exponent(recs, cfg.fit)
        # every eigenvalue +/-rho^n/2 is nonzero, so the kernel is trivial
        verdict.evidence["kernel_component"] = 0.0
        verdict.evidence["method"] = "coefficient-growth"
    else:
        sym = nps.NPSymmetrizer().fit(cfg.geometry)
        g = boundary_data(cfg.source, cfg.geometry, with_coeffs=False).stacked
        verdict = nps.classify_spectral(sym.spectrum_, g)
        verdict.evidence["blowup_fit"] = _spectral_exponent(sym.spectrum_, g, cfg)
        verdict.evidence["method"] = "spectral-level-heuristic"
        if ac is not None:
            verdict.evidence.update(r_star=ac.r_star, a=ac.a)
    realizability = getattr(cfg.source, "realizability", None)
    if realizability:
        verdict.evidence["realizability"] = realizability
    report.update(verdict.to_dict())
    write_json(out / "verdict.json", report)
    if verdict.verdict is Verdict.INCONCLUSIVE:
        logger.warning("classification inconclusive")
    return report


def _field_points(fspec, cfg):
    if "points" in fspec:
        return np.asarray(fspec["points"], dtype=float).reshape(-1, 2)
    radii = fspec.get("radii")
    if radii is None:
        ac = cfg.annulus
        if ac is None:
            raise ConfigError("field.radii is required for general geometry")
        radii = [0.5 * ac.r_i, 0.5 * (ac.r_i + ac.r_e), ac.r_star, A_SAMPLE_FACTOR * ac.a]
    n_theta = int(fspec.get("n_theta", 64))
    if n_theta < 1:
        raise ConfigError("field.n_theta must be positive")
    return np.concatenate([an.circle_points(float(r), n_theta) for r in radii])


def _usable_points(cfg, x):
    """Mask of points away from both interfaces and from source singularities."""
    geo = cfg.geometry
    ok = np.ones(x.shape[0], dtype=bool)
    for curve, bnd in ((geo.inner, geo.inner_bnd), (geo.outer, geo.outer_bnd)):
        dist, _ = distance_to_curve(curve, x)
        ok &= dist >= NEAR_BOUNDARY_REL * bnd.diameter
    sing = cfg.source.singular_points()
    for y in sing:
        ok &= np.hypot(*(x - y).T) > 1e-8
    return ok


def cmd_field(cfg, out, workers=1):
    fspec = cfg.field
    try:
        x = _field_points(fspec, cfg)
        deltas = check_delta_grid(fspec["deltas"]) if "deltas" in fspec else cfg.deltas
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid field specification: {exc}") from exc
    include = bool(fspec.get("include_layers", True))
    ok = _usable_points(cfg, x)
    skipped = int((~ok).sum())
    if skipped:
        logger.warning("%d field point(s) on an interface or a source singularity skipped", skipped)
    xs = x[ok]
    engine = _engines(cfg)[0]

    def rows_for(delta):
        V, G, energy = engine.field(float(delta), xs, include)
        scale = 1.0 / math.sqrt(energy) if energy > 0 else float("nan")
        grad = np.sqrt(np.sum(np.abs(G) ** 2, axis=1))
        return [
            {
                "delta": float(delta),
                "x": float(p[0]),
                "y": float(p[1]),
                "re_v": float(v.real),
                "im_v": float(v.imag),
                "grad_abs": float(gv),
                "re_v_norm": float(v.real * scale),
                "im_v_norm": float(v.imag * scale),
            }
            for p, v, gv in zip(xs, V, grad)
        ]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(rows_for, deltas))
    else:
        blocks = [rows_for(d) for d in deltas]
    rows = [r for b in blocks for r in b]
    write_csv(out / "field.csv", FIELD_COLUMNS, rows)
    report = _base_report(cfg)
    report.update(points=int(x.shape[0]), skipped=skipped, deltas=[float(d) for d in deltas])
    write_json(out / "field.json", report)
    return report


COMMANDS = {"spectrum": cmd_spectrum, "sweep": cmd_sweep, "classify": cmd_classify, "field": cmd_field}


def build_parser():
    p = argparse.ArgumentParser(prog="calr", description="Plasmonic resonance and cloaking sweeps on two nested curves.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--engine", choices=ENGINES, default=None, help="override the configured engine")
    p.add_argument("--workers", type=int, default=1, help="threads for the delta sweep")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = RunConfig.from_file(args.config, engine=args.engine)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceError as exc:
        print(f"tolerance violation: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
