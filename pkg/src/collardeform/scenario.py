"""Configuration-driven lambda sweeps over boundary deformations.

A scenario is a single JSON document naming the base metric, the comparison
metric, the lambda values, the checks and the sampling grid.  See
``scenarios/`` for complete examples and README.md for the schema.
"""

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.stats

from . import metric_fields as mf
from .cones import (
    ConditionKind,
    STRICT_TOL,
    boundary_class,
    min_over_frames,
    region_check,
)
from .curvature import riemann, second_fundamental_form, tensor_norm
from .deformation import (
    DeformationData,
    DeformedField,
    StructuralError,
    deformation_norms,
    interface_residual,
)


__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "Row",
    "SweepResult",
    "load_config",
    "build_pair",
    "choose_theta",
    "collar_grid",
    "boundary_points",
    "run_scenario",
    "emit_report",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ["lambda", "region", "condition", "min_value", "witness_s", "witness_frame", "pass"]
MANIFOLD_KINDS = ("cap", "ball", "cylinder", "poly_random")
TILDE_KINDS = ("warped", "explicit")
THETA_LADDER = (1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0)


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


@dataclass
class ScenarioConfig:
    name: str
    manifold: dict
    collar: dict
    tilde: dict
    lambdas: list
    conditions: list
    boundary_check: bool = True
    grid: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    workers: int = 1

    @property
    def delta(self):
        return float(self.collar.get("delta", 0.3))

    @property
    def budget(self):
        return int(self.optimizer.get("budget", 600))

    @property
    def seed(self):
        return int(self.optimizer.get("seed", 0))

    @property
    def strict_tol(self):
        return float(self.tolerances.get("strict", STRICT_TOL))

    @property
    def eps(self):
        return float(self.tolerances.get("difference", 0.05))

    @property
    def geodesic_tol(self):
        return float(self.tolerances.get("totally_geodesic", 1e-9))


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"missing '{key}' in {where}")
    return mapping[key]


def parse_config(doc):
    """Validate a decoded JSON document and return a :class:`ScenarioConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object")
    man = dict(_require(doc, "manifold", "scenario"))
    if man.get("kind") not in MANIFOLD_KINDS:
        raise ConfigError(f"unknown manifold kind {man.get('kind')!r}")
    if int(_require(man, "n", "manifold")) < 3:
        raise ConfigError("dimension must be at least 3")
    tilde = dict(doc.get("tilde", {"kind": "warped", "theta": "auto"}))
    if tilde.get("kind") not in TILDE_KINDS:
        raise ConfigError(f"unknown tilde kind {tilde.get('kind')!r}")

    deform = dict(_require(doc, "deformation", "scenario"))
    if "lambdas" in deform:
        lambdas = sorted(float(v) for v in deform["lambdas"])
    elif "sweep" in deform:
        sw = deform["sweep"]
        lo, hi, factor = float(sw["min"]), float(sw["max"]), float(sw["factor"])
        if factor <= 1.0:
            raise ConfigError("sweep factor must exceed 1")
        if lo <= 0 or hi < lo:
            raise ConfigError("sweep bounds must satisfy 0 < min <= max")
        lambdas = []
        v = lo
        while v <= hi * (1 + 1e-12):
            lambdas.append(v)
            v *= factor
    else:
        raise ConfigError("deformation needs 'lambdas' or 'sweep'")
    if not lambdas or any(v <= 0 for v in lambdas):
        raise ConfigError("lambda values must be positive")

    checks = doc.get("checks", {})
    conditions = checks.get("conditions", ["CO", "PIC1", "PIC2", "PSC"])
    try:
        conditions = [ConditionKind(c).value for c in conditions]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    workers = int(doc.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return ScenarioConfig(
        name=str(doc.get("name", "scenario")),
        manifold=man,
        collar=dict(doc.get("collar", {})),
        tilde=tilde,
        lambdas=lambdas,
        conditions=conditions,
        boundary_check=bool(checks.get("boundary", True)),
        grid=dict(doc.get("grid", {})),
        optimizer=dict(doc.get("optimizer", {})),
        tolerances=dict(doc.get("tolerances", {})),
        workers=workers,
    )


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    return parse_config(doc)


# ------------------------------------------------------------------- building

def build_base(cfg):
    man = cfg.manifold
    n = int(man["n"])
    kind = man["kind"]
    try:
        if kind == "cap":
            return mf.builtin_spherical_cap(n, float(man.get("r0", math.pi / 3)), cfg.delta)
        if kind == "ball":
            return mf.builtin_euclidean_ball(n, cfg.delta)
        if kind == "cylinder":
            return mf.builtin_round_cylinder(n, float(man.get("radius", 1.0)), cfg.delta)
        return mf.builtin_poly_random(n, int(man.get("seed", 0)),
                                      float(man.get("magnitude", 0.1)), cfg.delta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def boundary_points(cfg, count=None):
    """Deterministic boundary sample: the origin followed by Halton points."""
    n = int(cfg.manifold["n"])
    count = int(cfg.grid.get("boundary_points", 8) if count is None else count)
    scale = float(cfg.grid.get("boundary_extent", 0.9))
    if count <= 1:
        return [np.zeros(n - 1)][:count]
    halton = scipy.stats.qmc.Halton(d=n - 1, scramble=False).random(count)[1:]
    pts = [np.zeros(n - 1)] + [scale * (2.0 * p - 1.0) for p in halton]
    return pts


def collar_grid(cfg, lam, delta, bpoints=None):
    """``(x, log_s)`` sample points for one lambda.

    Log-spaced points cover ``[exp(-2 lam^2), exp(-lam^2 / 2)]`` plus the
    interface itself, linear points cover ``[exp(-lam^2 / 2), delta)``, and
    optional extra points resolve the layer ``lam s in (0, 1.2)`` where the
    concave cutoff bends.
    """
    grid_cfg = cfg.grid
    n_log = int(grid_cfg.get("normal_points", 24)) // 2
    n_lin = int(grid_cfg.get("normal_points", 24)) - n_log
    n_layer = int(grid_cfg.get("chi_layer_points", 8))
    logs = []
    if grid_cfg.get("log_spaced_near_interface", True):
        logs.extend(np.linspace(-2.0 * lam**2, -0.5 * lam**2, n_log).tolist())
        logs.append(-lam**2)
    lin = np.linspace(math.exp(-0.5 * lam**2), delta, n_lin + 1)[:-1]
    logs.extend(math.log(v) for v in lin if v > 0)
    for v in np.linspace(0.05, 1.2, n_layer):
        if v / lam < delta:
            logs.append(math.log(v / lam))
    logs = sorted(set(logs))
    if bpoints is None:
        bpoints = boundary_points(cfg)
    return [(mf.collar_point(xb, 0.0), ls) for xb in bpoints for ls in logs]


def _field_minima(field, kinds, cfg, bpoints, depth, seed):
    """Worst absolute value of each condition for a plain field on ``s < depth``."""
    out = {}
    grid = []
    for xb in bpoints:
        for s in np.linspace(0.0, depth, 12, endpoint=False):
            grid.append(mf.collar_point(xb, s))
    for idx, x in enumerate(grid):
        jet = field.jet(x)
        R = riemann(jet)
        for k in kinds:
            v = min_over_frames(R, jet.g, k, cfg.budget, seed + idx).min_value
            out[k] = min(out.get(k, math.inf), v)
    return out


def choose_theta(g, cfg, ladder=THETA_LADDER):
    """Smallest ``theta`` in ``ladder`` whose warped collar passes every requested condition.

    Small ``theta`` keeps the warped collar as wide as the base collar, which
    keeps the support cutoff of ``S`` gentle.
    """
    bpoints = boundary_points(cfg, 3)
    for theta in ladder:
        gt = mf.warped_collar(g, theta)
        minima = _field_minima(gt, cfg.conditions, cfg, bpoints, gt.chart.delta, cfg.seed)
        if all(v > cfg.strict_tol for v in minima.values()):
            return float(theta), minima
    raise ConfigError("no theta in the ladder gives a warped collar passing the checks")


def build_pair(cfg):
    """Base metric, comparison metric and the chosen ``theta`` (or None)."""
    g = build_base(cfg)
    tilde = cfg.tilde
    if tilde["kind"] == "warped":
        if not g.fermi:
            raise ConfigError("warped comparison metric needs a Fermi-gauge base metric")
        theta = tilde.get("theta", "auto")
        if theta == "auto":
            theta, _ = choose_theta(g, cfg, tilde.get("theta_ladder", THETA_LADDER))
        try:
            return g, mf.warped_collar(g, float(theta)), float(theta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    T = np.asarray(tilde.get("shift", np.zeros((g.n, g.n))), dtype=float)
    try:
        return g, mf.ShiftedField(g, T), None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -------------------------------------------------------------------- results

@dataclass
class Row:
    lam: float
    region: str
    condition: str
    min_value: float
    witness_s: float
    witness_log_s: float
    witness_frame: list
    passed: bool


@dataclass
class SweepResult:
    name: str
    rows: list = field(default_factory=list)
    lambda_star: float = None
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "rows": [asdict(r) for r in self.rows],
            "summary": {"lambda_star": self.lambda_star},
            "diagnostics": self.diagnostics,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc):
        rows = [Row(**r) for r in doc["rows"]]
        return cls(doc["name"], rows, doc["summary"]["lambda_star"],
                   doc.get("diagnostics", {}), doc.get("meta", {}))

    def passing(self, lam):
        """Absolute checks and the boundary check all pass at ``lam``."""
        rows = [r for r in self.rows if r.lam == lam and not r.region.endswith("difference")]
        diag = self.diagnostics.get(_lam_key(lam), {})
        ok_boundary = diag.get("boundary_ok", True)
        return bool(rows) and all(r.passed for r in rows) and ok_boundary

    def compute_lambda_star(self):
        lams = sorted({r.lam for r in self.rows})
        star = None
        for lam in reversed(lams):
            if not self.passing(lam):
                break
            star = lam
        self.lambda_star = star
        return star


def _lam_key(lam):
    return f"{lam:.17g}"


def _frame_list(rep):
    if rep.frame is None:
        return []
    fr = rep.frame
    return [float(fr.lam), float(fr.mu)] + [float(v) for v in np.ravel(fr.vectors)]


def _rows_for(lam, regions, kinds):
    rows = []
    for region in sorted(regions):
        for kind in kinds:
            for label in ("absolute", "difference"):
                rep = regions[region][ConditionKind(kind)][label]
                tag = region if label == "absolute" else f"{region}-difference"
                rows.append(Row(float(lam), tag, kind, float(rep.min_value),
                                float(math.exp(rep.log_s)), float(rep.log_s),
                                _frame_list(rep), bool(rep.passed)))
    return rows


def _evaluate_lambda(cfg, lam):
    g, gt, theta = build_pair(cfg)
    delta = min(g.chart.delta, gt.chart.delta)
    try:
        data = DeformationData.build(g, gt, lam, delta)
    except StructuralError as exc:
        return {"lambda": lam, "error": str(exc)}
    bpoints = boundary_points(cfg)
    kinds = cfg.conditions
    regions = region_check(data, kinds, collar_grid(cfg, lam, delta, bpoints),
                           cfg.budget, cfg.seed, cfg.eps)
    for per_kind in regions.values():
        for reps in per_kind.values():
            reps["absolute"].tol = cfg.strict_tol
    diag = {"interface_residual": interface_residual(data)}
    if cfg.boundary_check and g.fermi and gt.fermi:
        hat = DeformedField(data)
        norms = [tensor_norm(*_shape_of(hat, xb)) for xb in bpoints]
        shape_g = second_fundamental_form(g, bpoints[0])
        shape_t = second_fundamental_form(gt, bpoints[0])
        diag["boundary_A_hat_max"] = max(norms)
        diag["boundary_ok"] = max(norms) <= cfg.geodesic_tol if cfg.tilde["kind"] == "warped" \
            else True
        diag["boundary_g"] = asdict(boundary_class(shape_g.A, shape_g.g_boundary))
        diag["boundary_tilde"] = asdict(boundary_class(shape_t.A, shape_t.g_boundary))
    diag.update(deformation_norms(data, bpoints[:2], int(cfg.grid.get("norm_samples", 200))))
    return {"lambda": lam, "rows": _rows_for(lam, regions, kinds), "diagnostics": diag}


def _shape_of(field, xb):
    shape = second_fundamental_form(field, xb, fermi_tol=1e-9)
    return shape.A, shape.g_boundary


def run_scenario(cfg, lambdas=None):
    """Evaluate every lambda and assemble a :class:`SweepResult`."""
    g, gt, theta = build_pair(cfg)
    if theta is not None:
        cfg = replace(cfg, tilde={**cfg.tilde, "theta": theta})
    lambdas = sorted(cfg.lambdas if lambdas is None else lambdas)
    if cfg.workers > 1 and len(lambdas) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_evaluate_lambda, [cfg] * len(lambdas), lambdas))
    else:
        parts = [_evaluate_lambda(cfg, lam) for lam in lambdas]
    result = SweepResult(cfg.name, meta={
        "theta": theta,
        "delta": min(g.chart.delta, gt.chart.delta),
        "lambdas": lambdas,
        "conditions": list(cfg.conditions),
    })
    for part in sorted(parts, key=lambda p: p["lambda"]):
        key = _lam_key(part["lambda"])
        if "error" in part:
            result.diagnostics[key] = {"error": part["error"], "boundary_ok": False}
            continue
        result.rows.extend(part["rows"])
        result.diagnostics[key] = part["diagnostics"]
    result.rows.sort(key=lambda r: (r.lam, r.condition, r.region))
    result.compute_lambda_star()
    return result


# ------------------------------------------------------------------- emitting

def _fmt(v):
    return format(float(v), ".17g")


def csv_text(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in result.rows:
        writer.writerow([_fmt(r.lam), r.region, r.condition, _fmt(r.min_value),
                         _fmt(r.witness_s), " ".join(_fmt(v) for v in r.witness_frame),
                         "true" if r.passed else "false"])
    return buf.getvalue()


def plot_data(result):
    """``{condition: {region: [[lambda, min_value], ...]}}``."""
    out = {}
    for r in result.rows:
        out.setdefault(r.condition, {}).setdefault(r.region, []).append([r.lam, r.min_value])
    return out


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj)}")


def json_text(result):
    # json writes floats with repr, which round-trips (17 significant digits at most).
    return json.dumps(result.to_dict(), indent=2, sort_keys=True, default=_json_default)


def emit_report(result, fmt, path):
    """Write ``result`` as ``json``, ``csv`` or ``plot`` (JSON plot data) to ``path``."""
    if fmt == "csv":
        text = csv_text(result)
    elif fmt == "json":
        text = json_text(result)
    elif fmt == "plot":
        text = json.dumps(plot_data(result), indent=2, sort_keys=True)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
    return path
