"""Command-line front end: build spaces, compute norms, run checks, write reports.

Runs are described by an INI file with the sections ``[run]``, ``[space]``,
``[filters]``, ``[norms]``, ``[quadrature]``, ``[verify]`` and ``[output]``;
list values are written inline and separated by commas. Every report embeds
the resolved configuration, so ``--config report.json`` repeats a run.

Exit status: 0 on success, 1 when an asserted check fails, 2 for usage and
configuration errors, 3 when a numerical tolerance cannot be met.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import AccuracyError, ConfigError, HeatBesovError
from .filters import filters_from_tag, make_heat_pair, normalize_to_partition
from .functions import default_family, function_from_spec, smooth_bump
from .io import read_report, write_kernels_csv, write_report
from .norms import NormParams
from .quadrature import QuadratureGrid
from .space import (
    GeometryProfile,
    MetricMeasureSpace,
    cycle_space,
    fit_geometry,
    grid_space,
    path_space,
    random_geometric_space,
    rescale_metric,
    single_point_space,
    space_from_files,
)
from .spectral import DEFAULT_HEAT_TIMES, SelfAdjointOperator, build_graph_laplacian, diagnose_heat, heat_kernel
from .verify import (
    NORM_KINDS,
    REPORT_GRID,
    REPORT_ONLY,
    CheckResult,
    check_area_vs_peetre,
    check_calderon,
    check_composition_decay,
    check_fefferman_stein,
    check_hl_domination,
    check_integral_bound,
    check_kernel_localization,
    check_norm_axioms,
    check_offdiag_composition,
    check_rychkov,
    check_submean,
    check_summation,
    equivalence_matrix,
    evaluate_norm,
    refinement_drift,
    refinement_stability,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_ACCURACY = 0, 1, 2, 3

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {"name": "run", "seed": "0", "jobs": "1"},
    "space": {"kind": "path", "size": "64", "length": "1.0", "measure": "default",
              "metric_scale": "1.0"},
    "filters": {
        "discrete": "littlewood", "kernel": "littlewood",
        "calderon": "partition", "normalized": "heat(1)",
    },
    "norms": {
        "s": "-1, 0.5, 1", "p": "0.75, 1, 2", "q": "1, 2, inf", "flavor": "classical",
        "kinds": ", ".join(NORM_KINDS), "functions": "default",
    },
    "quadrature": {"nodes": "8", "tolerance": "1e-10", "quad_rtol": "1e-11", "max_blocks": "200"},
    "verify": {
        "checks": "all",
        "refine": "auto",
        "kernel_order": "3",
        "decay_orders": "1, 2",
        "decay_t": "1.0",
        "decay_scales": "0.125, 0.0625, 0.03125",
        "submean_r": "0.5",
        "submean_order": "2",
        "submean_levels": "1, 2, 3",
        "bump_centre": "0.4",
        "bump_width": "0.3",
        "area_params": "0 2 2; 0.5 0.75 1; 1 1 inf",
        "area_forward": "true",
        "axiom_pairs": "100",
        "axiom_kinds": "besov, triebel",
        "axiom_rtol": "1e-12",
        "axiom_continuous_rtol": "1e-7",
        "sequence_p": "0.75, 1, 2",
        "sequence_q": "1, 2, inf",
        "sequence_delta": "1, 2",
        "maximal_p": "1.5, 2, 4",
        "maximal_q": "1.5, 2, 4",
        "spread_ceiling": "1e3",
        "equivalence_tolerance": "1e-6",
        "equivalence_quad_rtol": "1e-5",
    },
    "output": {"dir": ".", "kernels": "false", "kernel_times": ", ".join(repr(t) for t in DEFAULT_HEAT_TIMES)},
}

ALL_CHECKS = (
    "operator", "markov", "heat-diagnostics", "calderon", "calderon-normalized",
    "kernel-localization", "offdiag-composition", "composition-decay", "submean",
    "integral-bound", "hl-domination", "area-vs-peetre", "norm-axioms", "rychkov",
    "summation", "fefferman-stein", "equivalence",
)
# expensive or opt-in checks that "all" leaves out
OPT_IN_CHECKS = ("equivalence",)
SPACE_KINDS = ("path", "cycle", "grid", "random-geometric", "point", "files")
REFINABLE = ("path", "cycle", "grid")
# execution settings that do not change results and are left out of reports
VOLATILE = {"run": ("jobs",), "output": ("dir",)}


# ------------------------------------------------------------------ config


def _split_top(text: str) -> list[str]:
    """Split on commas and newlines that are not inside parentheses."""
    items, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if depth == 0 and ch in ",\n":
            items.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    items.append("".join(cur))
    return [s.strip() for s in items if s.strip()]


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration, stored as plain strings per section.

    Typed accessors raise :class:`ConfigError` naming the offending section
    and field, so every parse failure is reported in configuration terms.
    """

    sections: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    base_dir: str = "."

    @classmethod
    def from_mapping(cls, data: Mapping[str, Mapping[str, str]], base_dir: str = ".") -> "RunConfig":
        merged = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
        for sec, vals in data.items():
            if sec == configparser.DEFAULTSECT:
                continue
            if sec not in DEFAULTS:
                raise ConfigError(sec, None, f"unknown section; expected one of {sorted(DEFAULTS)}")
            for key, value in vals.items():
                merged[sec][key] = str(value)
        frozen = tuple(
            (sec, tuple(sorted(vals.items()))) for sec, vals in sorted(merged.items())
        )
        cfg = cls(frozen, str(base_dir))
        cfg.validate()
        return cfg

    def as_dict(self, include_volatile: bool = True) -> dict[str, dict[str, str]]:
        out = {sec: dict(vals) for sec, vals in self.sections}
        if not include_volatile:
            for sec, keys in VOLATILE.items():
                for key in keys:
                    out[sec].pop(key, None)
        return out

    def with_overrides(self, overrides: Mapping[str, Mapping[str, str]]) -> "RunConfig":
        data = self.as_dict()
        for sec, vals in overrides.items():
            data.setdefault(sec, {}).update({k: str(v) for k, v in vals.items()})
        return RunConfig.from_mapping(data, self.base_dir)

    # typed access -------------------------------------------------------
    def raw(self, section: str, key: str, default: str | None = None) -> str | None:
        for sec, vals in self.sections:
            if sec == section:
                return dict(vals).get(key, default)
        return default

    def text(self, section: str, key: str) -> str:
        value = self.raw(section, key)
        if value is None or not value.strip():
            raise ConfigError(section, key, "missing value")
        return value.strip()

    def number(self, section: str, key: str, kind: Callable = float, positive: bool = False):
        text = self.text(section, key)
        try:
            value = kind(text) if kind is int else float(text)
        except ValueError:
            raise ConfigError(section, key, f"expected {'an integer' if kind is int else 'a number'}, got {text!r}") from None
        if positive and not value > 0:
            raise ConfigError(section, key, f"must be positive, got {text!r}")
        return value

    def numbers(self, section: str, key: str, kind: Callable = float) -> list:
        out = []
        for item in _split_top(self.text(section, key)):
            try:
                out.append(kind(item) if kind is int else float(item))
            except ValueError:
                raise ConfigError(section, key, f"cannot parse list item {item!r}") from None
        if not out:
            raise ConfigError(section, key, "empty list")
        return out

    def words(self, section: str, key: str) -> list[str]:
        return _split_top(self.text(section, key))

    def flag(self, section: str, key: str) -> bool:
        text = self.text(section, key).lower()
        if text in ("1", "yes", "true", "on"):
            return True
        if text in ("0", "no", "false", "off"):
            return False
        raise ConfigError(section, key, f"expected a boolean, got {text!r}")

    def path(self, section: str, key: str) -> Path:
        p = Path(self.text(section, key))
        return p if p.is_absolute() else Path(self.base_dir) / p

    # derived settings ---------------------------------------------------
    def seed(self) -> int:
        return self.number("run", "seed", int)

    def jobs(self) -> int:
        return self.number("run", "jobs", int, positive=True)

    def quadrature(self) -> QuadratureGrid:
        try:
            return QuadratureGrid(
                nodes=self.number("quadrature", "nodes", int, positive=True),
                tol=self.number("quadrature", "tolerance", positive=True),
                quad_rtol=self.number("quadrature", "quad_rtol", positive=True),
                max_blocks=self.number("quadrature", "max_blocks", int, positive=True),
            )
        except HeatBesovError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("quadrature", None, str(exc)) from None

    def norm_params(self) -> list[NormParams]:
        s_vals = self.numbers("norms", "s")
        p_vals = self._exponents("norms", "p")
        q_vals = self._exponents("norms", "q")
        flavors = self.words("norms", "flavor")
        m = self.raw("norms", "m")
        out = []
        for flavor in flavors:
            for s in s_vals:
                for p in p_vals:
                    for q in q_vals:
                        try:
                            out.append(NormParams(s, p, q, int(m) if m and m.strip() else None, flavor))
                        except (HeatBesovError, ValueError) as exc:
                            field = "flavor" if flavor not in ("classical", "nonclassical") else "m"
                            raise ConfigError("norms", field, f"(s={s}, p={p}, q={q}): {exc}") from None
        return out

    def _exponents(self, section: str, key: str) -> list[float]:
        out = []
        for item in self.words(section, key):
            try:
                value = math.inf if item.lower() in ("inf", "infinity") else float(item)
            except ValueError:
                raise ConfigError(section, key, f"cannot parse exponent {item!r}") from None
            if not value > 0:
                raise ConfigError(section, key, f"exponent must lie in (0, inf], got {item!r}")
            out.append(value)
        return out

    def checks(self) -> list[str]:
        names: list[str] = []
        for item in self.words("verify", "checks"):
            if item == "all":
                names.extend(c for c in ALL_CHECKS if c not in OPT_IN_CHECKS)
            elif item in ALL_CHECKS:
                names.append(item)
            else:
                raise ConfigError("verify", "checks", f"unknown check {item!r}; expected 'all' or one of {list(ALL_CHECKS)}")
        return sorted(set(names))

    def validate(self) -> None:
        """Parse every field once so errors surface before any work starts."""
        kind = self.text("space", "kind")
        if kind not in SPACE_KINDS:
            raise ConfigError("space", "kind", f"unknown kind {kind!r}; expected one of {list(SPACE_KINDS)}")
        self.number("space", "metric_scale", positive=True)
        self.seed()
        self.jobs()
        self.quadrature()
        self.norm_params()
        kinds = self.words("norms", "kinds")
        for k in kinds:
            if k not in NORM_KINDS:
                raise ConfigError("norms", "kinds", f"unknown norm kind {k!r}")
        for k in self.words("verify", "axiom_kinds"):
            if k not in NORM_KINDS:
                raise ConfigError("verify", "axiom_kinds", f"unknown norm kind {k!r}")
        self.checks()
        for key in ("discrete", "kernel", "calderon", "normalized"):
            tag = self.text("filters", key)
            try:
                filters_from_tag(tag)
            except HeatBesovError as exc:
                raise ConfigError("filters", key, str(exc)) from None
        refine = self.text("verify", "refine")
        if refine not in ("auto", "off"):
            raise ConfigError("verify", "refine", "expected 'auto' or 'off'")
        for key in ("decay_t", "submean_r", "bump_width", "axiom_rtol", "axiom_continuous_rtol",
                    "spread_ceiling", "equivalence_tolerance", "equivalence_quad_rtol"):
            self.number("verify", key, positive=True)
        for key in ("kernel_order", "submean_order", "axiom_pairs"):
            self.number("verify", key, int, positive=True)
        for key in ("decay_scales", "bump_centre", "sequence_delta"):
            self.numbers("verify", key)
        self.numbers("verify", "decay_orders", int)
        self.numbers("verify", "submean_levels", int)
        for key in ("sequence_p", "sequence_q", "maximal_p", "maximal_q"):
            self._exponents("verify", key)
        self.area_params()
        self.flag("verify", "area_forward")
        self.flag("output", "kernels")
        self.numbers("output", "kernel_times")

    def area_params(self) -> list[NormParams]:
        out = []
        flavor = self.words("norms", "flavor")[0]
        for item in self.text("verify", "area_params").split(";"):
            parts = item.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ConfigError("verify", "area_params", f"expected 's p q' triples, got {item.strip()!r}")
            try:
                s = float(parts[0])
                p, q = (math.inf if v.lower() == "inf" else float(v) for v in parts[1:])
                out.append(NormParams(s, p, q, flavor=flavor))
            except (HeatBesovError, ValueError) as exc:
                raise ConfigError("verify", "area_params", f"{item.strip()!r}: {exc}") from None
        return out


def load_config(path: str | Path | None) -> RunConfig:
    """Read an INI file, or the configuration embedded in a ``report.json``."""
    if path is None:
        return RunConfig.from_mapping({})
    path = Path(path)
    if not path.exists():
        raise ConfigError("run", None, f"config file {path} does not exist")
    if path.suffix == ".json":
        try:
            report = read_report(path)
        except (HeatBesovError, json.JSONDecodeError) as exc:
            raise ConfigError("run", None, f"{path}: {exc}") from None
        if "config" not in report:
            raise ConfigError("run", None, f"{path}: report carries no embedded config")
        return RunConfig.from_mapping(report["config"], str(path.parent))
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        where = f"{path}:{line}" if line else str(path)
        raise ConfigError("run", None, f"{where}: {exc.message if hasattr(exc, 'message') else exc}") from None
    data = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    return RunConfig.from_mapping(data, str(path.parent))


def bundled_config(name: str) -> Path:
    """Path of a configuration shipped with the package (``name`` without ``.ini``)."""
    ref = resources.files("heatbesov") / "configs" / f"{name}.ini"
    with resources.as_file(ref) as p:
        if not p.exists():
            raise ConfigError("run", None, f"no bundled config named {name!r}")
        return p


def bundled_names() -> list[str]:
    folder = resources.files("heatbesov") / "configs"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".ini"))


# ----------------------------------------------------------------- context


def build_space(cfg: RunConfig, refine: int = 0) -> MetricMeasureSpace:
    """Space described by ``[space]``; ``refine`` doubles the resolution that many times.

    ``[space] metric_scale`` multiplies every distance afterwards, which moves
    the unit radius used by the geometry fit into the range of interest.
    """
    space = _raw_space(cfg, refine)
    scale = cfg.number("space", "metric_scale", positive=True)
    return space if scale == 1.0 else rescale_metric(space, scale)


def _raw_space(cfg: RunConfig, refine: int) -> MetricMeasureSpace:
    kind = cfg.text("space", "kind")
    measure = cfg.text("space", "measure")
    if measure not in ("default", "unit", "degree"):
        try:
            measure = float(measure)
        except ValueError:
            raise ConfigError("space", "measure", "expected default, unit, degree or a number") from None
    measure = None if measure == "default" else measure
    if refine and kind not in REFINABLE:
        raise ConfigError("space", "kind", f"{kind!r} spaces cannot be refined")
    try:
        if kind == "point":
            mass = float(cfg.raw("space", "mass", "1.0"))
            return single_point_space(mass)
        if kind == "files":
            weights = cfg.raw("space", "weights")
            return space_from_files(
                cfg.path("space", "edges"),
                cfg.path("space", "weights") if weights else None,
                name=cfg.raw("space", "name", "graph"),
            )
        if kind == "random-geometric":
            return random_geometric_space(
                cfg.number("space", "size", int, positive=True),
                radius=float(cfg.raw("space", "radius", "0.3")),
                seed=int(cfg.raw("space", "space_seed", "0")),
                dim=int(cfg.raw("space", "dim", "2")),
                measure=measure,
            )
        n = cfg.number("space", "size", int, positive=True)
        spacing = _spacing(cfg, kind, n)
        factor = 2**refine
        if kind == "cycle":
            return cycle_space(n * factor, spacing / factor, measure)
        fine = n * factor
        fine_spacing = spacing * (n - 1) / (fine - 1) if n > 1 else spacing
        if kind == "path":
            return path_space(fine, fine_spacing, measure)
        cols = cfg.raw("space", "cols")
        m = n if cols is None else int(cols)
        if m != n and refine:
            raise ConfigError("space", "cols", "only square grids can be refined")
        return grid_space(fine, m * factor if cols else None, fine_spacing, measure)
    except (HeatBesovError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("space", None, str(exc)) from None


def _spacing(cfg: RunConfig, kind: str, n: int) -> float:
    if cfg.raw("space", "spacing"):
        return cfg.number("space", "spacing", positive=True)
    length = cfg.number("space", "length", positive=True)
    if kind == "cycle":
        return length / n
    return length / (n - 1) if n > 1 else 1.0


@dataclass
class Context:
    """A built space with its operator and fitted geometry."""

    space: MetricMeasureSpace
    op: SelfAdjointOperator
    geom: GeometryProfile


@lru_cache(maxsize=4)
def _context(config_key: str, refine: int) -> Context:
    cfg = RunConfig.from_mapping(json.loads(config_key)["sections"], json.loads(config_key)["base"])
    space = build_space(cfg, refine)
    op = build_graph_laplacian(space)
    return Context(space, op, fit_geometry(space))


def _key(cfg: RunConfig) -> str:
    return json.dumps({"sections": cfg.as_dict(), "base": cfg.base_dir}, sort_keys=True)


def context(cfg: RunConfig, refine: int = 0) -> Context:
    return _context(_key(cfg), refine)


def refinable(cfg: RunConfig) -> bool:
    kind = cfg.text("space", "kind")
    if cfg.text("verify", "refine") == "off" or kind not in REFINABLE:
        return False
    return cfg.raw("space", "cols") is None or kind != "grid"


def job_seed(run_seed: int, name: str, params: Mapping) -> int:
    """Seed of one job, independent of scheduling order."""
    text = f"{run_seed}:{name}:{json.dumps(params, sort_keys=True)}"
    return zlib.crc32(text.encode())


# ------------------------------------------------------------------ checks


def _bump(ctx: Context, cfg: RunConfig) -> np.ndarray:
    """Smooth bump placed relative to the coordinate extent of the space."""
    space = ctx.space
    centre_frac = cfg.numbers("verify", "bump_centre")
    width_frac = cfg.number("verify", "bump_width", positive=True)
    if space.coords is None or space.size == 1 or cfg.text("space", "kind") == "cycle":
        # place by index and measure distances in the metric
        idx = int(round(centre_frac[0] * (space.size - 1)))
        return smooth_bump(space, idx, max(width_frac * space.diameter, space.min_distance or 1.0))
    lo, hi = space.coords.min(axis=0), space.coords.max(axis=0)
    frac = np.resize(np.asarray(centre_frac, float), lo.size)
    extent = float(np.max(hi - lo)) or 1.0
    return smooth_bump(space, lo + frac * (hi - lo), width_frac * extent)


def _scales(space: MetricMeasureSpace, count: int, hi_default: float) -> np.ndarray:
    if space.size == 1:
        return np.geomspace(0.25, 1.0, count)
    lo = 2 * space.min_distance
    hi = max(hi_default, 8 * lo)
    return np.geomspace(lo, hi, count)


def _with_stability(name, coarse_fn, cfg, refined: bool) -> list[CheckResult]:
    base = coarse_fn(context(cfg))
    if not refined:
        base.details["refinement"] = "unavailable for this space"
        return [base]
    fine = coarse_fn(context(cfg, 1))
    return [base, refinement_stability(f"{name}-stability", base, fine)]


def _check_operator(cfg, params, seed):
    ctx = context(cfg)
    op, mu = ctx.op, ctx.space.measure
    V, lam = op.eigenvectors, op.eigenvalues
    recon = (V * lam) @ (V.T * mu)
    scale = max(float(np.abs(op.matrix).max()), 1e-300)
    err = float(np.abs(recon - op.matrix).max()) / scale if np.any(op.matrix) else float(np.abs(recon).max())
    gram = V.T @ (mu[:, None] * V)
    ortho = float(np.abs(gram - np.eye(op.size)).max())
    return [
        CheckResult("operator-reconstruction", err, 1e-10, op.size**2, err <= 1e-10,
                    {"min_eigenvalue": float(lam[0]), "spectral_radius": op.spectral_radius,
                     "disconnected": op.disconnected}),
        CheckResult("operator-orthonormality", ortho, 1e-10, op.size**2, ortho <= 1e-10, {}),
    ]


def _check_markov(cfg, params, seed):
    ctx = context(cfg)
    mu = ctx.space.measure
    worst = 0.0
    for t in DEFAULT_HEAT_TIMES:
        rows = heat_kernel(ctx.op, t).values @ mu
        worst = max(worst, float(np.abs(rows - 1.0).max()))
    return [CheckResult("markov", worst, 1e-10, len(DEFAULT_HEAT_TIMES) * ctx.space.size, worst <= 1e-10,
                        {"t_grid": list(DEFAULT_HEAT_TIMES)})]


def _check_heat_diagnostics(cfg, params, seed):
    ctx = context(cfg)
    diag = diagnose_heat(ctx.op, ctx.space, ctx.geom, seed=seed)
    return [CheckResult("heat-diagnostics", diag.C_star, REPORT_ONLY, diag.holder_pairs, True, diag.to_dict())]


def _check_calderon(cfg, params, seed):
    ctx = context(cfg)
    f = np.random.default_rng(seed).standard_normal(ctx.space.size)
    psi0, psi = filters_from_tag(cfg.text("filters", "calderon"))
    result = check_calderon(ctx.op, psi0, psi, f)
    result.details["filters"] = cfg.text("filters", "calderon")
    return [result]


def _check_calderon_normalized(cfg, params, seed):
    ctx = context(cfg)
    f = np.random.default_rng(seed).standard_normal(ctx.space.size)
    tag = cfg.text("filters", "normalized")
    omega0, omega = filters_from_tag(tag)
    if tag.startswith("normalized-"):
        tag = tag[len("normalized-"):]
        omega0, omega = filters_from_tag(tag)
    psi0, psi = normalize_to_partition(omega0, omega)
    result = check_calderon(ctx.op, psi0, psi, f, omega0, omega)
    result.details["filters"] = tag
    return [result]


def _check_kernel_localization(cfg, params, seed):
    phi = filters_from_tag(cfg.text("filters", "kernel"))[1]
    N = cfg.number("verify", "kernel_order", int, positive=True)
    ts = _scales(context(cfg).space, 4, 0.5)
    return _with_stability(
        "kernel-localization",
        lambda ctx: check_kernel_localization(ctx.op, ctx.space, ctx.geom, phi, ts, N, seed),
        cfg, refinable(cfg),
    )


def _check_offdiag(cfg, params, seed):
    base = context(cfg)
    sigma = base.geom.n + base.geom.n_prime + 2
    sc = _resolved_scales(base.space, 3)
    t, s = np.meshgrid(sc, sc, indexing="ij")
    return _with_stability(
        "offdiag-composition",
        lambda ctx: check_offdiag_composition(ctx.space, ctx.geom, sigma, t.ravel(), s.ravel()),
        cfg, refinable(cfg),
    )


def _check_decay(cfg, params, seed):
    ctx = context(cfg)
    m = int(params["m"])
    t = cfg.number("verify", "decay_t", positive=True)
    s_values = [t * v for v in cfg.numbers("verify", "decay_scales")]
    omega0, omega = make_heat_pair(m)
    N = ctx.geom.n + ctx.geom.n_prime + 3
    result = check_composition_decay(ctx.op, omega, omega0, m, N, s_values, t, ctx.geom)
    result.name = f"composition-decay(m={m})"
    return [result]


def _check_submean(cfg, params, seed):
    coarse = context(cfg).space
    ells = [e for e in cfg.numbers("verify", "submean_levels", int) if 2.0**-e >= coarse.min_distance]
    r = cfg.number("verify", "submean_r", positive=True)
    N = cfg.number("verify", "submean_order", int, positive=True)
    if not ells:
        return [CheckResult("submean", 0.0, REPORT_ONLY, 0, True,
                            {"skipped": "no level 2^-l lies above the resolution scale"})]
    return _with_stability(
        "submean",
        lambda ctx: check_submean(ctx.op, ctx.space, _bump(ctx, cfg), r, N, ells),
        cfg, refinable(cfg),
    )


def _resolved_scales(space: MetricMeasureSpace, count: int) -> np.ndarray:
    """Scales from four grid steps up to the diameter.

    Below about four steps a ball holds one or two points and the measured
    constants describe the discretisation rather than the space.
    """
    if space.size == 1:
        return np.geomspace(0.25, 1.0, count)
    lo = 4 * space.min_distance
    return np.geomspace(lo, max(space.diameter, 2 * lo), count)


def _check_integral_bound(cfg, params, seed):
    ts = _resolved_scales(context(cfg).space, 12)
    return _with_stability(
        "integral-bound", lambda ctx: check_integral_bound(ctx.space, ctx.geom, ts), cfg, refinable(cfg)
    )


def _check_hl(cfg, params, seed):
    ts = _resolved_scales(context(cfg).space, 8)

    def run(ctx):
        bump = _bump(ctx, cfg)
        return check_hl_domination(ctx.space, ctx.geom, [bump, (bump > 0.5).astype(float)], ts)

    return _with_stability("hl-domination", run, cfg, refinable(cfg))


def _check_area(cfg, params, seed):
    ctx = context(cfg)
    np_ = NormParams(params["s"], params["p"], params["q"], flavor=params["flavor"])
    forward = cfg.flag("verify", "area_forward")
    result = check_area_vs_peetre(ctx.op, ctx.space, ctx.geom, _bump(ctx, cfg), np_, forward=forward)
    result.details["params"] = np_.to_dict()
    return [result]


def _check_axioms(cfg, params, seed):
    ctx = context(cfg)
    np_ = NormParams(params["s"], params["p"], params["q"], flavor=params["flavor"])
    kind = params["kind"]
    continuous = kind not in ("besov", "triebel")
    rtol = cfg.number("verify", "axiom_continuous_rtol" if continuous else "axiom_rtol", positive=True)
    grid = None
    if continuous:
        base = cfg.quadrature()
        grid = QuadratureGrid(nodes=base.nodes, tol=min(base.tol, 1e-8), quad_rtol=min(base.quad_rtol, 1e-9),
                              max_blocks=base.max_blocks)
    pairs = cfg.number("verify", "axiom_pairs", int, positive=True)
    return [check_norm_axioms(ctx.op, ctx.geom, np_, kind, pairs, seed, grid, triangle_rtol=rtol)]


def _check_rychkov(cfg, params, seed):
    return [check_rychkov(params["p"], params["q"], params["delta"], seed=seed)]


def _check_summation(cfg, params, seed):
    return [check_summation(params["p"], params["q"], params["delta"], seed=seed)]


def _check_fs(cfg, params, seed):
    return _with_stability(
        f"fefferman-stein(p={params['p']},q={params['q']})",
        lambda ctx: check_fefferman_stein(ctx.space, params["p"], params["q"], seed=seed),
        cfg, refinable(cfg),
    )


def _check_equivalence(cfg, params, seed):
    grid = QuadratureGrid(
        tol=cfg.number("verify", "equivalence_tolerance", positive=True),
        quad_rtol=cfg.number("verify", "equivalence_quad_rtol", positive=True),
        sup_refinements=REPORT_GRID.sup_refinements,
    )
    ceiling = cfg.number("verify", "spread_ceiling", positive=True)
    plist = cfg.norm_params()

    def run(ctx):
        return equivalence_matrix(ctx.op, ctx.space, ctx.geom, plist, default_family(ctx.op), grid,
                                  filters_from_tag(cfg.text("filters", "discrete")), ceiling)

    coarse = run(context(cfg))
    fine = run(context(cfg, 1)) if refinable(cfg) else None
    out = []
    for i, rep in enumerate(coarse):
        details = rep.to_dict()
        if fine is not None:
            details["refined_spread"] = fine[i].spread
            details["refinement_drift"] = refinement_drift(rep, fine[i])
        details["within_ceiling_and_drift"] = rep.passed if fine is None else fine[i].passed
        label = ",".join(f"{k}={rep.params[k]}" for k in ("s", "p", "q", "flavor"))
        worst = max(rep.spread.values())
        out.append(CheckResult(f"equivalence({label})", worst, REPORT_ONLY, len(rep.names), True, details))
    return out


CHECKS: dict[str, Callable] = {
    "operator": _check_operator,
    "markov": _check_markov,
    "heat-diagnostics": _check_heat_diagnostics,
    "calderon": _check_calderon,
    "calderon-normalized": _check_calderon_normalized,
    "kernel-localization": _check_kernel_localization,
    "offdiag-composition": _check_offdiag,
    "composition-decay": _check_decay,
    "submean": _check_submean,
    "integral-bound": _check_integral_bound,
    "hl-domination": _check_hl,
    "area-vs-peetre": _check_area,
    "norm-axioms": _check_axioms,
    "rychkov": _check_rychkov,
    "summation": _check_summation,
    "fefferman-stein": _check_fs,
    "equivalence": _check_equivalence,
}


def plan_jobs(cfg: RunConfig) -> list[tuple[str, dict]]:
    """Expand the selected checks into independent ``(check, params)`` jobs."""
    jobs: list[tuple[str, dict]] = []
    for name in cfg.checks():
        if name == "composition-decay":
            jobs += [(name, {"m": m}) for m in cfg.numbers("verify", "decay_orders", int)]
        elif name == "area-vs-peetre":
            jobs += [(name, _params_key(p)) for p in cfg.area_params()]
        elif name == "norm-axioms":
            for kind in cfg.words("verify", "axiom_kinds"):
                for p in cfg.norm_params():
                    if kind != "besov" and kind != "heat-besov" and math.isinf(p.p):
                        continue
                    jobs.append((name, {**_params_key(p), "kind": kind}))
        elif name in ("rychkov", "summation"):
            for p in cfg._exponents("verify", "sequence_p"):
                for q in cfg._exponents("verify", "sequence_q"):
                    for d in cfg.numbers("verify", "sequence_delta"):
                        jobs.append((name, {"p": p, "q": q, "delta": d}))
        elif name == "fefferman-stein":
            for p in cfg._exponents("verify", "maximal_p"):
                for q in cfg._exponents("verify", "maximal_q"):
                    jobs.append((name, {"p": p, "q": q}))
        else:
            jobs.append((name, {}))
    return jobs


def _params_key(p: NormParams) -> dict:
    return {"s": p.s, "p": p.p, "q": p.q, "flavor": p.flavor}


def run_job(cfg_key: str, name: str, params: dict, run_seed: int) -> list[dict]:
    """Execute one job; safe to call in a worker process."""
    data = json.loads(cfg_key)
    cfg = RunConfig.from_mapping(data["sections"], data["base"])
    seed = job_seed(run_seed, name, params)
    out = []
    for result in CHECKS[name](cfg, params, seed):
        out.append({
            "check": name, "name": result.name, "params": params, "seed": seed,
            "measured_constant": result.measured_constant, "threshold": result.threshold,
            "asserted": result.asserted, "passed": bool(result.passed),
            "samples": int(result.samples), "details": result.details,
        })
    return out


def _canonical(records: Iterable[dict]) -> list[dict]:
    return sorted(records, key=lambda r: (r["name"], json.dumps(r["params"], sort_keys=True, default=str)))


def run_checks(cfg: RunConfig, jobs: int | None = None) -> list[dict]:
    """Run every planned job, in a process pool when ``jobs > 1``; canonical order."""
    plan = plan_jobs(cfg)
    jobs = cfg.jobs() if jobs is None else jobs
    key = _key(cfg)
    seed = cfg.seed()
    if jobs <= 1 or len(plan) <= 1:
        chunks = [run_job(key, name, params, seed) for name, params in plan]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_job, key, name, params, seed) for name, params in plan]
            chunks = [f.result() for f in futures]
    return _canonical(r for chunk in chunks for r in chunk)


def summarize(records: list[dict]) -> dict:
    asserted = [r for r in records if r["asserted"]]
    failed = sorted(r["name"] for r in asserted if not r["passed"])
    return {"checks": len(records), "asserted": len(asserted), "failed": failed, "passed": not failed}


# ------------------------------------------------------------- subcommands


def space_profile(cfg: RunConfig) -> dict:
    ctx = context(cfg)
    diag = diagnose_heat(ctx.op, ctx.space, ctx.geom, seed=cfg.seed())
    return {
        "name": ctx.space.name, "size": ctx.space.size, "diameter": ctx.space.diameter,
        "min_distance": ctx.space.min_distance, "total_measure": ctx.space.total_measure,
        "geometry": ctx.geom.to_dict(), "degenerate": ctx.geom.degenerate,
        "spectral_radius": ctx.op.spectral_radius, "disconnected": ctx.op.disconnected,
        "heat": diag.to_dict(),
    }


def compute_norms(cfg: RunConfig, function_specs: list[str] | None = None) -> list[dict]:
    ctx = context(cfg)
    specs = function_specs or cfg.words("norms", "functions")
    if specs == ["default"]:
        family = default_family(ctx.op)
    else:
        family = []
        for spec in specs:
            if spec.startswith("file(") and not Path(spec[5:-1].strip()).is_absolute():
                spec = f"file({Path(cfg.base_dir) / spec[5:-1].strip()})"
            try:
                family.append(function_from_spec(spec, ctx.op))
            except (HeatBesovError, OSError) as exc:
                raise ConfigError("norms", "functions", str(exc)) from None
    grid = cfg.quadrature()
    filters = filters_from_tag(cfg.text("filters", "discrete"))
    kinds = cfg.words("norms", "kinds")
    rows = []
    for fname, f in family:
        for params in cfg.norm_params():
            for kind in kinds:
                if kind not in ("besov", "heat-besov") and math.isinf(params.p):
                    continue
                res = evaluate_norm(kind, f, params, ctx.op, ctx.geom, grid, filters, full_output=True)
                rows.append({
                    "name": fname, "kind": kind, "params": _params_key(params) | {"m": params.m},
                    "value": res.value, "lower": res.lower, "upper": res.upper,
                    "tail_estimate": res.tail_estimate, "sup_lower_bound": res.sup_lower_bound,
                })
    return sorted(rows, key=lambda r: (r["name"], r["kind"], json.dumps(r["params"], sort_keys=True)))


def _kernels(cfg: RunConfig, out_dir: Path) -> str | None:
    if not cfg.flag("output", "kernels"):
        return None
    ctx = context(cfg)
    kernels = [heat_kernel(ctx.op, t) for t in cfg.numbers("output", "kernel_times")]
    write_kernels_csv(out_dir / "kernels.csv", kernels)
    return "kernels.csv"


def _report_base(cfg: RunConfig, command: str) -> dict:
    return {"command": command, "name": cfg.text("run", "name"), "seed": cfg.seed(),
            "config": cfg.as_dict(include_volatile=False)}


def cmd_space(cfg: RunConfig, out_dir: Path) -> int:
    report = _report_base(cfg, "space") | {"space": space_profile(cfg)}
    csv_name = _kernels(cfg, out_dir)
    if csv_name:
        report["kernels"] = csv_name
    write_report(out_dir / "report.json", report)
    prof = report["space"]
    print(f"{prof['name']}: {prof['size']} points, n = {prof['geometry']['n']:.4g}, "
          f"n' = {prof['geometry']['n_prime']:.4g}, c0 = {prof['geometry']['c0']:.4g}"
          + (" (degenerate)" if prof["degenerate"] else ""))
    return EXIT_OK


def cmd_norms(cfg: RunConfig, out_dir: Path, functions: list[str] | None) -> int:
    rows = compute_norms(cfg, functions)
    report = _report_base(cfg, "norms") | {"norms": rows}
    write_report(out_dir / "report.json", report)
    print(f"{len(rows)} norm values written to {out_dir / 'report.json'}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out_dir: Path) -> int:
    records = run_checks(cfg)
    summary = summarize(records)
    report = _report_base(cfg, "verify") | {"checks": records, "summary": summary}
    csv_name = _kernels(cfg, out_dir)
    if csv_name:
        report["kernels"] = csv_name
    write_report(out_dir / "report.json", report)
    for r in records:
        status = "report" if not r["asserted"] else ("pass" if r["passed"] else "FAIL")
        print(f"{status:6s} {r['name']:40s} {r['measured_constant']!r}")
    print(f"{summary['asserted']} asserted checks, {len(summary['failed'])} failed")
    return EXIT_OK if summary["passed"] else EXIT_FAILED


def cmd_report(cfg: RunConfig, out_dir: Path, inputs: list[str]) -> int:
    """Aggregate existing reports, or run space, norms and verify into one report."""
    if inputs:
        parts = []
        for path in inputs:
            try:
                parts.append(read_report(path))
            except (HeatBesovError, OSError, json.JSONDecodeError) as exc:
                raise ConfigError("run", None, f"{path}: {exc}") from None
        for part in parts:
            part.pop("schema", None)
            part.pop("schema_version", None)
        parts.sort(key=lambda p: (p.get("command", ""), p.get("name", ""), json.dumps(p.get("config", {}), sort_keys=True)))
        records = [r for p in parts for r in p.get("checks", [])]
        report = {"command": "report", "reports": parts, "summary": summarize(records)}
    else:
        records = run_checks(cfg)
        report = _report_base(cfg, "report") | {
            "space": space_profile(cfg), "norms": compute_norms(cfg),
            "checks": records, "summary": summarize(records),
        }
    write_report(out_dir / "report.json", report)
    summary = report["summary"]
    print(f"{summary['asserted']} asserted checks, {len(summary['failed'])} failed")
    return EXIT_OK if summary["passed"] else EXIT_FAILED


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatbesov",
        description="Besov and Triebel-Lizorkin norms of operators on finite metric measure spaces.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file, bundled config name, or report.json with an embedded config")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", help="output directory (default: [output] dir)")
    common.add_argument("--jobs", type=int, help="worker processes (default: [run] jobs)")
    common.add_argument("--tolerance", type=float, help="override [quadrature] tolerance")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("space", parents=[common], help="build the space and report its geometry profile")
    p_norms = sub.add_parser("norms", parents=[common], help="evaluate every requested norm per function")
    p_norms.add_argument("--function", action="append", dest="functions",
                         help="function spec such as 'eigenvector(2)' or 'file(f.txt)'; repeatable")
    sub.add_parser("verify", parents=[common], help="run the check suite")
    p_report = sub.add_parser("report", parents=[common], help="aggregate reports or run everything")
    p_report.add_argument("inputs", nargs="*", help="existing report.json files to combine")
    sub.add_parser("configs", help="list the bundled configurations")
    return parser


def _resolve_config(arg: str | None) -> RunConfig:
    if arg is None:
        return load_config(None)
    if not Path(arg).exists() and "/" not in arg and not arg.endswith((".ini", ".json")):
        return load_config(bundled_config(arg))
    return load_config(arg)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "configs":
        print("\n".join(bundled_names()))
        return EXIT_OK
    try:
        cfg = _resolve_config(args.config)
        overrides: dict[str, dict[str, str]] = {}
        if args.seed is not None:
            overrides.setdefault("run", {})["seed"] = str(args.seed)
        if args.jobs is not None:
            overrides.setdefault("run", {})["jobs"] = str(args.jobs)
        if args.tolerance is not None:
            overrides.setdefault("quadrature", {})["tolerance"] = repr(args.tolerance)
        if overrides:
            cfg = cfg.with_overrides(overrides)
        out_dir = Path(args.out if args.out is not None else cfg.text("output", "dir"))
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "space":
            return cmd_space(cfg, out_dir)
        if args.command == "norms":
            return cmd_norms(cfg, out_dir, args.functions)
        if args.command == "verify":
            return cmd_verify(cfg, out_dir)
        return cmd_report(cfg, out_dir, args.inputs)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"heatbesov: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AccuracyError as exc:
        print(f"heatbesov: accuracy error: {exc}", file=sys.stderr)
        print("hint: raise [quadrature] max_blocks, or loosen --tolerance / [quadrature] quad_rtol",
              file=sys.stderr)
        return EXIT_ACCURACY


if __name__ == "__main__":
    sys.exit(main())
