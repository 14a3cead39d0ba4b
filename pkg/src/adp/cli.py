"""Command line front end: ``adp audit``, ``adp eval-recovery``,
``adp eval-sin`` and ``adp eval-histogram``.

Every failure prints ``{"error": <code>, "message": ...}`` on stderr and
exits non-zero; exit code 0 means a report was written.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from .bounds import BoxBound, GaussianDensity
from .core import Dataset, UtilitySpec
from .curves import PlotProblem
from .errors import ADPError, ConfigError, EmptyFile, ParseError
from .harness import run_sin_recovery, run_synthetic_recovery, sin_histogram
from .models import load_model
from .optimizer import GcpConfig, gcp_search, optimize_over_instances, render_direction
from .report import ENGINE_VERSION, render_svg, tick_labels, to_json
from .spaces import BUILTIN_TRANSFORMS, TransformPipeline, fit_affine_map


def load_csv(path) -> Dataset:
    """Numeric CSV with a header row; errors name the file row (header is row 1)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFile(f"{path} is empty")
        names = [h.strip() for h in header]
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(names):
                raise ParseError(f"row {lineno} has {len(raw)} cells, header has {len(names)}",
                                 row=lineno, column=None)
            vals = []
            for name, cell in zip(names, raw):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"row {lineno}, column {name!r}: {cell!r} is not a number",
                                     row=lineno, column=name) from None
            rows.append(vals)
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")
    return Dataset.from_rows(rows, names)


@dataclass
class AuditConfig:
    data: str | None = None
    model: str | None = None
    utility: str = "monotonic"
    target: str = "0"
    space: str = "raw"
    sparsity: int = 3
    angles: int = 20
    grid: int = 50
    max_iter: int = 10
    loss: str = "squared"
    density_quantile: str = "0.95"
    seed: int = 0
    out: str | None = None
    svg: str | None = None
    # directory that relative paths are resolved against
    base_dir: str = "."

    def path(self, p):
        return p if p is None or os.path.isabs(p) else os.path.join(self.base_dir, p)

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def gcp(self) -> GcpConfig:
        try:
            return GcpConfig(sparsity=int(self.sparsity), angles=int(self.angles),
                             grid=int(self.grid), max_iter=int(self.max_iter))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


_INT_FIELDS = {"sparsity", "angles", "grid", "max_iter", "seed"}


def read_config(path) -> dict:
    """``[audit]`` section of an INI file; keys may use dashes or underscores."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    if "audit" not in parser:
        raise ConfigError(f"{path} has no [audit] section")
    known = {f.name for f in fields(AuditConfig)} - {"base_dir"}
    out = {}
    for key, value in parser["audit"].items():
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        out[name] = value
    out["base_dir"] = os.path.dirname(os.path.abspath(path))
    return out


def make_config(values: dict) -> AuditConfig:
    cfg = AuditConfig()
    for name, value in values.items():
        if value is None:
            continue
        if name in _INT_FIELDS:
            try:
                value = int(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{name} must be an integer, got {value!r}") from None
        setattr(cfg, name, value)
    if cfg.data is None or cfg.model is None:
        raise ConfigError("both data and model are required")
    return cfg


def _resolve_uri(uri: str, cfg: AuditConfig) -> str:
    scheme, _, rest = uri.partition(":")
    if scheme == "builtin":
        name, sep, paramfile = rest.partition(":")
        if sep:
            return f"builtin:{name}:{cfg.path(paramfile)}"
    return uri


def parse_utility(text: str, cfg: AuditConfig, names, dim: int):
    """Returns ``(UtilitySpec, extra_model_or_None)``."""
    kind, _, arg = text.partition(":")
    loss = cfg.loss
    try:
        if kind == "variance":
            return UtilitySpec.variance(), None
        if kind == "constant-contrast":
            return UtilitySpec.constant_contrast(loss), None
        if kind == "linear":
            return UtilitySpec.linear(loss), None
        if kind == "monotonic":
            return UtilitySpec.monotonic(loss), None
        if kind == "taylor":
            return UtilitySpec.taylor(loss), None
        if kind == "lipschitz":
            if loss != "squared":
                raise ConfigError("lipschitz utility supports --loss squared only")
            return UtilitySpec.lipschitz(float(arg)), None
        if kind == "model-contrast":
            g = load_model(_resolve_uri(arg, cfg), dim)
            return UtilitySpec.model_contrast(g, loss), g
        if kind == "flip":
            if arg not in names:
                raise ConfigError(f"flip feature {arg!r} is not a column")
            return UtilitySpec.flip(list(names).index(arg), loss), None
    except ValueError as exc:
        if isinstance(exc, ADPError):
            raise
        raise ConfigError(f"bad utility {text!r}: {exc}") from None
    raise ConfigError(f"unknown utility {text!r}")


def _targets(cfg: AuditConfig, n: int) -> list:
    t = str(cfg.target)
    if t.startswith("sample:"):
        try:
            s = int(t.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad target {t!r}") from None
        if not 1 <= s <= n:
            raise ConfigError(f"sample size must lie in [1, {n}], got {s}")
        rng = np.random.default_rng(cfg.seed)
        return sorted(rng.choice(n, size=s, replace=False).tolist())
    try:
        row = int(t)
    except ValueError:
        raise ConfigError(f"bad target {t!r}; use a row index or sample:<s>") from None
    if not 0 <= row < n:
        raise ConfigError(f"target row {row} outside [0, {n})")
    return [row]


def load_pipeline(path) -> TransformPipeline:
    """JSON ``{"transforms": [{"name": "gain", "max_gain": 0.5}, ...]}``."""
    try:
        with open(path) as fh:
            spec = json.load(fh)
        items = spec["transforms"]
        transforms = []
        for item in items:
            item = dict(item)
            name = item.pop("name")
            if name not in BUILTIN_TRANSFORMS:
                raise ConfigError(f"unknown transform {name!r}")
            transforms.append(BUILTIN_TRANSFORMS[name](**item))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ADPError):
            raise
        raise ConfigError(f"bad transforms file {path}: {exc}") from None
    if not transforms:
        raise ConfigError(f"{path} lists no transforms")
    return TransformPipeline(transforms)


def _unique(names):
    seen = {}
    out = []
    for n in names:
        seen[n] = seen.get(n, 0) + 1
        out.append(n if seen[n] == 1 else f"{n}#{seen[n]}")
    return out


def build_problem(cfg: AuditConfig, data: Dataset, model, x0):
    """``(PlotProblem, direction coordinate names)`` for the configured space."""
    space = str(cfg.space)
    kw = {"k": int(cfg.grid)}
    if space == "raw":
        box = BoxBound.from_dataset(data)
        q = str(cfg.density_quantile).strip().lower()
        density = None
        if q != "off":
            try:
                density = GaussianDensity.fit(data.rows, float(q))
            except ValueError as exc:
                if isinstance(exc, ADPError):
                    raise
                raise ConfigError(f"bad density quantile {cfg.density_quantile!r}") from None
        return PlotProblem(model, x0, box=box, density=density, **kw), list(data.feature_names)
    if space.startswith("latent:"):
        try:
            latent = int(space.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad space {space!r}") from None
        G = fit_affine_map(data.rows, latent)
        return (PlotProblem(model, x0, family="latent", generative=G, **kw),
                [f"z{j}" for j in range(latent)])
    if space.startswith("transforms:"):
        pipe = load_pipeline(cfg.path(space.split(":", 1)[1]))
        return (PlotProblem(model, x0, family="transform", pipeline=pipe, **kw),
                _unique(pipe.names))
    raise ConfigError(f"unknown space {space!r}")


def run_audit(cfg: AuditConfig):
    """Optimize a plot per the config; returns ``(report, svg_text)``.

    Writes the report JSON to ``cfg.out`` and the SVG to ``cfg.svg`` when set.
    """
    data = load_csv(cfg.path(cfg.data))
    model = load_model(_resolve_uri(cfg.model, cfg), data.d)
    extra = None
    try:
        spec, extra = parse_utility(cfg.utility, cfg, data.feature_names, data.d)
        gcp = cfg.gcp()
        rows = _targets(cfg, data.n)
        problem, coord_names = build_problem(cfg, data, model, data.rows[rows[0]])
        if len(rows) == 1:
            v, trace = gcp_search(problem, spec, gcp)
            target_index = rows[0]
        else:
            v, _, trace = optimize_over_instances(model, [data.rows[r] for r in rows], spec, gcp,
                                                  problem=problem)
            target_index = rows[trace.candidate_index]
        problem = problem.with_target(data.rows[target_index])
        sample, value, fit = render_direction(problem, v, spec)
        prediction = float(model(data.rows[target_index]))
        curve = sample.curve
        report = {
            "engine_version": ENGINE_VERSION,
            "target_index": int(target_index),
            "candidates": [int(r) for r in rows],
            "space": str(cfg.space),
            "direction": {coord_names[i]: w for i, w in v.entries},
            "interval": [curve.interval.a, curve.interval.b],
            "ts": curve.ts.tolist(),
            "fs": curve.fs.tolist(),
            "fit_values": np.asarray(fit.hs, dtype=np.float64).tolist(),
            "utility": float(value),
            "utility_label": str(cfg.utility),
            "utility_spec": spec.describe(),
            "feature_names": list(data.feature_names),
            "tick_labels": tick_labels(curve.ts, sample.points, data.feature_names),
            "prediction": prediction,
            "target_t": 0.0,
            "eval_count": model.eval_count,
            "trace": trace.to_dict(),
            "config": cfg.echo(),
        }
    finally:
        model.close()
        if extra is not None:
            extra.close()
    svg = render_svg(report) if cfg.svg else None
    if cfg.out:
        with open(cfg.path(cfg.out), "w") as fh:
            fh.write(to_json(report))
    if svg is not None:
        with open(cfg.path(cfg.svg), "w") as fh:
            fh.write(svg)
    return report, svg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_gcp_flags(p):
    p.add_argument("--sparsity", type=int, help="max nonzeros D")
    p.add_argument("--angles", type=int, help="angle count M")
    p.add_argument("--grid", type=int, help="grid size k")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="iteration cap I")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adp", description="Find informative directional dependence plots.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("audit", help="optimize a plot for a model and dataset")
    a.add_argument("--config", help="INI file with an [audit] section mirroring the flags")
    a.add_argument("--data")
    a.add_argument("--model", help="builtin:<name>[:paramfile] | cmd:<command> | http:<url>")
    a.add_argument("--utility", help="variance | constant-contrast | linear | monotonic | "
                   "lipschitz:<L> | model-contrast:<uri> | taylor | flip:<feature>")
    a.add_argument("--target", help="row index or sample:<s>")
    a.add_argument("--space", help="raw | latent:<dim> | transforms:<file>")
    a.add_argument("--loss", choices=("squared", "absolute"))
    a.add_argument("--density-quantile", dest="density_quantile", help="quantile or off")
    a.add_argument("--out")
    a.add_argument("--svg")
    _add_gcp_flags(a)

    r = sub.add_parser("eval-recovery", help="planted-direction recovery rates")
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--dim", type=int, default=10)
    r.add_argument("--sizes", default="1,2,3")
    r.add_argument("--out")
    _add_gcp_flags(r)

    s = sub.add_parser("eval-sin", help="sin-model direction check")
    s.add_argument("--dim", type=int, default=10)
    s.add_argument("--out")
    _add_gcp_flags(s)

    h = sub.add_parser("eval-histogram", help="random directions versus GCP on the sin model")
    h.add_argument("--samples", type=int, default=1000)
    h.add_argument("--nonzeros", type=int, default=3)
    h.add_argument("--dim", type=int, default=10)
    h.add_argument("--utility", choices=("monotonic", "taylor", "variance", "linear"),
                   default="monotonic")
    h.add_argument("--out")
    _add_gcp_flags(h)
    return parser


def _gcp_from_args(args) -> GcpConfig:
    defaults = GcpConfig()
    try:
        return GcpConfig(
            sparsity=args.sparsity or defaults.sparsity,
            angles=args.angles or defaults.angles,
            grid=args.grid or defaults.grid,
            max_iter=args.max_iter or defaults.max_iter,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _emit(report, out):
    text = to_json(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run(argv):
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help"):
        argv = ["audit", *argv]
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise ConfigError("missing subcommand (audit, eval-recovery, eval-sin, eval-histogram)")
    if args.command == "audit":
        values = read_config(args.config) if args.config else {}
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        values.update({k: v for k, v in flags.items() if v is not None})
        cfg = make_config(values)
        report, _ = run_audit(cfg)
        if not cfg.out:
            sys.stdout.write(to_json(report))
        return
    seed = args.seed or 0
    gcp = _gcp_from_args(args)
    if args.command == "eval-recovery":
        try:
            sizes = tuple(int(s) for s in args.sizes.split(","))
        except ValueError:
            raise ConfigError(f"bad --sizes {args.sizes!r}") from None
        _emit(run_synthetic_recovery(args.trials, args.dim, sizes, gcp, seed), args.out)
    elif args.command == "eval-sin":
        _emit(run_sin_recovery(gcp, seed, args.dim, check=False), args.out)
    else:
        spec = {"monotonic": UtilitySpec.monotonic, "taylor": UtilitySpec.taylor,
                "variance": UtilitySpec.variance, "linear": UtilitySpec.linear}[args.utility]()
        _emit(sin_histogram(args.samples, gcp, seed, args.dim, spec, args.nonzeros), args.out)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        _run(argv)
    except ADPError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io_error", "message": str(exc)}) + "\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(json.dumps({"error": "invalid_argument", "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
