"""Scenario runner: parse a config, sweep parameters, write CSV traces.

Config documents are JSON (YAML accepted as a human-editable variant when
PyYAML is available); unknown keys are rejected so typos fail loudly.  Sweep
axes are lists of labelled override sets applied to the spec document by
dotted path, e.g. ``waveguides.0.density.coupling_ratio``; the run executes
the cartesian product of all axes for each requested method.

Every output file is written atomically (temp file + rename) and listed in a
``manifest.json`` written last.  Data files contain no timestamps and floats
are formatted at 17 significant digits, so identical configs produce
byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import itertools
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .bornmarkov import UnsupportedConfigurationError, bm_parameters, bm_trace
from .dynamics import SolverAbortError, solve_propagators
from .kernels import build_kernel_set, dump_kernels_csv
from .model import ConfigError, network_spec_from_dict, validate
from .transport import dump_transport_csv, transport_trace

MANIFEST_SCHEMA = "photonet-manifest v1"
BM_VALIDITY_RATIO = 1.0  # warn when any coupling_ratio exceeds this and method=bm


@dataclass(frozen=True)
class SweepPoint:
    labels: tuple[str, ...]
    overrides: dict

    @property
    def tag(self) -> str:
        return "_".join(self.labels) if self.labels else "base"


@dataclass(frozen=True)
class RunConfig:
    name: str
    spec_doc: dict
    methods: tuple[str, ...]
    sweep_axes: tuple[tuple[str, tuple[SweepPoint, ...]], ...]
    output_dir: str
    emit_plots: bool = False
    dump_kernels: bool = False

    def points(self) -> list[SweepPoint]:
        if not self.sweep_axes:
            return [SweepPoint(labels=(), overrides={})]
        out = []
        for combo in itertools.product(*(axis for _, axis in self.sweep_axes)):
            labels = tuple(l for pt in combo for l in pt.labels)
            overrides: dict = {}
            for pt in combo:
                overrides.update(pt.overrides)
            out.append(SweepPoint(labels=labels, overrides=overrides))
        return out


def _set_by_path(doc: dict, path: str, value):
    """Assign into a nested document by dotted path; the path must exist."""
    parts = path.split(".")
    node = doc
    for p in parts[:-1]:
        if isinstance(node, list):
            node = node[int(p)]
        elif isinstance(node, dict):
            if p not in node:
                raise ConfigError(f"override path {path!r}: no key {p!r}")
            node = node[p]
        else:
            raise ConfigError(f"override path {path!r}: cannot descend into {type(node).__name__}")
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    elif isinstance(node, dict):
        if last not in node:
            raise ConfigError(f"override path {path!r}: no key {last!r}")
        node[last] = value
    else:
        raise ConfigError(f"override path {path!r}: cannot assign into {type(node).__name__}")


def _load_document(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        import yaml
        return yaml.safe_load(text)
    return json.loads(text)


def _sweep_point_from_dict(d: dict, where: str) -> SweepPoint:
    if not isinstance(d, dict) or set(d) - {"label", "overrides"} or "label" not in d:
        raise ConfigError(f"{where}: expected {{label, overrides}}")
    return SweepPoint(labels=(str(d["label"]),), overrides=dict(d.get("overrides", {})))


def run_config_from_dict(doc: dict, base_dir: str = ".") -> RunConfig:
    allowed = {"name", "spec", "spec_path", "methods", "sweep", "output_dir",
               "emit_plots", "dump_kernels"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    if ("spec" in doc) == ("spec_path" in doc):
        raise ConfigError("config: provide exactly one of 'spec' or 'spec_path'")
    spec_doc = doc["spec"] if "spec" in doc else _load_document(
        os.path.join(base_dir, doc["spec_path"]))
    methods = tuple(doc.get("methods", ["exact"]))
    if not methods or set(methods) - {"exact", "bm"}:
        raise ConfigError(f"config: methods must be a non-empty subset of ['exact', 'bm'], "
                          f"got {list(methods)}")
    axes = []
    for i, axis in enumerate(doc.get("sweep", [])):
        if not isinstance(axis, dict) or set(axis) - {"name", "points"} or "points" not in axis:
            raise ConfigError(f"sweep[{i}]: expected {{name, points}}")
        name = str(axis.get("name", f"axis{i}"))
        pts = tuple(_sweep_point_from_dict(p, f"sweep[{i}].points[{j}]")
                    for j, p in enumerate(axis["points"]))
        if not pts:
            raise ConfigError(f"sweep[{i}]: empty axis")
        axes.append((name, pts))
    cfg = RunConfig(
        name=str(doc.get("name", "run")),
        spec_doc=spec_doc,
        methods=methods,
        sweep_axes=tuple(axes),
        output_dir=doc.get("output_dir", "photonet-out"),
        emit_plots=bool(doc.get("emit_plots", False)),
        dump_kernels=bool(doc.get("dump_kernels", False)),
    )
    # fail fast: every override path must resolve against the base spec
    probe = copy.deepcopy(cfg.spec_doc)
    for pt in cfg.points():
        for path, value in pt.overrides.items():
            _set_by_path(probe, path, value)
    return cfg


def _atomic_write(path: Path, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _execute_point(args: tuple) -> dict:
    """Run one (sweep point, method) job; separate function so pools can pickle it."""
    spec_doc, method, out_path, tag, dump_kernels_to = args
    spec = network_spec_from_dict(spec_doc)
    if method == "bm":
        trace = bm_trace(spec)
    else:
        kernels = build_kernel_set(spec)
        props = solve_propagators(spec, kernels)
        trace = transport_trace(spec, kernels, props)
        if dump_kernels_to:
            _atomic_write(Path(dump_kernels_to), lambda tmp: dump_kernels_csv(kernels, tmp))
    _atomic_write(Path(out_path), lambda tmp: dump_transport_csv(trace, tmp, method=method))
    return {"file": Path(out_path).name, "method": method, "point": tag}


def run(config: RunConfig, jobs: int = 1) -> int:
    """Execute all sweep points; returns a process exit status."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = config.points()

    jobs_list = []
    for pt in points:
        spec_doc = copy.deepcopy(config.spec_doc)
        for path, value in pt.overrides.items():
            _set_by_path(spec_doc, path, value)
        try:
            spec = network_spec_from_dict(spec_doc)
        except ConfigError as e:
            print(f"error: sweep point {pt.tag!r}: {e}", file=sys.stderr)
            return 2
        report = validate(spec)
        for w in report.warnings:
            print(f"warning: sweep point {pt.tag!r}: {w}", file=sys.stderr)
        for method in config.methods:
            if method == "bm":
                ratios = [getattr(w.density, "coupling_ratio", 0.0) for w in spec.waveguides]
                if any(r > BM_VALIDITY_RATIO for r in ratios):
                    print(f"warning: sweep point {pt.tag!r}: coupling ratio "
                          f"{max(ratios):g} is outside the weak-coupling regime; "
                          "the Born-Markov trace is indicative only", file=sys.stderr)
                try:
                    bm_parameters(spec)
                except UnsupportedConfigurationError as e:
                    print(f"error: sweep point {pt.tag!r}: {e}", file=sys.stderr)
                    return 2
            name = f"{config.name}_{pt.tag}_{method}.csv"
            kdump = str(out_dir / f"{config.name}_{pt.tag}_kernels.csv") \
                if (config.dump_kernels and method == "exact") else None
            jobs_list.append((spec_doc, method, str(out_dir / name), pt.tag, kdump))

    entries = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                entries = list(pool.map(_execute_point, jobs_list))
        else:
            entries = [_execute_point(j) for j in jobs_list]
    except SolverAbortError as e:
        print(f"error: solver aborted: {e}", file=sys.stderr)
        return 3

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "name": config.name,
        "methods": list(config.methods),
        "outputs": entries,
    }
    if config.emit_plots:
        plots = out_dir / "plots.py"
        _atomic_write(plots, lambda tmp: Path(tmp).write_text(_plot_script()))
        manifest["outputs"] = entries + [{"file": "plots.py", "method": "-", "point": "-"}]
    _atomic_write(out_dir / "manifest.json",
                  lambda tmp: Path(tmp).write_text(json.dumps(manifest, indent=2,
                                                              sort_keys=True) + "\n"))
    print(f"wrote {len(entries)} trace(s) to {out_dir}")
    return 0


# --- trace comparison -----------------------------------------------------------

_SKIP_COLUMNS = {"method", "deriv_flag"}


def read_trace_csv(path) -> tuple[list[str], dict]:
    """Read a trace CSV into (column names, column arrays); '#' lines skipped."""
    import numpy as np
    names = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if names is None:
                names = line.split(",")
                continue
            rows.append(line.split(","))
    if names is None:
        raise ValueError(f"{path}: empty trace")
    cols = {}
    for j, name in enumerate(names):
        if name in _SKIP_COLUMNS:
            cols[name] = [r[j] for r in rows]
        else:
            cols[name] = np.array([float(r[j]) for r in rows])
    return names, cols


def compare(path_a, path_b) -> dict:
    """Per-column L∞/L2 relative deviations between two traces of equal schema."""
    import numpy as np
    names_a, cols_a = read_trace_csv(path_a)
    names_b, cols_b = read_trace_csv(path_b)
    if names_a != names_b:
        raise ValueError(f"schema mismatch: {names_a} vs {names_b}")
    if len(cols_a["t"]) != len(cols_b["t"]) or np.any(cols_a["t"] != cols_b["t"]):
        raise ValueError("time grids differ")
    report = {}
    for name in names_a:
        if name in _SKIP_COLUMNS or name == "t":
            continue
        a, b = cols_a[name], cols_b[name]
        scale_inf = max(float(np.max(np.abs(a))), 1e-300)
        scale_l2 = max(float(np.linalg.norm(a)), 1e-300)
        report[name] = {
            "linf": float(np.max(np.abs(a - b))) / scale_inf,
            "l2": float(np.linalg.norm(a - b)) / scale_l2,
        }
    return report


# --- built-in two-CROW scenario ---------------------------------------------------

def two_crow_spec_doc(t_end: float = 40.0, n_steps: int = 8000,
                      output_every: int = 80) -> dict:
    """Driven central cavity between two CROW bands centered at 9.5 and 10.5."""
    return {
        "frequencies": [[10.0]],
        "drives": [{"type": "monochromatic", "target": 0,
                    "amplitude": 10.0, "frequency": 10.0}],
        "waveguides": [
            {"label": "crow1", "temperature": 5.0, "coupling": [1.0],
             "density": {"type": "semicircle", "center": 9.5, "hopping": 0.3,
                         "coupling_ratio": 0.5}},
            {"label": "crow2", "temperature": 5.0, "coupling": [1.0],
             "density": {"type": "semicircle", "center": 10.5, "hopping": 0.3,
                         "coupling_ratio": 0.5}},
        ],
        "initial_field": [0.0],
        "initial_occupation": [[0.0]],
        "grid": {"t0": 0.0, "t_end": t_end, "n_steps": n_steps,
                 "output_every": output_every},
    }


def two_crow_config(etas=(0.5, 1.0, 2.0), drive_freqs=(9.5, 10.0, 10.5),
                    temperatures=(0.005, 5.0), methods=("exact",),
                    output_dir="two-crow-out", t_end=40.0, n_steps=8000,
                    output_every=80, emit_plots=False, dump_kernels=False) -> RunConfig:
    def fnum(x):
        return f"{x:g}"

    axes = []
    axes.append(("eta", tuple(
        SweepPoint(labels=(f"eta{fnum(e)}",),
                   overrides={"waveguides.0.density.coupling_ratio": e,
                              "waveguides.1.density.coupling_ratio": e})
        for e in etas)))
    axes.append(("omega_d", tuple(
        SweepPoint(labels=(f"wd{fnum(w)}",),
                   overrides={"drives.0.frequency": w})
        for w in drive_freqs)))
    axes.append(("temperature", tuple(
        SweepPoint(labels=(f"T{fnum(t)}K",),
                   overrides={"waveguides.0.temperature": t,
                              "waveguides.1.temperature": t})
        for t in temperatures)))
    return RunConfig(name="two-crow",
                     spec_doc=two_crow_spec_doc(t_end, n_steps, output_every),
                     methods=tuple(methods), sweep_axes=tuple(axes),
                     output_dir=output_dir, emit_plots=emit_plots,
                     dump_kernels=dump_kernels)


def _plot_script() -> str:
    # the emitted script references data files; the package itself never
    # imports matplotlib
    return '''"""Plot traces listed in manifest.json (needs matplotlib + numpy)."""
import csv, json, sys
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).parent
manifest = json.loads((here / "manifest.json").read_text())


def load(name):
    with open(here / name) as fh:
        rows = [r for r in fh if not r.startswith("#")]
    reader = csv.DictReader(rows)
    cols = defaultdict(list)
    for row in reader:
        for k, v in row.items():
            cols[k].append(v)
    return {k: ([float(x) for x in v] if k not in ("method",) else v)
            for k, v in cols.items()}


groups = defaultdict(dict)
for entry in manifest["outputs"]:
    if not entry["file"].endswith(".csv") or entry["file"].endswith("kernels.csv"):
        continue
    groups[entry["point"]][entry["method"]] = load(entry["file"])

for fig_idx, columns in enumerate((("abs_a",), ("v_0", "n_0"), ("I",))):
    npts = len(groups)
    fig, axes = plt.subplots(npts, 1, figsize=(7, 2.2 * npts), squeeze=False)
    for ax, (point, traces) in zip(axes[:, 0], sorted(groups.items())):
        for method, tr in sorted(traces.items()):
            t = tr["t"]
            if columns == ("abs_a",):
                ya = [abs(complex(re, im)) for re, im in zip(tr["re_a_0"], tr["im_a_0"])]
                ax.plot(t, ya, label=f"|a| {method}")
            elif columns == ("I",):
                for key in tr:
                    if key.startswith("I_"):
                        ax.plot(t, tr[key], label=f"{key} {method}")
            else:
                for key in columns:
                    ax.plot(t, tr[key], label=f"{key} {method}")
        ax.set_title(point, fontsize=8)
        ax.legend(fontsize=6)
        ax.set_xlabel("t [ns]")
    fig.tight_layout()
    out = here / f"figure{fig_idx + 1}.png"
    fig.savefig(out, dpi=150)
    print("wrote", out)
'''


# --- argument parsing -------------------------------------------------------------

def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="photonet",
                                     description="photonic network transport simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config file")
    p_run.add_argument("config")
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--out", default=None, help="override output directory")

    p_cmp = sub.add_parser("compare", help="deviation report between two traces")
    p_cmp.add_argument("trace_a")
    p_cmp.add_argument("trace_b")
    p_cmp.add_argument("--json", action="store_true", help="machine-readable output")

    p_sc = sub.add_parser("scenario", help="run a built-in scenario")
    p_sc.add_argument("name", choices=["two-crow"])
    p_sc.add_argument("--jobs", type=int, default=1)
    p_sc.add_argument("--out", default="two-crow-out")
    p_sc.add_argument("--methods", default="exact", help="comma list of exact,bm")
    p_sc.add_argument("--eta", type=_float_list, default=(0.5, 1.0, 2.0))
    p_sc.add_argument("--omega-d", type=_float_list, default=(9.5, 10.0, 10.5))
    p_sc.add_argument("--temperature", type=_float_list, default=(0.005, 5.0))
    p_sc.add_argument("--t-end", type=float, default=40.0)
    p_sc.add_argument("--n-steps", type=int, default=8000)
    p_sc.add_argument("--output-every", type=int, default=80)
    p_sc.add_argument("--emit-plots", action="store_true")
    p_sc.add_argument("--dump-kernels", action="store_true")

    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            doc = _load_document(args.config)
            cfg = run_config_from_dict(doc, base_dir=str(Path(args.config).parent))
        except (ConfigError, json.JSONDecodeError, OSError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        if args.out:
            cfg = dataclasses.replace(cfg, output_dir=args.out)
        return run(cfg, jobs=args.jobs)

    if args.command == "compare":
        try:
            report = compare(args.trace_a, args.trace_b)
        except (ValueError, OSError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        if args.json:
            print(json.dumps(report, indent=2, sort_keys=True))
        else:
            width = max(len(k) for k in report)
            print(f"{'column'.ljust(width)}  {'L_inf rel':>12}  {'L2 rel':>12}")
            for name, dev in report.items():
                print(f"{name.ljust(width)}  {dev['linf']:>12.5g}  {dev['l2']:>12.5g}")
        return 0

    if args.command == "scenario":
        cfg = two_crow_config(etas=args.eta, drive_freqs=args.omega_d,
                              temperatures=args.temperature,
                              methods=tuple(args.methods.split(",")),
                              output_dir=args.out, t_end=args.t_end,
                              n_steps=args.n_steps, output_every=args.output_every,
                              emit_plots=args.emit_plots, dump_kernels=args.dump_kernels)
        return run(cfg, jobs=args.jobs)

    return 2


if __name__ == "__main__":
    sys.exit(main())
