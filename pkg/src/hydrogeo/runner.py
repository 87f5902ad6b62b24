"""Execute a :class:`~hydrogeo.config.Scenario` and write its artifacts.

All outputs are rendered in memory first and written by one writer stage,
each file through a temporary name and an atomic rename, so a failing run
leaves no partial files behind.  Scalars go to JSON, series to CSV, both at
17 significant digits.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import Scenario
from .errors import HydrogeoError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_SUITE = 4


def version() -> str:
    try:
        from importlib.metadata import version as _v
        return _v("artifact")
    except Exception:  # not installed, e.g. running from a checkout
        from . import __version__
        return __version__


@dataclass
class RunManifest:
    config: str
    version: str
    kind: str
    stages: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    status: str = "ok"
    exit_code: int = EXIT_OK
    created: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def verify(self, root) -> bool:
        """True if every listed file exists and matches its hash."""
        for entry in self.files:
            path = os.path.join(root, entry["path"])
            if not os.path.exists(path):
                return False
            with open(path, "rb") as fh:
                if hashlib.sha256(fh.read()).hexdigest() != entry["sha256"]:
                    return False
        return True


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def _f(x) -> str:
    return f"{float(x):.17g}"


def _round17(obj):
    """Floats rounded through 17 significant digits (a no-op for doubles, but explicit)."""
    if isinstance(obj, dict):
        return {k: _round17(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round17(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(_f(obj))
    return obj


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_f(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _write_outputs(out_dir, outputs: dict) -> list:
    """Single writer stage: temp file + rename for each output."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for name in sorted(outputs):
        data = outputs[name].encode() if isinstance(outputs[name], str) else outputs[name]
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, os.path.join(out_dir, name))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        entries.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(),
                        "bytes": len(data)})
    return entries


class _Stages:
    def __init__(self):
        self.times = {}

    def __call__(self, name):
        stages = self

        class _T:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                stages.times[name] = time.perf_counter() - self.t0
        return _T()


# -- kinds -------------------------------------------------------------------

def _curvature(s: Scenario, stage):
    from .curvature import Method, riemann, sectional
    model, rho = s.mobility(), s.density("rho0")
    p1, p2 = s.potential("phi1"), s.potential("phi2")
    with stage("curvature"):
        rep = sectional(rho, model, p1, p2, method=s.run["method"], dealias=s.dealias)
        report = rep.to_dict()
        report["scale"] = rep.scale
        report["methods"] = {m.value: sectional(rho, model, p1, p2, m, s.dealias).value
                             for m in Method}
        if "phi3" in s.fields and "phi4" in s.fields:
            r = riemann(rho, model, p1, p2, s.potential("phi3"), s.potential("phi4"),
                        s.run["method"], s.dealias)
            report["riemann"] = {"value": r.value, "blocks": list(r.blocks), "scale": r.scale}
    return {"report.json": _json(_round17(report))}, "ok"


def _flow_config(s):
    from .dynamics import FlowConfig
    return FlowConfig(**s.run)


def _trajectory_files(prefix, tr) -> dict:
    return {f"{prefix}_{k}.csv": v for k, v in tr.csv_texts().items()}


def _flow(s: Scenario, stage):
    from .dynamics import gradient_flow
    model = s.mobility()
    with stage("integrate"):
        tr = gradient_flow(model, s.density("rho0"), s.density("pi"), _flow_config(s))
    out = _trajectory_files("flow", tr)
    F = tr.diagnostics["free_energy"]
    summary = {"status": tr.status, "events": tr.events, "steps_stored": len(tr),
               "t_final": tr.times[-1], "free_energy_initial": F[0], "free_energy_final": F[-1],
               "max_free_energy_increase": float(np.max(np.diff(F))) if len(F) > 1 else 0.0}
    out["summary.json"] = _json(_round17(summary))
    return out, tr.status


def _geodesic(s: Scenario, stage):
    from .dynamics import geodesic_flow
    model = s.mobility()
    with stage("integrate"):
        tr = geodesic_flow(model, s.density("rho0"), s.potential("phi1"), _flow_config(s))
    out = _trajectory_files("geodesic", tr)
    sp = tr.diagnostics["speed"]
    drift = float(np.max(np.abs(sp - sp[0])) / sp[0]) if sp[0] > 0 else 0.0
    summary = {"status": tr.status, "events": tr.events, "t_final": tr.times[-1],
               "speed_initial": sp[0], "speed_relative_drift": drift}
    out["summary.json"] = _json(_round17(summary))
    return out, tr.status


def _transport(s: Scenario, stage):
    from .dynamics import geodesic_flow, transport_many, transported_inner
    model = s.mobility()
    with stage("geodesic"):
        base = geodesic_flow(model, s.density("rho0"), s.potential("phi1"), _flow_config(s))
    if base.status != "ok":
        return _trajectory_files("geodesic", base), base.status
    names = ["eta0"] + (["eta1"] if "eta1" in s.fields else [])
    with stage("transport"):
        paths = transport_many(model, base, [s.potential(n) for n in names])
    cols, series = [], []
    for i in range(len(names)):
        for j in range(i, len(names)):
            cols.append(f"inner_{names[i]}_{names[j]}")
            series.append(transported_inner(model, base, paths[i], paths[j]))
    rows = [[t] + [v[k] for v in series] for k, t in enumerate(paths[0].times)]
    out = _trajectory_files("geodesic", base)
    out["transport_inner.csv"] = _csv(["time"] + cols, rows)
    for name, p in zip(names, paths):
        out[f"transport_{name}.csv"] = _csv(
            ["time"] + [f"x{i}" for i in range(s.n)],
            [[t] + list(e) for t, e in zip(p.times, p.etas)])
    # first and last series are the squared norms of eta0 and of the last field
    norm = np.sqrt(series[0][0] * series[-1][0])
    drift = max(float(np.max(np.abs(v - v[0]))) for v in series) / norm if norm > 0 else 0.0
    out["summary.json"] = _json(_round17({"status": "ok", "inner_product_relative_drift": drift,
                                          "transported": names}))
    return out, "ok"


def _distance(s: Scenario, stage):
    from .dynamics import OptimizerConfig, distance
    model = s.mobility()
    run = dict(s.run)
    n_time = run.pop("n_time")
    with stage("optimize"):
        res = distance(model, s.density("rho0"), s.density("rho1"), n_time, OptimizerConfig(**run))
    out = _trajectory_files("path", res.path)
    out["distance.json"] = _json(_round17({"value": res.value, "action": res.action,
                                           "status": res.status, "iterations": res.iterations}))
    return out, res.status


def _oracle(s: Scenario, stage):
    from .oracle import compare_report
    with stage("oracle"):
        table = compare_report(s.run["n_values"], s.mobility(), seed=s.seed,
                               samples=s.run["samples"], length=s.length)
    return {"comparison.csv": table.to_csv()}, "ok"


_SUITE_HEADER = ["model", "identity", "sample", "residual", "tolerance", "status"]


def identity_suite(s: Scenario, threads: int | None = None):
    """Pass/fail table of every identity for each model and seeded sample.

    Returns ``(outputs, status)`` where status is ``"ok"`` or ``"identity_failure"``.
    """
    from .identities import run_sample
    from .config import resolve_model
    threads = threads or _threads()
    models = s.run["models"]
    tasks = [(mi, name, k) for mi, name in enumerate(models) for k in range(s.run["samples"])]

    def work(task):
        mi, name, k = task
        checks = run_sample(resolve_model(name), s.n, [s.seed, mi, k], s.run["max_mode"],
                            s.dealias)
        return [(name, c.identity, k, c.residual, c.tolerance, c.status) for c in checks]

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    rows = [r for block in results for r in block]
    failures = [r for r in rows if r[5] == "fail"]
    summary = {}
    for r in rows:
        d = summary.setdefault(r[1], {"max_residual": 0.0, "tolerance": r[4], "failures": 0,
                                      "informational": r[5] == "info", "count": 0})
        d["max_residual"] = max(d["max_residual"], r[3])
        d["failures"] += r[5] == "fail"
        d["count"] += 1
    status = "identity_failure" if failures else "ok"
    out = {"identities.csv": _csv(_SUITE_HEADER, rows),
           "summary.json": _json(_round17({"status": status, "rows": len(rows),
                                           "failures": len(failures), "dealias": s.dealias,
                                           "identities": summary}))}
    return out, status


def _threads() -> int:
    raw = os.environ.get("HYDROGEO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


_KINDS = {"curvature": _curvature, "flow": _flow, "geodesic": _geodesic,
          "transport": _transport, "distance": _distance, "oracle": _oracle}


def run_scenario(s: Scenario, out_dir: str | None = None) -> RunManifest:
    """Run one scenario, write its outputs and ``manifest.json``; return the manifest.

    Library errors propagate with the scenario kind attached; a completed
    run with a non-``ok`` numerical status still writes its outputs and
    reports exit code 3 (4 for identity-suite failures).
    """
    out_dir = s.out_dir if out_dir is None else out_dir
    stage = _Stages()
    try:
        if s.kind == "identity_suite":
            with stage("suite"):
                outputs, status = identity_suite(s)
        else:
            outputs, status = _KINDS[s.kind](s, stage)
    except HydrogeoError as exc:
        exc.args = (f"[{s.kind}] {exc.args[0]}",) + exc.args[1:]
        raise
    outputs["config.txt"] = s.echo()
    if status == "ok":
        code = EXIT_OK
    elif status == "identity_failure":
        code = EXIT_SUITE
    else:
        code = EXIT_NUMERIC
    with stage("write"):
        files = _write_outputs(out_dir, outputs)
    manifest = RunManifest(config=s.echo(), version=version(), kind=s.kind,
                           stages=stage.times, files=files, status=status, exit_code=code,
                           created=_dt.datetime.now(_dt.timezone.utc).isoformat())
    _write_outputs(out_dir, {"manifest.json": manifest.to_json() + "\n"})
    return manifest
