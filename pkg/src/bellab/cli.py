"""Command-line frontend: reproducible prediction, scanning, table
verification, perfect-correlation checks, and simulation campaigns.

Angles are given with a mandatory ``deg`` or ``rad`` suffix. Every output
file starts with header lines echoing the fully resolved configuration and
the artifact version, so a run can be reproduced from its own output. The
environment variable ``BELLAB_SEED`` overrides the default master seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .core import (AnalyzerAngle, CountsTable, NoCoincidencesError, QmSource,
                   correlation_from_counts, qm_full_distribution,
                   quad_from_phi)
from . import bounds, lhv, montecarlo

_ENV_SEED = "BELLAB_SEED"


class CliError(Exception):
    """Usage or input error; maps to a nonzero exit code."""


def parse_angle(text: str) -> AnalyzerAngle:
    t = text.strip().lower()
    for suffix, scale in (("deg", math.pi / 180.0), ("rad", 1.0)):
        if t.endswith(suffix):
            try:
                return AnalyzerAngle(float(t[: -len(suffix)]) * scale)
            except ValueError as exc:
                raise CliError(f"bad angle {text!r}: {exc}") from exc
    raise CliError(f"angle {text!r} needs a 'deg' or 'rad' suffix")


def _default_seed() -> int:
    raw = os.environ.get(_ENV_SEED)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise CliError(f"{_ENV_SEED}={raw!r} is not an integer") from exc


def _header_lines(command: str, params: dict) -> list:
    items = " ".join(f"{k}={v}" for k, v in sorted(params.items()))
    return [
        f"# bellab {command} version={__version__}",
        f"# config: {items}",
    ]


def _json_report(command: str, params: dict, body: dict) -> str:
    doc = {
        "artifact_version": __version__,
        "command": command,
        "config": {k: params[k] for k in sorted(params)},
    }
    doc.update(body)
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- predict

def cmd_predict(args) -> int:
    a = parse_angle(args.a)
    b = parse_angle(args.b)
    src = QmSource(correlation_sign=args.sign, F=args.F, eta_overall=args.eta)
    dist = qm_full_distribution(src, a, b)
    params = {"eta": args.eta, "F": args.F, "sign": args.sign,
              "a_rad": a.value, "b_rad": b.value}
    lines = _header_lines("predict", params)
    lines.append("r\\q        +1          -1           0")
    for r, row in zip(("+1", "-1", " 0"), dist.table):
        lines.append(f"{r}   " + "  ".join(f"{p:.10f}" for p in row))
    detected = dist.table[:2, :2]
    c_eff = float((detected[0, 0] + detected[1, 1]
                   - detected[0, 1] - detected[1, 0]) / detected.sum())
    lines.append(f"C_eff = {c_eff:.10f}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


# ------------------------------------------------------------------- scan

def cmd_scan(args) -> int:
    src = QmSource(correlation_sign=args.sign, F=args.F, eta_overall=args.eta)
    result = bounds.scan_violation(src, phi_grid=args.grid)
    params = {"eta": args.eta, "F": args.F, "sign": args.sign,
              "grid": args.grid}
    lines = _header_lines("scan", params)
    lines.append("phi_rad,G,violated")
    for pt in result.points:
        lines.append(f"{pt.phi!r},{pt.g!r},{int(pt.violated)}")
    _write_text(args.out, "\n".join(lines) + "\n")
    summary = {
        "violation_intervals_rad": [list(iv) for iv in
                                    result.violation_intervals],
        "phi_max_rad": result.phi_max,
        "g_max": result.g_max,
    }
    sys.stdout.write(_json_report("scan", params, summary))
    if args.svg:
        _write_text(args.svg, _scan_svg(result, params))
    return 0


def _scan_svg(result, params: dict) -> str:
    """Hand-rolled single-polyline SVG of G(phi) with the zero axis marked."""
    w, h, margin = 640, 400, 40
    phis = [pt.phi for pt in result.points]
    gs = [pt.g for pt in result.points]
    g_lo = min(min(gs), 0.0)
    g_hi = max(max(gs), 0.0)
    span = (g_hi - g_lo) or 1.0

    def sx(phi):
        return margin + (w - 2 * margin) * phi / phis[-1]

    def sy(g):
        return h - margin - (h - 2 * margin) * (g - g_lo) / span

    pts = " ".join(f"{sx(p):.2f},{sy(g):.2f}" for p, g in zip(phis, gs))
    y0 = sy(0.0)
    conf = " ".join(f"{k}={v}" for k, v in sorted(params.items()))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">\n'
        f"<!-- bellab scan version={__version__} {conf} -->\n"
        f'<rect width="{w}" height="{h}" fill="white"/>\n'
        f'<line x1="{margin}" y1="{y0:.2f}" x2="{w - margin}" y2="{y0:.2f}" '
        f'stroke="gray" stroke-dasharray="4 3"/>\n'
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{h - margin}" '
        f'stroke="black"/>\n'
        f'<line x1="{margin}" y1="{h - margin}" x2="{w - margin}" '
        f'y2="{h - margin}" stroke="black"/>\n'
        f'<polyline points="{pts}" fill="none" stroke="crimson" '
        f'stroke-width="1.5"/>\n'
        f'<text x="{w - margin}" y="{y0 - 6:.2f}" text-anchor="end" '
        f'font-size="12">G = 0</text>\n'
        f'<text x="{w / 2}" y="{h - 8}" text-anchor="middle" '
        f'font-size="12">phi (rad)</text>\n'
        "</svg>\n"
    )


# ----------------------------------------------------------------- tables

def cmd_tables(args) -> int:
    if args.samples < 1:
        raise CliError("--samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    max_disc = 0.0
    for _ in range(args.samples):
        rows = bounds.enumerate_extremes(rng.random(6))
        disc = max(abs(r.g_numeric - r.g_symbolic) for r in rows)
        max_disc = max(max_disc, disc)
    ideal = bounds.enumerate_extremes((1.0,) * 6)
    ideal_max = max(r.g_numeric for r in ideal)
    ideal_min = min(r.g_numeric for r in ideal)
    params = {"samples": args.samples, "seed": args.seed}
    body = {
        "max_abs_discrepancy": max_disc,
        "ideal_max_g": ideal_max,
        "ideal_min_g": ideal_min,
        "rows": [
            {"row": r.row_index, "symbols": list(r.symbols),
             "g_at_ideal": r.g_numeric}
            for r in ideal
        ],
    }
    _write_text(args.out, _json_report("tables", params, body))
    return 0


# ------------------------------------------------------------------- btcc

def cmd_btcc(args) -> int:
    try:
        model = lhv.builtin_model(args.model)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    direction = parse_angle(args.direction)
    report = lhv.btcc_check(model, direction, n_samples=args.samples,
                            tol=args.tol, seed=args.seed)
    params = {"model": model.name, "direction_rad": direction.value,
              "samples": args.samples, "tol": args.tol, "seed": args.seed}
    _write_text(args.out, _json_report("btcc", params, report.to_dict()))
    return 0


# --------------------------------------------------------------- simulate

def _read_config(path: str) -> dict:
    cfg = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                cfg[key.strip()] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config {path!r}: {exc}") from exc
    return cfg


def _counts_csv(counts: CountsTable, command: str, params: dict) -> str:
    lines = _header_lines(command, params)
    lines.append("pair_index,a_rad,b_rad,r,q,count,n_emitted")
    for idx, pc in enumerate(counts):
        for r in (1, -1, 0):
            for q in (1, -1, 0):
                lines.append(f"{idx},{pc.a.value!r},{pc.b.value!r},"
                             f"{r},{q},{pc.count(r, q)},{pc.n_emitted}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    cfg = _read_config(args.config)

    def need(key):
        if key not in cfg:
            raise CliError(f"config {args.config!r} is missing {key!r}")
        return cfg[key]

    source_name = need("source")
    if source_name == "qm":
        source = QmSource(
            correlation_sign=int(cfg.get("sign", "1")),
            F=float(cfg.get("F", "1.0")),
            eta_overall=float(cfg.get("eta", "1.0")),
        )
    else:
        try:
            source = lhv.builtin_model(source_name)
        except ValueError as exc:
            raise CliError(str(exc)) from exc

    phi = float(need("phi"))
    n = int(need("pairs_per_setting"))
    seed = int(cfg.get("seed", str(_default_seed())))
    workers = int(cfg.get("workers", "1"))
    efficiency = float(cfg.get("efficiency", "1.0"))
    r = int(cfg.get("r", "1"))
    q = int(cfg.get("q", "1"))

    quad = quad_from_phi(phi)
    exp_cfg = montecarlo.ExperimentConfig(
        source=source,
        setting_pairs=montecarlo.quad_setting_pairs(quad),
        pairs_per_setting=n,
        efficiency=efficiency,
        seed=seed,
        workers=workers,
    )
    counts = montecarlo.run_experiment(exp_cfg)

    params = {
        "source": source.name if isinstance(source, lhv.LhvModel) else "qm",
        "phi": phi, "pairs_per_setting": n, "seed": seed,
        "efficiency": efficiency, "workers": workers, "r": r, "q": q,
    }
    if isinstance(source, QmSource):
        params.update(eta=source.eta_overall, F=source.F,
                      sign=source.correlation_sign)

    prefix = args.out_prefix or cfg.get("out_prefix")
    if prefix is None:
        raise CliError("give --out-prefix or set out_prefix in the config")

    _write_text(prefix + "_counts.csv", _counts_csv(counts, "simulate", params))

    ratio = montecarlo.ratio_statistic(counts, r, q)
    g_rep = montecarlo.g_statistic_from_counts(counts, r, q)
    assumption_a = montecarlo.assumption_a_test(counts)
    try:
        chsh_inputs = {lab: correlation_from_counts(counts, lab)
                       for lab in ("ab", "apb", "apbp", "abp")}
    except NoCoincidencesError:
        chsh_inputs = None
    body = {
        "ratio": {
            "numerator": ratio.numerator,
            "denominator": ratio.denominator,
            "value": ratio.ratio,
            "stderr": ratio.stderr,
            "violated": ratio.violated,
        },
        "g": {
            "value": g_rep.value,
            "stderr": g_rep.stderr,
            "bound_violated": g_rep.bound_violated,
            "components": g_rep.components,
        },
        "assumption_a": {
            "statistic": assumption_a.statistic,
            "dof": assumption_a.dof,
            "p_value": assumption_a.p_value,
            "pass": assumption_a.passed,
            "significance": assumption_a.significance,
            "per_wing": {str(k): v for k, v in assumption_a.per_wing.items()},
        },
        "effective_correlations": chsh_inputs,
    }
    _write_text(prefix + "_report.json", _json_report("simulate", params, body))
    sys.stdout.write(f"wrote {prefix}_counts.csv and {prefix}_report.json\n")
    return 0


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bellab",
        description="Numerical laboratory for detection-efficiency-"
                    "independent Bell-type inequalities.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("predict", help="print the QM 3x3 outcome table")
    pr.add_argument("--eta", type=float, default=1.0)
    pr.add_argument("--F", type=float, default=1.0)
    pr.add_argument("--sign", type=int, default=1, choices=(1, -1))
    pr.add_argument("--a", required=True, help="angle, e.g. 22.5deg or 0.3rad")
    pr.add_argument("--b", required=True)
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=cmd_predict)

    sc = sub.add_parser("scan", help="scan G over phi, emit CSV (and SVG)")
    sc.add_argument("--eta", type=float, default=1.0)
    sc.add_argument("--F", type=float, default=1.0)
    sc.add_argument("--sign", type=int, default=1, choices=(1, -1))
    sc.add_argument("--grid", type=int, default=256)
    sc.add_argument("--out", default=None, help="CSV path (default stdout)")
    sc.add_argument("--svg", default=None, help="optional SVG plot path")
    sc.set_defaults(func=cmd_scan)

    tb = sub.add_parser("tables", help="verify the 16 extreme-point rows")
    tb.add_argument("--samples", type=int, default=10_000)
    tb.add_argument("--seed", type=int, default=None)
    tb.add_argument("--out", default=None)
    tb.set_defaults(func=cmd_tables)

    bt = sub.add_parser("btcc", help="perfect-correlation check for a model")
    bt.add_argument("--model", required=True)
    bt.add_argument("--direction", default="0rad")
    bt.add_argument("--samples", type=int, default=100_000)
    bt.add_argument("--tol", type=float, default=1e-3)
    bt.add_argument("--seed", type=int, default=None)
    bt.add_argument("--out", default=None)
    bt.set_defaults(func=cmd_btcc)

    sm = sub.add_parser("simulate",
                        help="run a simulation campaign from a config file")
    sm.add_argument("config", help="flat key=value config file")
    sm.add_argument("--out-prefix", default=None)
    sm.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        try:
            args.seed = _default_seed()
        except CliError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
