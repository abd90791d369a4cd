"""Read sweep CSVs and render the two standard figures.

Two kinds of input are understood, identified by their exact headers:

* convergence data: ``d_over_lambda,arch,iteration,c_linearized,gain_exact``
  (one gain-versus-iteration trace per spacing and architecture);
* gain-versus-elements data: ``M,d_over_lambda,arch,mode,gain``
  (one curve per spacing, architecture and coupling mode).

Rendering never mutates the input; a separate check pass re-validates the
qualitative properties the data is expected to satisfy (non-decreasing
traces, architecture ordering, coupling-aware dominance) and reports each
violation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

CONVERGENCE_COLUMNS = ["d_over_lambda", "arch", "iteration", "c_linearized", "gain_exact"]
GAIN_COLUMNS = ["M", "d_over_lambda", "arch", "mode", "gain"]

ARCH_STYLE = {"FC": "-", "GC": "--", "SC": ":"}
MODE_COLOR = {"with_mc": "tab:blue", "without_mc": "tab:orange"}
MODE_LABEL = {"with_mc": "w/ MC", "without_mc": "w/o MC"}
_MARKERS = ["o", "s", "^", "D", "v", "P", "*"]

MONOTONE_SLACK = 1e-6
ORDER_SLACK = 0.01
BLIND_EQUALITY_TOL = 1e-6


class MissingColumn(ValueError):
    """The input CSV lacks one of the expected columns."""


@dataclass
class PlotSpec:
    """What to read, which figure to draw, and where to write it."""

    input_csv: Path
    kind: str  # "convergence" | "gain_vs_m"
    output: Path
    log_x: bool = False
    log_y: bool = True

    def __post_init__(self):
        self.input_csv = Path(self.input_csv)
        self.output = Path(self.output)
        if self.kind not in ("convergence", "gain_vs_m"):
            raise ValueError(f"unknown figure kind: {self.kind!r}")


def read_rows(path: Path, expected: list[str]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in expected:
            if column not in header:
                raise MissingColumn(f"input {path} is missing column '{column}'")
        return list(reader)


def read_meta(input_csv: Path) -> dict:
    meta_path = input_csv.parent / (input_csv.stem + ".meta.json")
    if meta_path.is_file():
        try:
            return json.loads(meta_path.read_text())
        except (json.JSONDecodeError, OSError):
            return {}
    return {}


def _footer_text(input_csv: Path) -> str:
    meta = read_meta(input_csv)
    if not meta:
        return f"source: {input_csv.name}"
    parts = [f"source: {input_csv.name}"]
    if "frequency_hz" in meta:
        parts.append(f"f = {meta['frequency_hz'] / 1e9:g} GHz")
    if "delta" in meta:
        parts.append(f"delta = {meta['delta']:g} ohm")
    if "relative_tolerance" in meta:
        parts.append(f"tol = {meta['relative_tolerance']:g}")
    if "max_iterations" in meta:
        parts.append(f"max iter = {meta['max_iterations']}")
    if "quadrature_order" in meta:
        parts.append(f"quadrature order = {meta['quadrature_order']}")
    return "   ".join(parts)


def _marker_for(values: list[str]):
    ordered = sorted(set(values), key=float, reverse=True)
    return {v: _MARKERS[i % len(_MARKERS)] for i, v in enumerate(ordered)}


def render(spec: PlotSpec) -> Path:
    """Draw the figure described by ``spec``; returns the written image path."""
    if spec.kind == "convergence":
        rows = read_rows(spec.input_csv, CONVERGENCE_COLUMNS)
        fig = _render_convergence(rows, spec)
    else:
        rows = read_rows(spec.input_csv, GAIN_COLUMNS)
        fig = _render_gain_vs_m(rows, spec)
    fig.text(0.01, 0.005, _footer_text(spec.input_csv), fontsize=6, color="0.35")
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return spec.output


def _render_convergence(rows: list[dict], spec: PlotSpec):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    groups: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for row in rows:
        key = (row["d_over_lambda"], row["arch"])
        groups.setdefault(key, []).append((int(row["iteration"]), float(row["gain_exact"])))
    markers = _marker_for([d for d, _ in groups])
    for (d, arch), points in sorted(groups.items(), key=lambda kv: (-float(kv[0][0]), kv[0][1])):
        points.sort()
        iterations = [p[0] for p in points]
        gains = [p[1] for p in points]
        ax.plot(iterations, gains, ARCH_STYLE.get(arch, "-"),
                marker=markers[d], markevery=max(len(points) // 12, 1), markersize=4,
                label=f"{arch}, d = {float(d):g}λ")
    ax.set_xlabel("iteration")
    ax.set_ylabel("channel gain")
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    if groups:
        ax.legend(fontsize=8)
    ax.set_title("Channel gain versus iterations")
    ax.grid(True, which="both", alpha=0.3)
    return fig


def _render_gain_vs_m(rows: list[dict], spec: PlotSpec):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    groups: dict[tuple[str, str, str], list[tuple[int, float]]] = {}
    for row in rows:
        key = (row["d_over_lambda"], row["arch"], row["mode"])
        groups.setdefault(key, []).append((int(row["M"]), float(row["gain"])))
    markers = _marker_for([d for d, _, _ in groups])
    order = {"FC": 0, "GC": 1, "SC": 2}
    for (d, arch, mode), points in sorted(
            groups.items(), key=lambda kv: (-float(kv[0][0]), order.get(kv[0][1], 9), kv[0][2])):
        points.sort()
        ms = [p[0] for p in points]
        gains = [p[1] for p in points]
        ax.plot(ms, gains, ARCH_STYLE.get(arch, "-"), color=MODE_COLOR.get(mode, "0.4"),
                marker=markers[d], markersize=4,
                label=f"{arch}, {MODE_LABEL.get(mode, mode)}, d = {float(d):g}λ")
    ax.set_xlabel("number of surface elements")
    ax.set_ylabel("channel gain")
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    if groups:
        ax.legend(fontsize=7, ncol=2)
    ax.set_title("Channel gain versus the number of elements")
    ax.grid(True, which="both", alpha=0.3)
    return fig


def check_convergence(rows: list[dict]) -> list[str]:
    """Every (spacing, architecture) trace must be non-decreasing within slack."""
    violations = []
    traces: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for row in rows:
        key = (row["d_over_lambda"], row["arch"])
        traces.setdefault(key, []).append((int(row["iteration"]), float(row["c_linearized"])))
    for (d, arch), points in sorted(traces.items()):
        points.sort()
        for (_, prev), (it, cur) in zip(points, points[1:]):
            if cur < prev * (1.0 - MONOTONE_SLACK):
                violations.append(
                    f"trace d={d} {arch}: objective drops {prev:.6e} -> {cur:.6e} "
                    f"at iteration {it}")
                break
    return violations


def check_gain_ordering(rows: list[dict]) -> list[str]:
    """Architecture/coupling-mode ordering expected of the gain sweep."""
    violations = []
    gains: dict[tuple[int, float, str, str], float] = {}
    for row in rows:
        gains[(int(row["M"]), float(row["d_over_lambda"]), row["arch"], row["mode"])] = \
            float(row["gain"])
    m_values = sorted({k[0] for k in gains})
    d_values = sorted({k[1] for k in gains}, reverse=True)

    for m in m_values:
        for d in d_values:
            blind = [gains[k] for k in gains
                     if k[0] == m and k[1] == d and k[3] == "without_mc"]
            if len(blind) > 1:
                spread = (max(blind) - min(blind)) / max(blind)
                if spread > BLIND_EQUALITY_TOL:
                    violations.append(
                        f"M={m} d={d}: coupling-blind designs differ by {spread:.2e} relative")
            fc = gains.get((m, d, "FC", "with_mc"))
            gc = gains.get((m, d, "GC", "with_mc"))
            sc = gains.get((m, d, "SC", "with_mc"))
            if fc is not None and sc is not None:
                chain = [("FC", fc)] + ([("GC", gc)] if gc is not None else []) + [("SC", sc)]
                for (hi_name, hi), (lo_name, lo) in zip(chain, chain[1:]):
                    if hi < lo * (1.0 - ORDER_SLACK):
                        violations.append(
                            f"M={m} d={d}: {hi_name} gain {hi:.3e} below {lo_name} {lo:.3e}")
            for arch in ("SC", "GC", "FC"):
                aware = gains.get((m, d, arch, "with_mc"))
                blind_gain = gains.get((m, d, arch, "without_mc"))
                if aware is not None and blind_gain is not None and aware < blind_gain:
                    violations.append(
                        f"M={m} d={d} {arch}: coupling-aware {aware:.3e} "
                        f"below coupling-blind {blind_gain:.3e}")

    if 16 in m_values and 0.5 in d_values and 0.125 in d_values:
        try:
            tight = gains[(16, 0.125, "FC", "with_mc")] / gains[(16, 0.125, "SC", "with_mc")]
            loose = gains[(16, 0.5, "FC", "with_mc")] / gains[(16, 0.5, "SC", "with_mc")]
            if tight <= loose:
                violations.append(
                    f"M=16: FC/SC ratio {tight:.4f} at d=0.125 not above {loose:.4f} at d=0.5")
        except KeyError:
            pass
    return violations


def check(spec: PlotSpec) -> list[str]:
    """Validation pass for the spec's figure kind; returns violations."""
    if spec.kind == "convergence":
        return check_convergence(read_rows(spec.input_csv, CONVERGENCE_COLUMNS))
    return check_gain_ordering(read_rows(spec.input_csv, GAIN_COLUMNS))
