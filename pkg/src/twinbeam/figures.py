"""Plot-ready data bundles for the standard demonstration figures.

Each bundle lands in its own directory as CSV files plus a ``manifest.json``
(schema 1) describing axes, parameters, seed, and the role of every file.
Data only, no rendering: the files feed any plotting front end.

  fig2a, fig2b  joint count tables at the two reference parameter sets
                (mu=197, eta=0.06, M=13.4) and (mu=25, eta=0.056, M=17.1)
  fig3, fig5    conditional count distributions (exact trigger values,
                above- and below-threshold selections), the affine
                conditional-mean line, and a synthetic 50 000-shot
                "experimental" overlay resampled from the model
  fig4          four renormalised-nonGaussianity sweep panels (vs energy,
                trigger value, efficiency, and mode number)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import serialize
from .conditional import (
    SelectionRule,
    build_conditional,
    cond_count_dist,
    conditional_mean,
)
from .core import marginal_dist
from .errors import InfeasibleConstraintError, ParameterError
from .nongauss import solve_mean_counts, sweep
from .params import ExperimentParams
from .sampling import sample_run

__all__ = ["FIGURE_IDS", "reproduce"]

PARAMS_A = ExperimentParams(197.0, 0.06, 13.4)
PARAMS_B = ExperimentParams(25.0, 0.056, 17.1)

FIGURE_IDS = ("fig2a", "fig2b", "fig3", "fig4", "fig5")

_COND_FIGS = {
    # exact trigger values, above-thresholds, below-thresholds
    "fig3": (PARAMS_A, (10, 15), (11, 17), (8, 15)),
    "fig5": (PARAMS_B, (13, 19), (17, 21), (10, 15)),
}

_SHOTS = 50_000


def reproduce(
    figure_id: str,
    outdir,
    seed: int = 0,
    tol: float = 1e-10,
) -> dict:
    """Write every curve of the named figure under ``outdir/<figure_id>/``.

    Returns the manifest (also written to manifest.json).  Deterministic for
    fixed seed.
    """
    if figure_id not in FIGURE_IDS:
        raise ParameterError(f"unknown figure id {figure_id!r}; know {FIGURE_IDS}")
    outdir = Path(serialize.resolve_output(Path(outdir) / figure_id))
    outdir.mkdir(parents=True, exist_ok=True)
    if figure_id in ("fig2a", "fig2b"):
        manifest = _joint_figure(figure_id, outdir, tol)
    elif figure_id in _COND_FIGS:
        manifest = _conditional_figure(figure_id, outdir, seed, tol)
    else:
        manifest = _sweep_figure(outdir, tol)
    manifest = {
        "schema": serialize.SCHEMA,
        "figure": figure_id,
        "seed": seed,
        "tol": tol,
        **manifest,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest


def _joint_figure(figure_id: str, outdir: Path, tol: float) -> dict:
    from .core import joint_table

    params = PARAMS_A if figure_id == "fig2a" else PARAMS_B
    table = joint_table(params, tol=tol)
    path = outdir / "joint.csv"
    serialize.write_joint_csv(path, table)
    return {
        "params": serialize.params_to_dict(params),
        "axes": ["s", "t"],
        "files": [
            {"path": path.name, "role": "joint count probability table", "columns": "s,t,p"}
        ],
    }


def _write_means_csv(path: Path, rows: list[tuple[str, float, float]]) -> None:
    lines = ["kind,value,mean"]
    lines += [f"{kind},{value},{repr(float(mean))}" for kind, value, mean in rows]
    path.write_text("\n".join(lines) + "\n")


def _conditional_figure(figure_id: str, outdir: Path, seed: int, tol: float) -> dict:
    params, exact_ts, above_ts, below_ts = _COND_FIGS[figure_id]
    files = []

    def emit(name: str, dist, role: str) -> None:
        path = outdir / name
        serialize.write_counts_csv(path, dist)
        files.append({"path": path.name, "role": role, "columns": "s,p"})

    emit("unconditioned_theory.csv", marginal_dist(params, tol), "unconditioned count distribution")
    rules = [(f"exact_t{t}", SelectionRule.exact(t)) for t in exact_ts]
    rules += [(f"above_{t}", SelectionRule.above(t)) for t in above_ts]
    rules += [(f"below_{t}", SelectionRule.below(t)) for t in below_ts]
    for name, rule in rules:
        emit(f"{name}_theory.csv", cond_count_dist(params, rule, tol=tol),
             f"conditional count distribution, {rule.describe()}")

    # Theory mean-vs-selection curves: exact trigger, both threshold families,
    # and the unconditioned level.
    mean_rows: list[tuple[str, float, float]] = []
    t_hi = 30
    for t in range(t_hi + 1):
        mean_rows.append(("exact", t, conditional_mean(params, t)))
    for t_star in range(0, t_hi):
        mix = build_conditional(params, SelectionRule.above(t_star), tol)
        mean_rows.append(("above", t_star, mix.mean_counts()))
    for t_star in range(1, t_hi + 1):
        mix = build_conditional(params, SelectionRule.below(t_star), tol)
        mean_rows.append(("below", t_star, mix.mean_counts()))
    mean_rows.append(("unconditioned", -1, params.mean_counts))
    _write_means_csv(outdir / "means_theory.csv", mean_rows)
    files.append({
        "path": "means_theory.csv",
        "role": "conditional mean counts vs trigger value / threshold",
        "columns": "kind,value,mean",
    })

    # Synthetic experimental overlay: resample the model and post-select.
    record = sample_run(params, _SHOTS, seed=seed)
    path = outdir / "shots.csv"
    serialize.write_shots_csv(path, record)
    files.append({"path": path.name, "role": f"synthetic record, {_SHOTS} shots", "columns": "s,t"})

    s_arr, t_arr = record.s, record.t
    emp_rows = ["kind,value,mean,n_shots"]

    def emp_hist(mask: np.ndarray, name: str, role: str) -> None:
        selected = s_arr[mask]
        if selected.size == 0:
            return
        probs = np.bincount(selected) / selected.size
        lines = ["s,p"] + [f"{s},{repr(float(p))}" for s, p in enumerate(probs)]
        (outdir / name).write_text("\n".join(lines) + "\n")
        files.append({"path": name, "role": role, "columns": "s,p"})

    for name, rule in rules:
        mask = np.fromiter((rule.contains(int(v)) for v in t_arr), bool, count=len(record))
        emp_hist(mask, f"{name}_synthetic.csv", f"post-selected synthetic counts, {rule.describe()}")
    for t in range(t_hi + 1):
        mask = t_arr == t
        if mask.sum() >= 20:
            emp_rows.append(f"exact,{t},{repr(float(s_arr[mask].mean()))},{int(mask.sum())}")
    for t_star in range(0, t_hi):
        mask = t_arr > t_star
        if mask.sum() >= 20:
            emp_rows.append(f"above,{t_star},{repr(float(s_arr[mask].mean()))},{int(mask.sum())}")
    for t_star in range(1, t_hi + 1):
        mask = t_arr < t_star
        if mask.sum() >= 20:
            emp_rows.append(f"below,{t_star},{repr(float(s_arr[mask].mean()))},{int(mask.sum())}")
    (outdir / "means_synthetic.csv").write_text("\n".join(emp_rows) + "\n")
    files.append({
        "path": "means_synthetic.csv",
        "role": "post-selected synthetic mean counts",
        "columns": "kind,value,mean,n_shots",
    })

    return {
        "params": serialize.params_to_dict(params),
        "axes": ["s"],
        "n_shots": _SHOTS,
        "files": files,
    }


# (mu, eta) curve families shared by the sweep panels.
_MU_SET = (197.0, 25.0, 1.0)
_ETA_SET = (0.06, 0.08, 0.10, 0.20)


def _feasible(axis: str, values, fixed: dict):
    """Grid points where the conditional-mean inversion gives a positive beam mean."""
    out = []
    for v in values:
        point = dict(fixed)
        point[axis] = v
        try:
            m = solve_mean_counts(point["M_t"], point["t"], point["mu"], point["eta"])
        except InfeasibleConstraintError:
            continue
        if m > 1e-9:
            out.append(v)
    return out


def _sweep_figure(outdir: Path, tol: float) -> dict:
    files = []
    panels = {
        "energy_panel.csv": (
            "M_t",
            np.round(np.arange(1.2, 8.01, 0.4), 10).tolist(),
            [{"t": 5, "mu": mu, "eta": eta} for mu in _MU_SET for eta in _ETA_SET],
        ),
        "trigger_panel.csv": (
            "t",
            list(range(0, 31, 2)),
            [{"M_t": 4.0, "mu": mu, "eta": eta} for mu in _MU_SET for eta in _ETA_SET],
        ),
        "efficiency_panel.csv": (
            "eta",
            np.round(np.arange(0.02, 0.301, 0.02), 10).tolist(),
            [{"M_t": 4.0, "t": t, "mu": mu} for t in (5, 15) for mu in _MU_SET],
        ),
        "modes_panel.csv": (
            "mu",
            [1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 25.0, 50.0, 100.0, 197.0],
            [{"M_t": 4.0, "t": t, "eta": eta} for t in (2, 15) for eta in _ETA_SET],
        ),
    }
    for name, (axis, grid, curves) in panels.items():
        lines = ["mu,eta,t,axis,value,delta,delta_R,S_state,S_ref"]
        for fixed in curves:
            feasible = _feasible(axis, grid, fixed)
            if not feasible:
                continue
            rows = sweep(axis, feasible, fixed, tol=tol)
            label = dict(fixed)
            for row in rows:
                label[axis] = row.value
                lines.append(
                    f"{label['mu']},{label['eta']},{label['t']},{row.axis},"
                    f"{repr(row.value)},{repr(row.delta)},{repr(row.delta_R)},"
                    f"{repr(row.S_state)},{repr(row.S_ref)}"
                )
        (outdir / name).write_text("\n".join(lines) + "\n")
        files.append({
            "path": name,
            "role": f"renormalised nonGaussianity vs {axis} (beam mean solved "
                    "from the conditional-mean relation at each point)",
            "columns": "mu,eta,t,axis,value,delta,delta_R,S_state,S_ref",
        })
    return {"axes": ["value"], "files": files}
