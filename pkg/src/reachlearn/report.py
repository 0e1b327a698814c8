"""Aggregate per-reach results into one table per figure plus a summary."""
from __future__ import annotations

import numpy as np

from .experiment import CONDITIONS, bootstrap_ci, normalize_trajectory

FIGURES = {
    "fig4": ("cumulative_penalty", "Average cumulative penalty by trial"),
    "fig6": ("angular_error_200ms", "Average angle error from goal after 200 ms"),
    "fig7": ("mean_speed", "Average velocities by trial"),
    "fig8": ("min_goal_distance", "Average minimum distance to goal by trial"),
}


def _conditions(rows):
    present = {r["condition"] for r in rows}
    return [c for c in CONDITIONS if c in present] + sorted(present - set(CONDITIONS))


def model_error_table(error_rows, n_resamples=1000):
    """fig3: mean held-out one-step error per step, pooled over walks and seeds."""
    out = []
    for cond in _conditions(error_rows):
        steps = sorted({r["step"] for r in error_rows if r["condition"] == cond})
        for step in steps:
            vals = [r["error"] for r in error_rows if r["condition"] == cond and r["step"] == step]
            m, lo, hi = bootstrap_ci(vals, n_resamples)
            out.append({"condition": cond, "step": step, "error": m, "error_lo": lo,
                        "error_hi": hi, "n": len(vals)})
    return out


def reach_metric_table(rows, metric, n_resamples=1000):
    out = []
    for cond in _conditions(rows):
        for reach in sorted({r["reach"] for r in rows if r["condition"] == cond}):
            vals = [r[metric] for r in rows if r["condition"] == cond and r["reach"] == reach]
            m, lo, hi = bootstrap_ci(vals, n_resamples)
            sd = float(np.nanstd(np.asarray(vals, float), ddof=1)) if len(vals) > 1 else 0.0
            out.append({"condition": cond, "reach": reach, metric: m, f"{metric}_lo": lo,
                        f"{metric}_hi": hi, "sd": sd, "n": len(vals)})
    return out


def average_trajectories(trajectory_rows, max_steps=28):
    """fig5: normalised cursor paths averaged per condition and reach.

    Reaches that terminated early hold their final position so every path
    has ``max_steps + 1`` points.
    """
    groups = {}
    for r in trajectory_rows:
        key = (r["condition"], r["seed"], r["block"], r["reach"])
        groups.setdefault(key, {"rotation": r["rotation"], "goal": (r["goal_x"], r["goal_y"]), "pts": []})
        groups[key]["pts"].append((r["step"], r["x"], r["y"]))
    paths = {}
    for (cond, _, _, reach), g in groups.items():
        pts = np.array([p[1:] for p in sorted(g["pts"])])
        norm = normalize_trajectory(pts, g["rotation"], g["goal"])
        padded = np.vstack([norm, np.repeat(norm[-1:], max_steps + 1 - len(norm), axis=0)])
        paths.setdefault((cond, reach), []).append(padded)
    out = []
    for (cond, reach), ps in sorted(paths.items(), key=lambda kv: (_order(kv[0][0]), kv[0][1])):
        arr = np.array(ps)
        mean, sd = arr.mean(axis=0), arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros(arr.shape[1:])
        for step in range(arr.shape[1]):
            out.append({"condition": cond, "reach": reach, "step": step, "x": mean[step, 0],
                        "y": mean[step, 1], "sd_x": sd[step, 0], "sd_y": sd[step, 1], "n": len(arr)})
    return out


def _order(cond):
    return CONDITIONS.index(cond) if cond in CONDITIONS else len(CONDITIONS)


def final_spread(rows, reach=1):
    """Total standard deviation (cm) of the final cursor position on ``reach``, per condition.

    Positions are normalised first so the goal direction and curl agree.
    """
    out = {}
    for cond in _conditions(rows):
        pts = []
        for r in rows:
            if r["condition"] == cond and r["reach"] == reach:
                pts.append(normalize_trajectory(np.array([[r["final_x"], r["final_y"]]]),
                                                r["rotation"], (r["goal_x"], r["goal_y"]))[0])
        pts = np.array(pts)
        out[cond] = float(np.sqrt(np.sum(np.var(pts, axis=0, ddof=1)))) if len(pts) > 1 else 0.0
    return out


def build_report(metric_rows, error_rows, trajectory_rows, baseline=None, n_resamples=1000,
                 max_steps=28):
    """Return ``({name: rows}, summary)`` for fig3..fig8 and the summary JSON."""
    tables = {"fig3": model_error_table(error_rows, n_resamples)}
    for name, (metric, _) in FIGURES.items():
        tables[name] = reach_metric_table(metric_rows, metric, n_resamples)
    tables["fig5"] = average_trajectories(trajectory_rows, max_steps)
    tables = dict(sorted(tables.items()))
    summary = {"conditions": {}, "baseline": baseline}
    spread = final_spread(metric_rows)
    for cond in _conditions(metric_rows):
        entry = {"reach1_final_spread_cm": spread[cond]}
        for name, (metric, _) in FIGURES.items():
            entry[metric] = [
                {k: r[k] for k in ("reach", metric, f"{metric}_lo", f"{metric}_hi")}
                for r in tables[name] if r["condition"] == cond
            ]
        entry["reach_rate"] = [
            float(np.mean([r["reached"] for r in metric_rows if r["condition"] == cond and r["reach"] == k]))
            for k in sorted({r["reach"] for r in metric_rows if r["condition"] == cond})
        ]
        errs = [r for r in tables["fig3"] if r["condition"] == cond]
        entry["model_error_by_step"] = [r["error"] for r in errs]
        summary["conditions"][cond] = entry
    return tables, summary
