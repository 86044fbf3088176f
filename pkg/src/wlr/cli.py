"""Command-line entry point: ``wlr simulate | fit | experiment | report | predict``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, svg
from .errors import DegenerateVariance, FullyCensored, SchemaError, SubjectMismatch, WLRError
from .geometry import DisplacementError, EyeModel, HeadRig, RenderSetup, vor_sweep
from .harness import ExperimentConfig, SimulatedObserver, run_experiment
from .predictor import PredictorConfig, check_uniform, predict_stream
from .scenarios import PRESETS, Scene, build_scenario
from .threshold import Limits, extract_contour, fit_gp, paired_t_test

log = logging.getLogger("wlr")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(
    scenario: str | None = "ar-near",
    scene_path=None,
    mode: str = "tracking",
    x_err: float = 0.0,
    z_err: float = 0.0,
    yaw_range: tuple[float, float] = (-20.0, 20.0),
    step: float = 1.0,
    ipd: float = 63.0,
    out=None,
    svg_path=None,
) -> dict:
    """Sweep a scene through a VOR head movement and write per-point errors."""
    if scene_path is not None:
        scene = Scene.load(scene_path)
        setup = RenderSetup(scene.display_distance_mm)
        name = str(scene_path)
    else:
        scene, setup = build_scenario(scenario)
        name = scenario
    err = DisplacementError(x_err, z_err, mode)
    result = vor_sweep(scene, err, setup, yaw_range, step, EyeModel(ipd_mm=ipd), HeadRig())

    if out is not None:
        io.write_csv(out, io.SWEEP_HEADER, result.rows())
    fix_id = scene.fixation_id
    summary = {
        "scenario": name,
        "mode": mode,
        "x_err_mm": x_err,
        "z_err_mm": z_err,
        "n_yaw_samples": len(result.samples),
        "fixation_point": fix_id,
        "points": {
            pid: {
                "visual_dir_p2p_arcmin": s.visual_dir_p2p_arcmin,
                "max_abs_disparity_err_arcmin": s.max_abs_disparity_err_arcmin,
                "min_abs_disparity_err_arcmin": s.min_abs_disparity_err_arcmin,
            }
            for pid, s in result.summary.items()
        },
    }
    if fix_id is not None:
        s = result.summary[fix_id]
        idx = [r.point_id for r in result.samples[0][1]].index(fix_id)
        summary["fixation"] = {
            "visual_dir_p2p_arcmin": s.visual_dir_p2p_arcmin,
            "max_abs_disparity_err_arcmin": s.max_abs_disparity_err_arcmin,
            "min_abs_disparity_err_arcmin": s.min_abs_disparity_err_arcmin,
            "disparity_err_at_endpoints_arcmin": {
                str(result.samples[0][0]): result.samples[0][1][idx].disparity_err_arcmin,
                str(result.samples[-1][0]): result.samples[-1][1][idx].disparity_err_arcmin,
            },
        }
    if svg_path is not None:
        ids = [pid for pid, _ in scene.points]
        vals = np.array([[r.visual_dir_err_arcmin for r in recs] for _, recs in result.samples]).T
        svg.heatmap(svg_path, vals, ids, [f"{y:g}" for y, _ in result.samples],
                    title="visual direction error (arcmin) vs head yaw")
    return summary


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _fit_groups(trials, limits: Limits, p_target: float, seed: int, svg_dir=None) -> list[dict]:
    groups: dict[tuple[str, str], list] = {}
    for t in trials:
        groups.setdefault((t.subject, t.condition), []).append(t)
    entries = []
    for (subject, condition) in sorted(groups):
        group = groups[(subject, condition)]
        model = fit_gp(group, limits, seed=seed)
        try:
            contour = extract_contour(model, p_target, limits=limits)
        except FullyCensored as exc:
            log.warning("%s/%s: fully censored contour", subject, condition)
            contour = exc.contour
        entries.append(io.contour_entry(
            contour, subject=subject, condition=condition,
            limits=[limits.lx, limits.lz], n_trials=len(group),
        ))
        if svg_dir is not None:
            Path(svg_dir).mkdir(parents=True, exist_ok=True)
            svg.contour_plot(Path(svg_dir) / f"{subject}_{condition}.svg", group, contour.vertices,
                             (limits.lx, limits.lz), title=f"{subject} {condition} p={p_target}")
    return entries


def cmd_fit(trials_csv, limits: Limits = Limits(), p_target: float = 0.75, seed: int = 0,
            out=None, svg_dir=None) -> dict:
    """Fit one threshold contour per (subject, condition) in a trials CSV."""
    trials = io.read_trials(trials_csv)
    payload = {"contours": _fit_groups(trials, limits, p_target, seed, svg_dir)}
    if out is not None:
        io.write_json(out, payload)
    return payload


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def cmd_experiment(observer: str, limits: Limits = Limits(), budget: int = 110, n_init: int = 25,
                   p_target: float = 0.75, seed: int = 0, out=None, contour_out=None) -> dict:
    """Run a seeded simulated experiment and write its trials and contour."""
    obs = SimulatedObserver.parse(observer, seed=seed)
    config = ExperimentConfig(limits=limits, n_init=n_init, budget=budget, p_target=p_target, seed=seed,
                              subject="sim", condition=observer.partition(":")[0])
    result = run_experiment(obs, config)
    if out is not None:
        io.write_trials(out, result.log.trials)
    payload = {"contours": [io.contour_entry(
        result.contour, subject=config.subject, condition=config.condition,
        limits=[limits.lx, limits.lz], n_trials=len(result.log), observer=observer, seed=seed,
        n_init=n_init,
    )]}
    if contour_out is not None:
        io.write_json(contour_out, payload)
    return payload


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _by_subject(entries, path) -> dict:
    out = {}
    for e in entries:
        if e["subject"] in out:
            raise SchemaError(f"{path}: subject {e['subject']!r} appears more than once")
        out[e["subject"]] = e
    return out


def _mean_sd(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()) if v.size else None,
            "sd": float(v.std(ddof=1)) if v.size > 1 else None}


def cmd_report(contours_a, contours_b, out=None) -> dict:
    """Compare threshold areas between two conditions with a paired t-test.

    Subjects whose contour is fully censored in either condition are listed
    under ``excluded`` and left out of the statistics.
    """
    a = _by_subject(io.read_contours(contours_a), contours_a)
    b = _by_subject(io.read_contours(contours_b), contours_b)
    if set(a) != set(b):
        raise SubjectMismatch(f"subjects differ: only in A {sorted(set(a) - set(b))}, "
                              f"only in B {sorted(set(b) - set(a))}")
    subjects = sorted(a)
    excluded = [s for s in subjects if a[s].get("fully_censored") or b[s].get("fully_censored")]
    kept = [s for s in subjects if s not in excluded]
    per_subject = {
        s: {"a": {"area_mm2": a[s]["area_mm2"], "centroid": a[s]["centroid"]},
            "b": {"area_mm2": b[s]["area_mm2"], "centroid": b[s]["centroid"]}}
        for s in subjects
    }
    report = {
        "condition_a": str(contours_a),
        "condition_b": str(contours_b),
        "subjects": per_subject,
        "excluded": excluded,
        "n": len(kept),
    }
    for key, src in (("a", a), ("b", b)):
        report[f"summary_{key}"] = {
            "area_mm2": _mean_sd([src[s]["area_mm2"] for s in kept]),
            "centroid_x_mm": _mean_sd([src[s]["centroid"][0] for s in kept]),
            "centroid_z_mm": _mean_sd([src[s]["centroid"][1] for s in kept]),
        }
    try:
        t = paired_t_test([a[s]["area_mm2"] for s in kept], [b[s]["area_mm2"] for s in kept])
        report["t_test"] = {"t": t.t, "df": t.df, "p": t.p}
    except DegenerateVariance as exc:
        report["t_test"] = {"error": "DegenerateVariance", "message": str(exc)}
    except ValueError as exc:
        report["t_test"] = {"error": "InsufficientSubjects", "message": str(exc)}
    if out is not None:
        io.write_json(out, report)
    return report


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def cmd_predict(encoder_csv, window: int = 51, horizon_ms: float = 26.0, out=None) -> list:
    """Forward-predict every encoder sample once the window has filled."""
    t, a = io.read_encoder(encoder_csv)
    dt = check_uniform(t)
    config = PredictorConfig(sample_rate_hz=1000.0 / dt, window_samples=window, horizon_ms=horizon_ms)
    pred = predict_stream(a, config)
    rows = []
    for ti, ai, pi in zip(t, a, pred):
        ok = not np.isnan(pi)
        rows.append([ti, ai, ti + horizon_ms if ok else None, float(pi) if ok else None])
    if out is not None:
        io.write_csv(out, io.PREDICTION_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _limits(text: str) -> Limits:
    lx, lz = _pair(text)
    try:
        return Limits(lx, lz)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--out", help="primary output file")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--limits", type=_limits, default=Limits(), metavar="LX,LZ",
                        help="search limits in mm (default 15,15)")
    shared.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wlr", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[shared], help="sweep render-camera errors over a VOR movement")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--scenario", choices=PRESETS, default="ar-near")
    src.add_argument("--scene", help="scene JSON file")
    s.add_argument("--mode", choices=("tracking", "fit"), default="tracking")
    s.add_argument("--x-err", type=float, default=0.0)
    s.add_argument("--z-err", type=float, default=0.0)
    s.add_argument("--yaw-range", type=_pair, default=(-20.0, 20.0), metavar="LO,HI")
    s.add_argument("--step", type=float, default=1.0)
    s.add_argument("--ipd", type=float, default=63.0)
    s.add_argument("--svg")
    s.add_argument("--summary", help="write the summary JSON here as well as stdout")

    f = sub.add_parser("fit", parents=[shared], help="fit threshold contours to a trials CSV")
    f.add_argument("trials")
    f.add_argument("--p-target", type=float, default=0.75)
    f.add_argument("--svg-dir")

    e = sub.add_parser("experiment", parents=[shared], help="run a simulated adaptive experiment")
    e.add_argument("--observer", required=True, help="e.g. circular:a=8,s=2,lapse=0")
    e.add_argument("--budget", type=int, default=110)
    e.add_argument("--n-init", type=int, default=25)
    e.add_argument("--p-target", type=float, default=0.75)
    e.add_argument("--contour", help="contour JSON output")

    r = sub.add_parser("report", parents=[shared], help="compare contour areas across two conditions")
    r.add_argument("contours_a")
    r.add_argument("contours_b")

    pr = sub.add_parser("predict", parents=[shared], help="forward-predict an encoder CSV")
    pr.add_argument("encoder")
    pr.add_argument("--window", type=int, default=51)
    pr.add_argument("--horizon-ms", type=float, default=26.0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            summary = cmd_simulate(
                scenario=None if args.scene else args.scenario, scene_path=args.scene, mode=args.mode,
                x_err=args.x_err, z_err=args.z_err, yaw_range=args.yaw_range, step=args.step,
                ipd=args.ipd, out=args.out, svg_path=args.svg,
            )
            if args.summary:
                io.write_json(args.summary, summary)
            print(json.dumps(summary, indent=2))
        elif args.command == "fit":
            payload = cmd_fit(args.trials, args.limits, args.p_target, args.seed, args.out, args.svg_dir)
            if args.out is None:
                print(json.dumps(payload, indent=2))
        elif args.command == "experiment":
            payload = cmd_experiment(args.observer, args.limits, args.budget, args.n_init, args.p_target,
                                     args.seed, args.out, args.contour)
            if args.contour is None:
                print(json.dumps(payload, indent=2))
        elif args.command == "report":
            report = cmd_report(args.contours_a, args.contours_b, args.out)
            if args.out is None:
                print(json.dumps(report, indent=2))
        elif args.command == "predict":
            rows = cmd_predict(args.encoder, args.window, args.horizon_ms, args.out)
            if args.out is None:
                for row in rows:
                    print(",".join(io.fmt(v) for v in row))
    except (WLRError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
