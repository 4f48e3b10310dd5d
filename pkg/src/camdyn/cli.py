"""Command-line front end.

Exit codes: 0 ok, 2 invalid input, 3 numerical failure (including failed
checks), 4 projection solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .body import build_body, load_body_config
from .checks import run_checks
from .errors import CamdynError, NumericError, ValidationError
from .eval.contacts import CONTACT_HEIGHT, GroundPlane, annotate_contacts
from .eval.metrics import (
    accel_error,
    foot_sliding,
    g_mpjpe,
    ground_penetration,
    mpjpe,
    pa_mpjpe,
    pve_joints,
    world_joint_positions,
)
from .forces import pct_mean_weight, pct_sample
from .io import MotionFile, motion_to_text, read_motion, read_properties, write_diagnostics
from .simulate import INTEGRATORS, TRAJECTORY_MASSES, SimConfig, simulate_sequence

def _body(args, beta=None):
    return build_body(beta, load_body_config(args.body_config))


def _simulate_one(job):
    """Simulate one (motion, properties) pair; returns output texts without writing."""
    args, motion_path, prop_path = job
    motion = read_motion(motion_path)
    props = read_properties(prop_path)
    if len(props) != len(motion):
        raise ValidationError(f"{prop_path} has {len(props)} frames but {motion_path} has {len(motion)}")
    body = _body(args, props.beta)
    config = SimConfig(
        dt=args.dt if args.dt is not None else 1.0 / motion.frame_rate,
        epsilon=args.epsilon, integrator=args.integrator, trajectory_mass=args.trajectory_mass,
        coriolis_compensation=not args.no_coriolis_compensation,
        world_gravity=tuple(args.world_gravity))
    rng = np.random.default_rng(args.seed)
    q, traj, diag = simulate_sequence(body, motion.q[0], props.forces, props.controls, motion.q,
                                      config, rng)
    out = MotionFile(frame_rate=1.0 / config.dt, q=q, q_trans=traj)
    return motion_to_text(out), diag, config.dt


def cmd_simulate(args):
    n = len(args.motion)
    if len(args.properties) != n or len(args.out) != n:
        raise ValidationError("--motion, --properties and --out need the same number of files")
    if args.diagnostics and len(args.diagnostics) != n:
        raise ValidationError("--diagnostics needs one file per motion")
    jobs = [(args, m, p) for m, p in zip(args.motion, args.properties)]
    if args.jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_one, jobs))
    else:
        results = [_simulate_one(job) for job in jobs]
    # Nothing is written until every sequence has succeeded.
    for k, (text, diag, dt) in enumerate(results):
        Path(args.out[k]).write_text(text)
        if args.diagnostics:
            write_diagnostics(args.diagnostics[k], diag, dt)
        print(f"{args.motion[k]}: {len(diag) + 1} frames -> {args.out[k]}")
    return 0


def cmd_check(args):
    if args.trials < 0:
        raise ValidationError("--trials must be non-negative")
    results = run_checks(_body(args), args.seed, args.trials)
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:28s} max_error={r.max_error:.3e} tol={r.tolerance:.1e} {status}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise NumericError(f"checks failed: {', '.join(failed)}")
    return 0


def _world_joints(motion: MotionFile, body):
    if motion.joints_world is not None:
        return motion.joints_world
    return world_joint_positions(body, motion.q, motion.q_trans)


def _index_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_metrics(args):
    pred, gt = read_motion(args.pred), read_motion(args.gt)
    if len(pred) != len(gt):
        raise ValidationError(f"prediction has {len(pred)} frames, ground truth {len(gt)}")
    body = _body(args)
    Xp, Xg = _world_joints(pred, body), _world_joints(gt, body)
    if Xp.shape != Xg.shape:
        raise ValidationError(f"joint arrays differ: {Xp.shape} vs {Xg.shape}")
    from_fk = pred.joints_world is None and gt.joints_world is None
    feet = _index_list(args.foot_joints) if args.foot_joints else (
        list(body.contact_joints) if from_fk else [])
    joints = _index_list(args.joints) if args.joints else (
        list(range(body.n_nodes - len(body.contact_joints))) if from_fk else list(range(Xp.shape[1])))
    dt = 1.0 / gt.frame_rate
    Xp_j, Xg_j = Xp[:, joints], Xg[:, joints]
    report = {
        "frames": len(gt),
        "mpjpe": mpjpe(Xp_j, Xg_j, root_align=args.root_align),
        "pve_joints": pve_joints(Xp_j, Xg_j, root_align=args.root_align),
        "pa_mpjpe": pa_mpjpe(Xp_j, Xg_j),
        "accel_error": accel_error(Xp_j, Xg_j, dt) if len(gt) >= 3 else None,
        "g_mpjpe": g_mpjpe(Xp_j, Xg_j, args.window_s, dt),
        "foot_sliding": None,
        "ground_penetration": None,
    }
    if gt.ground_plane is not None:
        plane = GroundPlane(np.asarray(gt.ground_plane["normal"]), gt.ground_plane["offset"])
    elif feet and len(gt) >= 3:
        toes = [f for f in feet if f in body.toe_joints] if from_fk else feet
        plane, _ = annotate_contacts(Xg, toes or feet, feet)
    else:
        plane = None
    if plane is not None:
        report["ground_penetration"] = ground_penetration(Xp_j, plane)
        if feet:
            labels = pred.contacts if pred.contacts is not None else (
                gt.contacts if gt.contacts is not None else plane.height(Xp[:, feet]) < CONTACT_HEIGHT)
            report["foot_sliding"] = foot_sliding(Xp[:, feet], labels, plane)
    text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_annotate_contacts(args):
    motion = read_motion(args.motion)
    body = _body(args)
    X = _world_joints(motion, body)
    if motion.joints_world is None:
        toes, contacts = list(body.toe_joints), list(body.contact_joints)
    else:
        if not args.toe_joints or not args.contact_joints:
            raise ValidationError("--toe-joints and --contact-joints are required with joints_world input")
        toes, contacts = _index_list(args.toe_joints), _index_list(args.contact_joints)
    plane, labels = annotate_contacts(X, toes, contacts, args.threshold)
    out = MotionFile(frame_rate=motion.frame_rate, q=motion.q, q_trans=motion.q_trans,
                     contacts=labels, joints_world=motion.joints_world,
                     ground_plane=plane.to_record())
    Path(args.out).write_text(motion_to_text(out))
    print(f"plane normal={np.round(plane.normal, 6).tolist()} offset={plane.offset:.6f}; "
          f"{int(labels.sum())} contact labels over {len(motion)} frames")
    return 0


def cmd_sample_contacts(args):
    p = np.asarray(args.p, dtype=float)
    if args.draws <= 0:
        raise ValidationError("--draws must be positive")
    rng = np.random.default_rng(args.seed)
    s = pct_sample(np.broadcast_to(p, (args.draws,) + p.shape), rng)
    report = {"p": p.tolist(), "draws": args.draws, "seed": args.seed,
              "hard_frequency": s.b_hard.mean(axis=0).tolist(),
              "soft_mean": s.b_soft.mean(axis=0).tolist(),
              "soft_mean_exact": pct_mean_weight(p).tolist()}
    sys.stdout.write(json.dumps(report, indent=2) + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="camdyn", description=__doc__.splitlines()[0])
    parser.add_argument("--body-config", help="body JSON (default: packaged template)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the dynamics pipeline over motion sequences")
    sim.add_argument("--motion", nargs="+", required=True)
    sim.add_argument("--properties", nargs="+", required=True)
    sim.add_argument("--out", nargs="+", required=True)
    sim.add_argument("--diagnostics", nargs="+")
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--dt", type=float, help="time step in seconds (default: 1 / frame_rate)")
    sim.add_argument("--epsilon", type=float, default=0.01)
    sim.add_argument("--integrator", choices=INTEGRATORS, default="semi-implicit")
    sim.add_argument("--trajectory-mass", choices=TRAJECTORY_MASSES, default="total")
    sim.add_argument("--world-gravity", type=float, nargs=3, default=(0.0, -9.81, 0.0),
                     metavar=("X", "Y", "Z"), help="used for frames whose gravity is null")
    sim.add_argument("--no-coriolis-compensation", action="store_true",
                     help="leave h_c out of the PD torque")
    sim.add_argument("--jobs", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    chk = sub.add_parser("check", help="finite-difference checks of the dynamics kernels")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--trials", type=int, default=20)
    chk.set_defaults(func=cmd_check)

    met = sub.add_parser("metrics", help="pose and plausibility metrics of a prediction")
    met.add_argument("pred")
    met.add_argument("gt")
    met.add_argument("--out")
    met.add_argument("--root-align", action="store_true")
    met.add_argument("--window-s", type=float, default=10.0)
    met.add_argument("--joints", help="comma-separated joint subset")
    met.add_argument("--foot-joints", help="comma-separated foot joints for FS/GP plane fitting")
    met.set_defaults(func=cmd_metrics)

    ann = sub.add_parser("annotate-contacts", help="fit the ground plane and label contacts")
    ann.add_argument("motion")
    ann.add_argument("--out", required=True)
    ann.add_argument("--threshold", type=float, default=CONTACT_HEIGHT)
    ann.add_argument("--toe-joints")
    ann.add_argument("--contact-joints")
    ann.set_defaults(func=cmd_annotate_contacts)

    smp = sub.add_parser("sample-contacts", help="statistics of sampled soft contact states")
    smp.add_argument("--p", type=float, nargs="+", required=True)
    smp.add_argument("--draws", type=int, default=100000)
    smp.add_argument("--seed", type=int, required=True)
    smp.set_defaults(func=cmd_sample_contacts)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CamdynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
