"""Command-line front end: ``squeezecam <subcommand> [flags]``.

Subcommands: analytic, simulate, estimate, sweep, precision, oracle-check.
Settings come from defaults, then an optional ``--config`` key-value file,
then command-line flags. Every JSON/CSV output embeds the resolved config.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import re
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import camera, estimator, fock
from . import state as st
from .errors import ConfigMismatchError, FrameFileError, InvalidParameterError

log = logging.getLogger("squeezecam")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_CHECK_FAILED = 4


@dataclass
class RunConfig:
    n_alpha: float = 1e6
    n_s: float = 1.0
    phi: list = field(default_factory=lambda: [0.0, math.pi / 2])
    rows: int = 32
    cols: int = 32
    weights: str = "uniform"
    frames: int = 10_000
    seed: int = 2021
    threads: int = 1
    out_dir: str = "."
    run_counts: list = field(default_factory=lambda: [4, 8, 16, 32, 64])
    frames_per_run: int = 1000
    groups: int = 32
    phase_points: int = 181
    tol: float = 1e-9

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        st.StateParams(self.n_alpha, self.n_s)
        if not self.phi:
            raise InvalidParameterError("at least one phase branch is required")
        for name in ("rows", "cols", "frames", "threads", "frames_per_run", "groups"):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.phase_points < 2:
            raise InvalidParameterError("phase_points must be >= 2")
        if not self.run_counts or min(self.run_counts) < 1:
            raise InvalidParameterError("run_counts must be positive integers")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must fit in an unsigned 64-bit integer")
        if not self.tol > 0:
            raise InvalidParameterError("tol must be positive")

    def state(self, phi: float) -> st.StateParams:
        return st.StateParams(self.n_alpha, self.n_s, phi)

    def geometry(self) -> camera.SensorGeometry:
        if self.weights == "uniform":
            return camera.SensorGeometry.uniform(self.rows, self.cols)
        w = np.loadtxt(self.weights, delimiter=None if not self.weights.endswith(".csv") else ",")
        w = np.asarray(w, dtype=float).ravel()
        return camera.SensorGeometry(self.rows, self.cols, w / math.fsum(w))


_PHASE_RE = re.compile(r"^\s*([-+]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$")


def parse_phase(text: str) -> float:
    """Parse ``0.3``, ``pi``, ``pi/2``, ``3pi/4`` or ``-0.5*pi``."""
    text = text.strip()
    m = _PHASE_RE.match(text)
    if m:
        coef = m.group(1)
        factor = float(coef) if coef not in ("", "+", "-") else (-1.0 if coef == "-" else 1.0)
        denom = float(m.group(2)) if m.group(2) else 1.0
        return factor * math.pi / denom
    try:
        return float(text)
    except ValueError:
        raise InvalidParameterError(f"cannot parse phase {text!r}") from None


def _split_list(text: str) -> list[str]:
    return [s for s in re.split(r"[,\s]+", text.strip()) if s]


def _coerce(name: str, raw: str):
    default = getattr(RunConfig(), name)
    try:
        if name == "phi":
            return [parse_phase(s) for s in _split_list(raw)]
        if name == "run_counts":
            return [int(s) for s in _split_list(raw)]
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise InvalidParameterError(f"bad value for {name}: {raw!r}") from None
    return raw


def load_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment, dashes in keys are allowed."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParameterError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise InvalidParameterError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for f in dataclasses.fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            values[f.name] = _coerce(f.name, raw) if isinstance(raw, str) else raw
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# -- output helpers --------------------------------------------------------


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _write_json(path: Path, payload: dict, cfg: RunConfig) -> None:
    payload = dict(payload, config=cfg.to_dict())
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list, rows, cfg: RunConfig) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config: {json.dumps(_clean(cfg.to_dict()), sort_keys=True)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)
                              for x in row) + "\n")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(_clean(cfg.to_dict()), indent=2,
                                                    sort_keys=True) + "\n")
    return out


def branch_tag(phi: float) -> str:
    if math.isclose(phi, 0.0, abs_tol=1e-12):
        return "squeezed"
    if math.isclose(phi, math.pi / 2, abs_tol=1e-12):
        return "antisqueezed"
    return f"phi{phi:.6f}"


def branch_seed(seed: int, phi: float) -> int:
    (bits,) = struct.unpack("<Q", struct.pack("<d", float(phi)))
    return camera.derive_seed(seed, bits)


# -- subcommands -----------------------------------------------------------


def cmd_analytic(cfg: RunConfig) -> dict:
    """Closed-form moments, ``q`` and sensitivities for every branch."""
    branches = {}
    for phi in cfg.phi:
        p = cfg.state(phi)
        entry = {
            "phi1": phi,
            "mean": st.mean_total(p),
            "variance": st.variance_total(p),
            "shot_noise_limit": st.shot_noise_limit(p),
            "q": st.q_coefficient(p) if st.mean_total(p) > 0 else None,
            "sub_shot_noise": st.variance_total(p) < st.shot_noise_limit(p),
            "homodyne_var_ns": st.homodyne_sensitivity(p.n_s),
        }
        if p.n_s > 0:
            rep = st.sensitivity_report(p)
            entry.update(camera_var_ns=rep.camera_var_ns, sensitivity_ratio=rep.ratio,
                         phase_branch=rep.phase_branch)
        branches[branch_tag(phi)] = entry
    report = {"n_alpha": cfg.n_alpha, "n_s": cfg.n_s, "branches": branches}
    sq = cfg.state(st.PHI_SQUEEZED)
    if st.mean_total(sq) > 0:
        report["q_s"] = st.q_coefficient(sq)
        report["q_as"] = st.q_coefficient(cfg.state(st.PHI_ANTISQUEEZED))
    return report


def cmd_simulate(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    g = cfg.geometry()
    files = {}
    if cfg.frames < 2:
        log.warning("only %d frame per batch: variances and fits will be impossible", cfg.frames)
    for phi in cfg.phi:
        seed = branch_seed(cfg.seed, phi)
        batch = camera.simulate_batch(cfg.state(phi), g, cfg.frames, seed, threads=cfg.threads)
        path = out / f"frames_{branch_tag(phi)}.sqzf"
        digest = camera.write_batch(batch, path)
        files[branch_tag(phi)] = {"path": str(path), "phi1": phi, "seed": seed,
                                  "checksum": digest, "n_frames": batch.n_frames}
        log.info("wrote %s (seed %d, checksum %s)", path, seed, digest)
    report = {"files": files}
    _write_json(out / "simulate.json", report, cfg)
    return report


def _pick_branches(batches):
    squeezed = [b for b in batches if math.isclose(math.cos(2 * b.params.phi1), 1.0, abs_tol=1e-9)]
    anti = [b for b in batches if math.isclose(math.cos(2 * b.params.phi1), -1.0, abs_tol=1e-9)]
    if len(squeezed) != 1 or len(anti) != 1:
        phases = [b.params.phi1 for b in batches]
        raise ConfigMismatchError(
            f"need one squeezed (phi1=0) and one anti-squeezed (phi1=pi/2) batch, got phases {phases}")
    return squeezed[0], anti[0]


def cmd_estimate(cfg: RunConfig, paths=None) -> dict:
    out = _out_dir(cfg)
    if not paths:
        paths = sorted(Path(cfg.out_dir).glob("frames_*.sqzf"))
    if not paths:
        raise InvalidParameterError(f"no frame files given or found in {cfg.out_dir}")
    batches = [camera.read_batch(p) for p in paths]
    first = batches[0]
    for b in batches[1:]:
        if (b.params.n_alpha, b.params.n_s) != (first.params.n_alpha, first.params.n_s):
            raise ConfigMismatchError("frame files were generated with different (n_alpha, n_s)")
        if b.geometry != first.geometry:
            raise ConfigMismatchError("frame files use different sensor geometries")

    fits = {}
    fit_objs = {}
    for path, b in zip(paths, batches):
        curve, fit = estimator.analyze_batch(b)
        tag = branch_tag(b.params.phi1)
        curve.to_csv(out / f"curve_{tag}.csv", header={"config": _clean(cfg.to_dict()),
                                                       "source": str(path)})
        theory = st.q_coefficient(b.params) if st.mean_total(b.params) > 0 else None
        fits[tag] = dict(fit.to_dict(), source=str(path), phi1=b.params.phi1, q_theory=theory,
                         z_vs_zero=fit.q / fit.se if fit.se > 0 else None)
        fit_objs[tag] = (b, fit)
    report = {"fits": fits}

    if len(batches) >= 2:
        sq, anti = _pick_branches(batches)
        fit_s = next(f for b, f in fit_objs.values() if b is sq)
        fit_as = next(f for b, f in fit_objs.values() if b is anti)
        n_total, n_total_se = estimator.mean_frame_total(sq, anti)
        est = estimator.estimate_squeezing(fit_s, fit_as, n_total, n_total_se)
        if not est.physical:
            log.warning("non-physical recovery: n_s = %g", est.n_s_hat)
        report["n_total"] = n_total
        report["estimate"] = est.to_dict()
    _write_json(out / "estimate.json", report, cfg)
    return report


def cmd_sweep(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    p = cfg.state(0.0)
    phases = np.linspace(0.0, math.pi, cfg.phase_points)
    rows = [(phi, var, snl, int(var < snl)) for phi, var, snl in st.phase_sweep(p, phases)]
    _write_csv(out / "sweep.csv", ["phi1", "variance", "snl", "sub_snl"], rows, cfg)
    variances = np.array([r[1] for r in rows])
    report = {
        "phi_min": float(phases[np.argmin(variances)]),
        "phi_max": float(phases[np.argmax(variances)]),
        "variance_min": float(variances.min()),
        "variance_max": float(variances.max()),
        "snl": st.shot_noise_limit(p),
        "crossing_analytic": st.crossing_phase(p),
        "crossing_bisection": st.crossing_phase_bisect(p),
    }
    _write_json(out / "sweep.json", report, cfg)
    return report


def cmd_precision(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    g = cfg.geometry()
    branches = {}
    for phi in cfg.phi:
        study = estimator.precision_study(cfg.state(phi), g, cfg.frames_per_run, cfg.run_counts,
                                          branch_seed(cfg.seed, phi), groups=cfg.groups,
                                          threads=cfg.threads)
        tag = branch_tag(phi)
        _write_csv(out / f"precision_{tag}.csv", ["runs", "sd_q", "n_groups"], study.rows(), cfg)
        branches[tag] = {"phi1": phi, "run_counts": study.run_counts, "sd_q": study.sd_q,
                         "n_groups": study.n_groups, "slope": study.slope,
                         "slope_se": study.slope_se, "mean_q": float(study.q_runs.mean())}
    report = {"branches": branches}
    if "squeezed" in branches and "antisqueezed" in branches:
        report["sd_ratio"] = float(np.mean(np.array(branches["antisqueezed"]["sd_q"])
                                           / np.array(branches["squeezed"]["sd_q"])))
    _write_json(out / "precision.json", report, cfg)
    return report


ORACLE_N_ALPHA = (0.5, 2.0, 4.0, 10.0)
ORACLE_N_S = (0.25, 1.0, 2.0)
ORACLE_PHASES = (0.0, math.pi / 4, math.pi / 2)
ORACLE_ETAS = (0.1, 0.25, 0.5, 0.9, 1.0)


def _rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def oracle_moment_errors(tail_tol: float = 1e-14) -> dict:
    """Largest relative gaps between oracle moments and the closed forms over the box."""
    worst = {"mean": 0.0, "variance": 0.0, "pixel_mean": 0.0, "pixel_variance": 0.0}
    for na in ORACLE_N_ALPHA:
        for ns in ORACLE_N_S:
            for phi in ORACLE_PHASES:
                p = st.StateParams(na, ns, phi)
                d = fock.dsv_distribution(p.beta, p.r, 0.0, tail_tol=tail_tol)
                m = fock.moments(d)
                worst["mean"] = max(worst["mean"], _rel(m.mean, st.mean_total(p)))
                worst["variance"] = max(worst["variance"], _rel(m.variance, st.variance_total(p)))
                for eta in ORACLE_ETAS:
                    ml = fock.moments(fock.apply_loss(d, eta))
                    worst["pixel_mean"] = max(worst["pixel_mean"],
                                              _rel(ml.mean, st.pixel_mean(p, eta)))
                    worst["pixel_variance"] = max(worst["pixel_variance"],
                                                  _rel(ml.variance, st.pixel_variance(p, eta)))
    return worst


def loss_composition_error(eta1: float = 0.6, eta2: float = 0.35) -> float:
    d = fock.dsv_distribution(2.0, math.asinh(1.0), 0.4)
    twice = fock.apply_loss(fock.apply_loss(d, eta1), eta2)
    once = fock.apply_loss(d, eta1 * eta2)
    return float(np.max(np.abs(twice.probs - once.probs)))


def beam_splitter_gaps(alpha: complex = 10.0, r: float = math.asinh(1.0),
                       thetas=(0.2, 0.1, 0.05)) -> list[dict]:
    """Moment gaps between the exact two-mode result and the single-mode approximation."""
    rows = []
    for theta in thetas:
        exact = fock.moments(fock.exact_mix_and_trace(alpha, r, theta))
        approx = fock.moments(fock.approximate_mixed_state(alpha, r, theta))
        rows.append({"theta": theta, "mean_gap": abs(exact.mean - approx.mean),
                     "variance_gap": abs(exact.variance - approx.variance),
                     "exact_mean": exact.mean, "approx_mean": approx.mean,
                     "exact_variance": exact.variance, "approx_variance": approx.variance})
    return rows


def cmd_oracle_check(cfg: RunConfig) -> dict:
    checks = {}
    worst = oracle_moment_errors()
    for key, err in worst.items():
        checks[f"moments_{key}"] = {"error": err, "tolerance": cfg.tol, "passed": err <= cfg.tol}
    comp = loss_composition_error()
    checks["loss_composition"] = {"error": comp, "tolerance": 1e-12, "passed": comp <= 1e-12}
    gaps = beam_splitter_gaps()
    ratios = [a["mean_gap"] / b["mean_gap"] for a, b in zip(gaps, gaps[1:])]
    checks["beam_splitter_theta2"] = {"gaps": gaps, "ratios": ratios, "target": 4.0,
                                      "passed": all(abs(x / 4.0 - 1) <= 0.2 for x in ratios)}
    report = {"checks": checks, "passed": all(c["passed"] for c in checks.values())}
    out = _out_dir(cfg)
    _write_json(out / "oracle_check.json", report, cfg)
    return report


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--n-alpha", dest="n_alpha", type=float)
    common.add_argument("--n-s", dest="n_s", type=float)
    common.add_argument("--phi", help="phase branch(es), e.g. '0,pi/2'")
    common.add_argument("--rows", type=int)
    common.add_argument("--cols", type=int)
    common.add_argument("--weights", help="'uniform' or a text file of pixel weights")
    common.add_argument("--frames", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--run-counts", dest="run_counts", help="e.g. '4,8,16,32,64'")
    common.add_argument("--frames-per-run", dest="frames_per_run", type=int)
    common.add_argument("--groups", type=int)
    common.add_argument("--phase-points", dest="phase_points", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="squeezecam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analytic", parents=[common], help="closed-form moments and sensitivities")
    sub.add_parser("simulate", parents=[common], help="write Monte Carlo frame files")
    est = sub.add_parser("estimate", parents=[common], help="fit q and recover n_s, n_alpha")
    est.add_argument("files", nargs="*", help="frame files (default: frames_*.sqzf in --out-dir)")
    sub.add_parser("sweep", parents=[common], help="variance against phase")
    sub.add_parser("precision", parents=[common], help="spread of q against number of runs")
    sub.add_parser("oracle-check", parents=[common], help="closed forms against the Fock oracle")
    return parser


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "precision": cmd_precision,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "estimate":
            report = cmd_estimate(cfg, args.files)
        else:
            report = COMMANDS[args.command](cfg)
            if args.command == "analytic":
                _write_json(_out_dir(cfg) / "analytic.json", report, cfg)
    except (InvalidParameterError, ConfigMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FrameFileError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(_clean(report), indent=2, sort_keys=True))
    if args.command == "oracle-check" and not report["passed"]:
        return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
