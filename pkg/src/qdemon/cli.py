"""Command-line entry point.

    qdemon run --experiment 3 --mode analytic --observer inside --out results/
    qdemon run --config run.json --seed 7
    qdemon run --noise-budget
    qdemon analyze results/tomography.json --statistic entropy

A config file is one JSON object with the fields of :class:`RunConfig`;
command-line flags override it.  ``QDEMON_OUT`` sets the default output
directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from . import __version__
from .experiments import BASES, OBSERVERS, ExperimentError, run_experiment
from .noise import NoiseParams, exp3_noise_budget
from .tomography import Calibration, TomographyDataset, TomographyError, monte_carlo_ci, point_statistic

EXIT_CONFIG = 2
EXIT_IO = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: int = 1
    mode: str = "analytic"
    observer: str = "inside"
    basis: str = "off-diagonal"
    noise: Optional[dict] = None
    calibration: Optional[dict] = None
    n_resamples: Optional[int] = None
    master_seed: int = 0
    polarize: bool = False
    out_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.experiment not in (1, 2, 3):
            raise ConfigError(f"experiment must be 1, 2 or 3, got {self.experiment!r}")
        if self.mode not in ("analytic", "sampled"):
            raise ConfigError(f"mode must be 'analytic' or 'sampled', got {self.mode!r}")
        if self.observer not in OBSERVERS:
            raise ConfigError(f"observer must be one of {OBSERVERS}, got {self.observer!r}")
        if self.basis not in BASES:
            raise ConfigError(f"basis must be one of {BASES}, got {self.basis!r}")
        if self.n_resamples is not None and (not isinstance(self.n_resamples, int) or self.n_resamples < 100):
            raise ConfigError("n_resamples must be an integer >= 100")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer")
        self.noise_params()
        self.calibration_obj()

    def noise_params(self) -> Optional[NoiseParams]:
        if self.noise is None:
            return None
        try:
            return NoiseParams(**self.noise)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid noise block: {exc}") from exc

    def calibration_obj(self) -> Calibration:
        try:
            return Calibration(**(self.calibration or {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid calibration block: {exc}") from exc

    def canonical(self) -> dict:
        """Config as stored in the report; ``out_dir`` is not part of the run's identity."""
        d = asdict(self)
        d.pop("out_dir")
        return d


def config_hash(cfg: RunConfig) -> str:
    text = json.dumps(cfg.canonical(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def execute(cfg: RunConfig) -> dict:
    kw = dict(noise=cfg.noise_params(), mode=cfg.mode, seed=cfg.master_seed,
              calibration=cfg.calibration_obj(), n_resamples=cfg.n_resamples, polarize=cfg.polarize)
    if cfg.experiment == 2:
        kw["basis"] = cfg.basis
    if cfg.experiment == 3:
        kw["observer"] = cfg.observer
    report = run_experiment(cfg.experiment, **kw)
    doc = {
        "reproducibility": {
            "config": cfg.canonical(),
            "config_hash": config_hash(cfg),
            "seed": cfg.master_seed,
            "version": __version__,
        },
        "report": report.to_dict(),
    }
    return {"json": doc, "csv": report.to_csv(),
            "datasets": {k: ds.to_dict() for k, ds in report.datasets.items()}}


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def _build_config(args) -> RunConfig:
    doc: dict = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    overrides = {
        "experiment": args.experiment, "mode": args.mode, "observer": args.observer,
        "basis": args.basis, "master_seed": args.seed, "n_resamples": args.n_resamples,
        "out_dir": args.out,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.noise and doc.get("noise") is None:
        doc["noise"] = {}
    return RunConfig.from_dict(doc)


def cmd_run(args) -> int:
    if args.noise_budget:
        b = exp3_noise_budget(NoiseParams(), S_initial=args.initial_entropy)
        print(f"L = {b.L_remaining:.3f}")
        print(f"S = {b.S_final:.2f}")
        print(f"dS = {b.delta_S:.2f}")
        return 0
    try:
        cfg = _build_config(args)
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    try:
        out = execute(cfg)
    except (ExperimentError, TomographyError, ValueError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    out_dir = Path(cfg.out_dir or os.environ.get("QDEMON_OUT", "."))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(_dump(out["json"]))
        (out_dir / "report.csv").write_text(out["csv"])
        if out["datasets"]:
            (out_dir / "tomography.json").write_text(_dump(out["datasets"]))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    if not args.quiet:
        sys.stdout.write(out["csv"])
    return 0


def cmd_analyze(args) -> int:
    try:
        doc = json.loads(Path(args.dataset).read_text())
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except json.JSONDecodeError as exc:
        return _fail(EXIT_CONFIG, "config", f"dataset is not valid JSON: {exc}")
    # either a single dataset or a mapping of name -> dataset
    items = {"dataset": doc} if "settings" in doc else doc
    rows = {}
    try:
        for name, d in sorted(items.items()):
            ds = TomographyDataset.from_dict(d)
            if args.n_resamples:
                ci = monte_carlo_ci(ds, args.statistic, args.n_resamples, args.seed)
                rows[name] = ci.to_dict()
            else:
                rows[name] = {"point": point_statistic(ds, args.statistic)}
    except (TomographyError, ValueError) as exc:
        return _fail(EXIT_CONFIG, "dataset", str(exc))
    sys.stdout.write(_dump(rows))
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdemon", description="Quantum Maxwell's demon simulations")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one experiment and write report.json / report.csv")
    run.add_argument("--experiment", type=int, choices=(1, 2, 3))
    run.add_argument("--mode", choices=("analytic", "sampled"))
    run.add_argument("--observer", choices=OBSERVERS)
    run.add_argument("--basis", choices=BASES)
    run.add_argument("--seed", type=int)
    run.add_argument("--config")
    run.add_argument("--out")
    run.add_argument("--noise", action="store_true", help="enable dephasing with default parameters")
    run.add_argument("--n-resamples", type=int, dest="n_resamples")
    run.add_argument("--noise-budget", action="store_true", help="print the closed-form noise budget and exit")
    run.add_argument("--initial-entropy", type=float, default=0.90)
    run.add_argument("--quiet", action="store_true")
    run.set_defaults(func=cmd_run)

    an = sub.add_parser("analyze", help="reconstruct states from a tomography JSON file")
    an.add_argument("dataset")
    an.add_argument("--statistic", choices=("entropy", "L"), default="entropy")
    an.add_argument("--n-resamples", type=int, dest="n_resamples")
    an.add_argument("--seed", type=int, default=0)
    an.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
