"""
Command-line front end.

``relay-ia verify`` checks the rank structure of one or more trials;
``relay-ia sweep`` estimates the DoF over an SNR grid and writes the
per-SNR table, a summary and a plot-data file.

Exit codes: 0 success, 1 alignment failure, 2 configuration error,
3 too few relays (the required count is printed).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .channel import NetworkTopology
from .errors import RESAMPLE_ERRORS, InfeasibleRelayCount, TooManySkipped
from .evaluation import Scheme, estimate_dof, run_trial, scheme_reference

log = logging.getLogger("relay_ia")

EXIT_OK = 0
EXIT_ALIGNMENT = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

SWEEP_COLUMNS = [
    "row_type", "scheme", "M", "N", "K", "J", "L", "snr_db",
    "mean_sum_rate_bits", "trials_used", "skipped",
    "slope", "fit_residual", "reference_dof",
]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scheme: str = Scheme.X_THEOREM1.value
    M: Optional[int] = None
    N: Optional[int] = None
    K: Optional[int] = None
    J: int = 1
    L: int = 1
    seed: int = 0
    trials: Optional[int] = None
    snr_start_db: float = 40.0
    snr_stop_db: float = 80.0
    snr_step_db: float = 10.0
    time_varying: bool = True
    joint_beamforming: bool = True
    null_space_mode: bool = False
    output_path: Optional[str] = None
    format: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        try:
            scheme = Scheme(self.scheme)
        except ValueError:
            raise ConfigError(f"unknown scheme {self.scheme!r}") from None
        if scheme == Scheme.IC_THEOREM3:
            if self.K is None:
                raise ConfigError("ic-theorem3 needs K")
            if self.M is not None or self.N is not None:
                raise ConfigError("M and N are not used by ic-theorem3")
        else:
            if self.M is None or self.N is None:
                raise ConfigError(f"{scheme.value} needs M and N")
            if self.K is not None:
                raise ConfigError(f"K is not used by {scheme.value}")
        if self.snr_stop_db < self.snr_start_db:
            raise ConfigError("snr_stop_db must not be below snr_start_db")
        if not self.snr_step_db > 0:
            raise ConfigError("snr_step_db must be positive")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.format not in (None, "csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        self.topology()
        return self

    def topology(self) -> NetworkTopology:
        try:
            if Scheme(self.scheme) == Scheme.IC_THEOREM3:
                return NetworkTopology.interference(self.K, self.J, self.L)
            return NetworkTopology.x_channel(self.M, self.N, self.J, self.L)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def snr_grid(self) -> list:
        n = int(np.floor((self.snr_stop_db - self.snr_start_db) / self.snr_step_db + 1e-9))
        return [self.snr_start_db + i * self.snr_step_db for i in range(n + 1)]

    def output_format(self) -> str:
        if self.format:
            return self.format
        if self.output_path and self.output_path.endswith(".csv"):
            return "csv"
        return "json"


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT_FIELDS = {"M", "N", "K", "J", "L", "seed", "trials"}
_FLOAT_FIELDS = {"snr_start_db", "snr_stop_db", "snr_step_db"}
_BOOL_FIELDS = {"time_varying", "joint_beamforming", "null_space_mode"}


def _coerce(key, value):
    if value is None:
        return None
    if key in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if key in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string")
    return value


def config_from_mapping(data: dict) -> ExperimentConfig:
    unknown = set(data) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in data.items()})


def parse_config(text: str) -> ExperimentConfig:
    """Parse a flat JSON object whose keys are the config field names."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_mapping(data)


def serialize_config(cfg: ExperimentConfig) -> str:
    return json.dumps(dataclasses.asdict(cfg), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

# flag dest -> config field
_FLAG_FIELDS = {
    "scheme": "scheme", "m": "M", "n": "N", "k": "K", "relays": "J",
    "antennas": "L", "seed": "seed", "trials": "trials",
    "snr_start": "snr_start_db", "snr_stop": "snr_stop_db", "snr_step": "snr_step_db",
    "time_varying": "time_varying", "joint_beamforming": "joint_beamforming",
    "null_space_mode": "null_space_mode", "out": "output_path", "format": "format",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat JSON config; flags override its values")
    common.add_argument("--scheme", choices=[s.value for s in Scheme])
    common.add_argument("--m", type=int, help="transmitters (X channel)")
    common.add_argument("--n", type=int, help="receivers (X channel)")
    common.add_argument("--k", type=int, help="user pairs (interference channel)")
    common.add_argument("--relays", type=int, help="number of relays J")
    common.add_argument("--antennas", type=int, help="antennas per relay L")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--snr-start", type=float)
    common.add_argument("--snr-stop", type=float)
    common.add_argument("--snr-step", type=float)
    common.add_argument("--no-time-varying", dest="time_varying",
                        action="store_const", const=False)
    common.add_argument("--no-joint-beamforming", dest="joint_beamforming",
                        action="store_const", const=False)
    common.add_argument("--null-space-mode", dest="null_space_mode",
                        action="store_const", const=True,
                        help="IC only: relay matrices from the null space (needs J L^2 > K(K-2))")
    common.add_argument("--out", help="output file (written atomically)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="relay-ia", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="rank-check the alignment of one or more trials")
    sub.add_parser("sweep", parents=[common], help="estimate the DoF over an SNR grid")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        data = dataclasses.asdict(parse_config(text))
        data = {k: v for k, v in data.items() if k in _FIELDS}
    for dest, name in _FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            data[name] = value
    return config_from_mapping(data).validate()


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def write_atomic(path: str, text: str):
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _plot_path(path: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + ".plot.csv"))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def run_verify(cfg: ExperimentConfig) -> int:
    topology = cfg.topology()
    trials = cfg.trials or 1
    results = []
    all_passed = True
    for t in range(trials):
        try:
            res = run_trial(
                topology, cfg.scheme, cfg.seed, t,
                time_varying=cfg.time_varying,
                joint_beamforming=cfg.joint_beamforming,
                null_space_mode=cfg.null_space_mode,
            )
        except RESAMPLE_ERRORS as exc:
            all_passed = False
            results.append({"trial": t, "error": str(exc)})
            print(f"trial {t}: resampling budget exhausted ({exc})")
            continue
        all_passed &= res.report.passed
        results.append({"trial": t, "resamples": res.resamples, "report": res.report.to_dict()})
        for r in res.report.receivers:
            print(
                f"trial {t} receiver {r.receiver}: interference_rank={r.interference_rank} "
                f"desired_rank={r.desired_rank} total_rank={r.total_rank} "
                f"{'pass' if r.passed else 'FAIL'}"
            )

    if cfg.output_path:
        if cfg.output_format() == "csv":
            header = ["trial", "receiver", "interference_rank", "desired_rank",
                      "total_rank", "smallest_retained", "largest_discarded", "pass"]
            rows = []
            for item in results:
                for r in item.get("report", {}).get("receivers", []):
                    rows.append([item["trial"], r["receiver"], r["interference_rank"],
                                 r["desired_rank"], r["total_rank"],
                                 _cell(r["smallest_retained"]), _cell(r["largest_discarded"]),
                                 r["passed"]])
            text = _csv_text(header, rows)
        else:
            doc = {"config": dataclasses.asdict(cfg), "pass": all_passed, "trials": results}
            text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        write_atomic(cfg.output_path, text)
    print("PASS" if all_passed else "FAIL")
    return EXIT_OK if all_passed else EXIT_ALIGNMENT


def run_sweep(cfg: ExperimentConfig) -> int:
    topology = cfg.topology()
    est = estimate_dof(
        topology, cfg.scheme, cfg.snr_grid(), cfg.trials or 50, cfg.seed,
        time_varying=cfg.time_varying,
        joint_beamforming=cfg.joint_beamforming,
        null_space_mode=cfg.null_space_mode,
    )
    reference = float(scheme_reference(topology))
    print(f"slope={est.slope_per_log2P:.4f} fit_residual={est.fit_residual:.3g} "
          f"reference_dof={reference:.4f} trials_used={est.trials_used}/{est.trials}")
    if not cfg.output_path:
        return EXIT_OK

    ids = [cfg.scheme, cfg.M, cfg.N, cfg.K, cfg.J, cfg.L]
    if cfg.output_format() == "csv":
        rows = [
            ["point", *ids, _cell(snr), _cell(rate), est.trials_used, est.skipped, "", "", ""]
            for snr, rate in zip(est.snr_points_db, est.sum_rates_bits)
        ]
        rows.append(["summary", *ids, "", "", est.trials_used, est.skipped,
                     _cell(est.slope_per_log2P), _cell(est.fit_residual), _cell(reference)])
        text = _csv_text(SWEEP_COLUMNS, [[_cell(c) for c in row] for row in rows])
    else:
        doc = {
            "config": dataclasses.asdict(cfg),
            "points": [
                {"snr_db": s, "mean_sum_rate_bits": r,
                 "trials_used": est.trials_used, "skipped": est.skipped}
                for s, r in zip(est.snr_points_db, est.sum_rates_bits)
            ],
            "summary": {
                "slope": est.slope_per_log2P,
                "fit_residual": est.fit_residual,
                "reference_dof": reference,
                "trials": est.trials,
                "trials_used": est.trials_used,
                "skipped": est.skipped,
                "resamples": est.resamples,
                "skip_reasons": est.skip_reasons,
            },
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"

    log2p = [s / (10.0 * np.log10(2.0)) for s in est.snr_points_db]
    intercept = float(np.mean(est.sum_rates_bits) - est.slope_per_log2P * np.mean(log2p))
    plot_rows = [
        [_cell(s), _cell(float(x)), _cell(r), _cell(float(intercept + est.slope_per_log2P * x))]
        for s, x, r in zip(est.snr_points_db, log2p, est.sum_rates_bits)
    ]
    plot_text = _csv_text(["snr_db", "log2_power", "mean_sum_rate_bits", "fitted_rate_bits"],
                          plot_rows)
    write_atomic(_plot_path(cfg.output_path), plot_text)
    write_atomic(cfg.output_path, text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "verify":
            return run_verify(cfg)
        return run_sweep(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleRelayCount as exc:
        print(f"infeasible relay count: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TooManySkipped as exc:
        print(f"alignment failed: {exc}", file=sys.stderr)
        return EXIT_ALIGNMENT
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
