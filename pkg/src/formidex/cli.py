"""Command-line front end: ``formidex {fi,strength,step,validate}``.

Tables go to CSV (default) or JSON. Exit codes: 0 success, 2 configuration
error, 3 numerical failure; diagnostics are written to standard error.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .converters import ConverterSpec
from .errors import ConfigError, FormidexError, NumericalError
from .forming_index import classify, forming_index_sweep
from .network import (
    _blocks_of,
    _read_json,
    absorb_device,
    bundled_case_path,
    check_schema,
    load_case,
    load_device,
)
from .strength import strength_sweep
from .tfcore import LineParams, make_freq_grid
from .time_response import A_DAMP, N_SAMPLES, T_END, DisturbanceSpec, step_response

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SPOT_FREQS_HZ = (0.5, 5.0, 50.0)


# -- output --------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    return format(x, ".9g")


def render_csv(columns: dict, comments=(), footer=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    names = list(columns)
    buf.write(",".join(names) + "\n")
    arrays = [np.asarray(columns[n]) for n in names]
    for row in zip(*arrays):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    for line in footer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def _jsonable(x):
    x = float(x)
    return None if np.isnan(x) else x


def render_json(columns: dict, config: dict, comments=(), footer=()) -> str:
    doc = {
        "config": config,
        "columns": {k: [_jsonable(v) for v in np.asarray(col)] for k, col in columns.items()},
        "comments": list(comments) + list(footer),
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def write_atomic(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent if str(target.parent) else ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, columns, comments=(), footer=()):
    if args.format == "json":
        text = render_json(columns, _config_echo(args), comments, footer)
    else:
        text = render_csv(columns, comments, footer)
    write_atomic(text, args.output)


def _config_echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output", "format")}


# -- inputs --------------------------------------------------------------------


def _resolve_case_path(name: str) -> Path:
    path = Path(name)
    if not path.exists() and path.suffix == "" and bundled_case_path(name).exists():
        return bundled_case_path(name)
    return path


def _bus_id(case, text):
    for b in case.kept:
        if str(b) == str(text):
            return b
    raise ConfigError(f"bus {text} has no device in the case")


def _apply_overrides(case, overrides):
    for item in overrides or ():
        parts = item.split(":", 2)
        if len(parts) < 2:
            raise ConfigError(f"--set expects BUS:STRATEGY[:PARAMS_JSON], got {item!r}")
        bus = _bus_id(case, parts[0])
        params = _read_json(parts[2], "params") if len(parts) == 3 else {}
        if not isinstance(params, dict):
            raise ConfigError(f"--set {item!r}: params must be a JSON object")
        dev = case.extra if case.extra is not None and bus == case.extra.bus else case.devices[case.retained.index(bus)]
        spec = ConverterSpec(parts[1], params, dev.spec.filter, dev.spec.op, case.omega0)
        case = case.with_device(bus, spec, dev.rating)
    return case


def _case(args):
    case = load_case(_resolve_case_path(args.case))
    return _apply_overrides(case, getattr(args, "set", None))


def _grid(args):
    return make_freq_grid(args.fmin, args.fmax, args.n_points)


# -- commands ------------------------------------------------------------------


def cmd_fi(args) -> int:
    if (args.device is None) == (args.case is None):
        raise ConfigError("give exactly one of --device or --case")
    if args.device is not None:
        omega0 = args.omega0
        device = load_device(args.device, omega0)
        lg = 0.3 if args.lg is None else args.lg
        tau = 0.1 if args.tau is None else args.tau
    else:
        case = _case(args)
        omega0 = case.omega0
        if args.bus is None:
            raise ConfigError("--case needs --bus")
        bus = _bus_id(case, args.bus)
        tau = case.tau if args.tau is None else args.tau
        if case.extra is not None and bus == case.extra.bus:
            device = case.extra
            lg = 1.0 / _blocks_of(case).B4 if args.lg is None else args.lg
        else:
            device = case.devices[case.retained.index(bus)]
            if args.lg is None:
                raise ConfigError("--lg is required for a retained-bus device")
            lg = args.lg
    sweep = forming_index_sweep(device, LineParams(lg, tau, omega0), _grid(args))
    cls = classify(sweep)
    footer = [
        "bands=" + ";".join(f"{_fmt(lo)}-{_fmt(hi)}:{label}" for lo, hi, label in cls.bands),
        "crossovers_hz=" + ";".join(_fmt(x) for x in cls.crossovers),
    ]
    comments = [f"strategy={device.spec.strategy}", f"l_g={_fmt(lg)}", f"tau={_fmt(tau)}"]
    _emit(args, sweep.to_columns(), comments, footer)
    return EXIT_OK


def cmd_strength(args) -> int:
    case = _case(args)
    grid = _grid(args)
    sweep = strength_sweep(case, grid)
    columns = sweep.to_columns()
    comments = [f"case={case.name or args.case}"]
    if args.compare is not None:
        other = load_case(_resolve_case_path(args.compare))
        if tuple(other.retained) != tuple(case.retained):
            raise ConfigError("--compare case must share the retained bus list")
        sb = strength_sweep(other, grid)
        for name in ("kappa", "alpha", "bound_kappa", "bound_alpha"):
            columns[f"d_{name}"] = getattr(sb, name) - getattr(sweep, name)
        comments.append(f"compare={other.name or args.compare} (delta = compare - case)")
    ok = bool(np.all(sweep.kappa_ok) and np.all(sweep.alpha_ok))
    comments.append(f"bounds_hold={'yes' if ok else 'NO'}")
    _emit(args, columns, comments)
    return EXIT_OK


def cmd_step(args) -> int:
    case = _case(args)
    dist = DisturbanceSpec(_bus_id(case, args.bus), args.amp, args.axis, args.t_step)
    ts = step_response(case, dist, args.t_end, args.n_samples, args.a_damp)
    meta = ts.metadata
    status = "PASSED" if meta["final_value_ok"] else "FAILED"
    comments = [
        f"final_value_check={status}",
        f"final_value_rel_error={_fmt(meta['final_value_rel_error'])}",
        "impulse_at_t_step=" + ";".join(
            f"bus_{b}:{_fmt(d)},{_fmt(q)}" for b, (d, q) in zip(ts.buses, np.asarray(meta["impulse"]))),
    ]
    if not meta["final_value_ok"]:
        print("warning: final-value check failed; the response is not trustworthy", file=sys.stderr)
    _emit(args, ts.to_columns(), comments)
    return EXIT_OK


def validate_case(document, overrides=None) -> list[tuple[str, bool, str]]:
    """Itemized checks: schema, connectivity/consistency, dual-form absorption at spot frequencies."""
    report = []
    try:
        doc = _read_json(document, "case file")
        check_schema(doc)
        report.append(("schema", True, "ok"))
    except ConfigError as exc:
        return [("schema", False, str(exc))]
    try:
        case = _apply_overrides(load_case(doc), overrides)
        report.append(("network", True, "connected"))
    except ConfigError as exc:
        return report + [("network", False, str(exc))]
    return report + dual_form_report(case)


def dual_form_report(case) -> list[tuple[str, bool, str]]:
    report = []
    try:
        blocks = _blocks_of(case)
    except ConfigError as exc:
        return [("network", False, str(exc))]
    for f in SPOT_FREQS_HZ:
        name = f"dual_form@{_fmt(f)}Hz"
        try:
            absorb_device(blocks, case.extra, 2j * np.pi * f, case.tau, case.omega0)
            report.append((name, True, "ok"))
        except NumericalError as exc:
            report.append((name, False, str(exc)))
    return report


def cmd_validate(args) -> int:
    report = validate_case(_resolve_case_path(args.case), args.set)
    lines = [f"{name}: {'ok' if ok else 'FAIL'}{'' if ok else ' - ' + msg}" for name, ok, msg in report]
    text = "\n".join(lines) + "\n"
    passed = all(ok for _, ok, _ in report)
    if args.output is not None:
        write_atomic(text, args.output)
    else:
        (sys.stdout if passed else sys.stderr).write(text)
    return EXIT_OK if passed else EXIT_CONFIG


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="formidex", description="Forming Index and system strength analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=True, case_required=True):
        sp.add_argument("--case", required=case_required, help="case JSON path, or a bundled case name (ieee39)")
        sp.add_argument("--set", action="append", metavar="BUS:STRATEGY[:PARAMS_JSON]",
                        help="replace the device at BUS (repeatable)")
        sp.add_argument("-o", "--output", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if grid:
            sp.add_argument("--fmin", type=float, default=0.01, help="lowest frequency [Hz]")
            sp.add_argument("--fmax", type=float, default=1000.0, help="highest frequency [Hz]")
            sp.add_argument("--n-points", type=int, default=400)

    sp = sub.add_parser("fi", help="Forming Index sweep of one device")
    common(sp, case_required=False)
    sp.add_argument("--device", help="standalone device JSON (strategy, params, operating_point)")
    sp.add_argument("--bus", help="device bus when using --case")
    sp.add_argument("--lg", type=float, help="grid inductance [pu] (default 0.3, or 1/B4 at the extra bus)")
    sp.add_argument("--tau", type=float, help="line R/X ratio (default 0.1 or the case value)")
    sp.add_argument("--omega0", type=float, default=2 * np.pi * 60, help="base frequency [rad/s] for --device")
    sp.set_defaults(func=cmd_fi)

    sp = sub.add_parser("strength", help="system/grid strength and their lower bounds")
    common(sp)
    sp.add_argument("--compare", help="second case; adds delta columns (compare - case)")
    sp.set_defaults(func=cmd_strength)

    sp = sub.add_parser("step", help="voltage response to a step current disturbance")
    common(sp, grid=False)
    sp.add_argument("--bus", required=True)
    sp.add_argument("--amp", type=float, default=1.0)
    sp.add_argument("--axis", choices=("d", "q", "both"), default="d")
    sp.add_argument("--t-step", type=float, default=0.5)
    sp.add_argument("--t-end", type=float, default=T_END)
    sp.add_argument("--n-samples", type=int, default=N_SAMPLES)
    sp.add_argument("--a-damp", type=float, default=A_DAMP)
    sp.set_defaults(func=cmd_step)

    sp = sub.add_parser("validate", help="schema, connectivity and dual-form checks")
    sp.add_argument("--case", required=True)
    sp.add_argument("--set", action="append", metavar="BUS:STRATEGY[:PARAMS_JSON]")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FormidexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
