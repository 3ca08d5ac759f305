"""Command-line front end: coeffs | solve | simulate | sweep | recover."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import elimination as elim
from . import netlist, recovery, signalsim
from .optics import (
    MIRRORS,
    Ratios,
    SignConvention,
    SplitRatio,
    finite_difference_gradient,
    first_order_coefficients,
    equal_intensity_ratios,
)

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


def fmt(x: float | None) -> str:
    return "" if x is None else format(x, ".17g")


def _write_csv(rows, header, out: str | None, announce: bool = True) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) or v is None else v for v in row])
    if out:
        Path(out).write_text(buf.getvalue(), encoding="utf-8")
        if announce:
            print(f"wrote {out}")
    else:
        sys.stdout.write(buf.getvalue())


def _load(path: str) -> netlist.ExperimentFile:
    return netlist.parse(Path(path).read_text(encoding="utf-8"))


def _ratios(args) -> Ratios:
    """Ratios from --file if given, then individual --tN flags on top."""
    base = list(_load(args.file).config.ratios) if args.file else list(equal_intensity_ratios())
    for i in range(4):
        t = getattr(args, f"t{i + 1}")
        if t is not None:
            base[i] = SplitRatio(t)
    return Ratios(*base)


def _convention(args, default: SignConvention = SignConvention.EXPERIMENT_MATCHED):
    return SignConvention(args.convention) if args.convention else default


def _float_list(text: str) -> list[float]:
    """Comma list, or start:stop:num for an inclusive linspace."""
    if ":" in text:
        start, stop, num = text.split(":")
        n = int(num)
        if n == 1:
            return [float(start)]
        a, b = float(start), float(stop)
        return [a + (b - a) * k / (n - 1) for k in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_coeffs(args) -> int:
    exp = _load(args.experiment)
    cfg = exp.config
    if args.phi is not None or args.chi is not None:
        cfg = cfg.with_phases(
            cfg.phi if args.phi is None else args.phi,
            cfg.chi if args.chi is None else args.chi,
        )
    if args.convention:
        cfg = cfg.ratios.configure(cfg.phi, cfg.chi, _convention(args))
    coeffs = first_order_coefficients(cfg)
    rows = []
    for m, d_re, d_im in coeffs.rows():
        fd_re, fd_im = finite_difference_gradient(cfg, m, 1e-6)
        rel = max(abs(d_re - fd_re) / max(abs(d_re), 1e-3),
                  abs(d_im - fd_im) / max(abs(d_im), 1e-3))
        rows.append([m, d_re, d_im, fd_re, fd_im, rel])
    _write_csv(rows, ["mirror", "d_re", "d_im", "fd_re", "fd_im", "rel_err"], args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    targets = [elim.EliminationTarget.parse(t) for t in args.target]
    if len(targets) > 2:
        raise argparse.ArgumentTypeError("at most two targets")
    pin = None
    if args.pin:
        name, _, value = args.pin.partition("=")
        pin = (name.strip(), float(value))
    ratios = _ratios(args)
    conv = _convention(args)
    solutions = elim.solve_phases(targets, ratios, pin=pin, convention=conv)
    doc = {
        "targets": [t.value for t in targets],
        "convention": conv.value,
        "pin": None if pin is None else {pin[0]: pin[1]},
        "ratios_t": [s.t for s in ratios],
        "solutions": [],
    }
    for s in solutions:
        cfg = ratios.configure(s.phi, s.chi, conv)
        doc["solutions"].append({
            "phi": s.phi,
            "chi": s.chi,
            "residuals": {t.value: elim.condition_residual(t, cfg).value for t in targets},
        })
    print(json.dumps(doc, indent=2))
    return EXIT_OK if solutions else EXIT_DOMAIN


def cmd_simulate(args) -> int:
    exp = _load(args.experiment)
    cfg = exp.config
    if args.convention:
        cfg = cfg.ratios.configure(cfg.phi, cfg.chi, _convention(args))
    reference = cfg.with_phases(args.ref_phi, args.ref_chi)
    samples = signalsim.synthesize_timeseries(cfg, exp.vibrations, exp.detector, exp.sim)
    spec = signalsim.power_spectrum(samples, exp.sim)
    freqs = [exp.vibrations[m].freq for m in MIRRORS]
    peaks = dict(zip(MIRRORS, signalsim.peak_amplitudes(spec, freqs)))
    ref_peaks = signalsim.mirror_peaks(reference, exp.vibrations, exp.detector, exp.sim)

    _write_csv(zip(spec.freqs.tolist(), spec.amplitudes.tolist()),
               ["freq_hz", "amplitude"], args.out, announce=False)
    summary = {
        "spectrum_csv": args.out,
        "reference": {"phi": args.ref_phi, "chi": args.ref_chi},
        "mirrors": {},
    }
    for m in MIRRORS:
        ref = ref_peaks[m]
        supp = None
        if ref > signalsim.ZERO_PEAK:
            supp = signalsim.suppression_from_peaks(ref, peaks[m])
        summary["mirrors"][m] = {
            "freq_hz": exp.vibrations[m].freq,
            "peak": peaks[m],
            "reference_peak": ref,
            "suppression_db": supp,
        }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    target = elim.EliminationTarget.parse(args.target)
    rows = elim.sweep_curve(target, _ratios(args), _float_list(args.r2),
                            _float_list(args.chi), _convention(args))
    _write_csv(([r.r2, r.chi, r.phi] for r in rows), ["r2", "chi", "phi"], args.out)
    return EXIT_OK


def cmd_recover(args) -> int:
    ratios = _ratios(args)
    conv = _convention(args)
    powers = recovery.AuxiliaryPowers(args.p_d2, args.p_d3)
    result = recovery.recover_phases(powers, ratios, conv)
    print(json.dumps({
        "convention": conv.value,
        "phi": result.phi,
        "chi": result.chi,
        "beta": result.beta,
    }, indent=2))
    return EXIT_OK


def _add_ratio_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--file", help="experiment file supplying the splitting ratios")
    for i in range(1, 5):
        p.add_argument(f"--t{i}", type=float, help=f"amplitude transmissivity of BS{i}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmzi", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--convention", choices=[c.value for c in SignConvention])
    common.add_argument("--out", help="write CSV output here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", parents=[common], help="weak-trace coefficients")
    p.add_argument("experiment")
    p.add_argument("--phi", type=float)
    p.add_argument("--chi", type=float)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("solve", parents=[common], help="solve elimination conditions")
    p.add_argument("--target", action="append", required=True,
                   choices=[t.value for t in elim.EliminationTarget])
    p.add_argument("--pin", help="phi=<rad> or chi=<rad>")
    _add_ratio_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="spectrum of the D1 signal")
    p.add_argument("experiment")
    p.add_argument("--out", required=True, help="spectrum CSV path")
    p.add_argument("--convention", choices=[c.value for c in SignConvention])
    p.add_argument("--ref-phi", type=float, default=0.5)
    p.add_argument("--ref-chi", type=float, default=0.3)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="phi(chi) curves versus r2")
    p.add_argument("--target", required=True, choices=[t.value for t in elim.EliminationTarget])
    p.add_argument("--r2", required=True, help="comma list or start:stop:num")
    p.add_argument("--chi", required=True, help="comma list or start:stop:num")
    _add_ratio_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("recover", parents=[common], help="phases from D2/D3 powers")
    p.add_argument("--p-d2", type=float, required=True)
    p.add_argument("--p-d3", type=float, required=True)
    _add_ratio_flags(p)
    p.set_defaults(func=cmd_recover)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except netlist.ParseError as err:
        print(f"{err.line}:{err.column} {err.kind.value} {err.message}", file=sys.stderr)
        return EXIT_USAGE
    except (argparse.ArgumentTypeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (
        elim.NoSolution,
        elim.DegenerateAmplitude,
        recovery.OutOfFringeRange,
        recovery.DegenerateInnerMzi,
        recovery.DegenerateOuterMzi,
        signalsim.AmplitudeTooLarge,
        signalsim.UnresolvableFrequencies,
        signalsim.ZeroReferencePeak,
    ) as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
