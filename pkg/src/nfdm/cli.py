"""Command-line interface.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.

Signals are exchanged as delimited text with a header row: ``t,re,im`` for
time-domain signals and ``lambda,re,im`` for spectral amplitudes.
"""
import argparse
import csv
import json
import sys
from dataclasses import fields

import numpy as np

from .channel import ChannelConfig, ssfm_propagate
from .exceptions import NFDMError, NumericFailureError, ResourceBudgetError
from .forward import al_nft, al_spectral_grid, clp_forward
from .grids import SampledSignal, energy, make_spectral_grid, make_time_grid
from .inverse import inverse_nft
from .modem import nfdm_loopback, nfdm_pulse_bank, symbols_for_power
from .wdm import wdm_bank_like, wdm_loopback

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


# --------------------------------------------------------------------------
# i/o
# --------------------------------------------------------------------------


def read_series(path, axis):
    """Read ``axis,re,im`` rows; returns (axis values, complex samples)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        if reader.fieldnames is None or not {axis, "re", "im"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {axis},re,im")
        x, v = [], []
        for row in reader:
            x.append(float(row[axis]))
            v.append(complex(float(row["re"]), float(row["im"])))
    if not x:
        raise ValueError(f"{path}: no samples")
    return np.array(x), np.array(v)


def write_series(path, axis, x, v):
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        w = csv.writer(fh)
        w.writerow([axis, "re", "im"])
        for a, b in zip(x, v):
            w.writerow([repr(float(a)), repr(float(b.real)), repr(float(b.imag))])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _grid_from_points(x, kind):
    """Uniform mesh through the given sample points (cell convention)."""
    n = x.size
    if n < 2:
        step = 1.0
    else:
        step = (x[-1] - x[0]) / (n - 1)
        if step <= 0 or not np.allclose(np.diff(x), step, rtol=1e-6, atol=1e-12 * abs(step)):
            raise ValueError("samples must lie on a uniform increasing mesh")
    if kind == "time":
        return make_time_grid(x[0], x[0] + n * step, n)
    return make_spectral_grid(x[0], x[0] + n * step, n)


def _signal(path):
    t, v = read_series(path, "t")
    return SampledSignal(_grid_from_points(t, "time"), v)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_nft(args):
    q = _signal(args.input)
    grid = al_spectral_grid(q.grid)
    if args.method == "al":
        sd = al_nft(q, grid, s=args.s)
    else:
        sd = clp_forward(q, grid, s=args.s)
    write_series(args.output, "lambda", grid.points, sd.qhat)
    return EXIT_OK


def cmd_inft(args):
    lam, v = read_series(args.input, "lambda")
    lg = _grid_from_points(lam, "spectral")
    eps = np.pi / lg.span
    n = lg.n_samples
    t_start = -n * eps / 2 if args.t_start is None else args.t_start
    tg = make_time_grid(t_start, t_start + n * eps, n)
    if not np.allclose(al_spectral_grid(tg).points, lg.points, rtol=1e-9, atol=1e-9):
        raise ValueError("lambda samples must form the centred AL mesh of period pi/eps")
    q = inverse_nft(SampledSignal(lg, v), tg, s=1)
    write_series(args.output, "t", tg.points, q.samples)
    return EXIT_OK


def _channel_from_args(args):
    return ChannelConfig(
        s=args.s,
        distance=args.distance,
        noise_psd=args.noise_psd,
        noise_bandwidth=args.noise_bandwidth,
        z_steps=args.z_steps,
        rng_seed=args.seed,
    )


def cmd_propagate(args):
    q = _signal(args.input)
    out = ssfm_propagate(q, _channel_from_args(args))
    write_series(args.output, "t", out.grid.points, out.samples)
    return EXIT_OK


def _loopback_setup(args):
    grid = make_time_grid(-args.window / 2, args.window / 2, args.samples)
    bank = nfdm_pulse_bank(grid, args.spacing, args.rolloff, args.users, args.symbols)
    rng = np.random.default_rng(args.seed)
    S = symbols_for_power(bank, args.power, rng)
    cfg = ChannelConfig(distance=args.distance, noise_psd=args.noise_psd, z_steps=args.z_steps,
                        noise_bandwidth=args.noise_bandwidth)
    return grid, bank, S, cfg, rng


def _report(args, S, Sh, q0, qL):
    out = {
        "relative_error": Sh.relative_error(S),
        "symbol_energy": S.energy(),
        "signal_energy_in": energy(q0),
        "signal_energy_out": energy(qL),
        "received": [[c.real, c.imag] for c in Sh.symbols.reshape(-1)],
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_nfdm_loopback(args):
    grid, bank, S, cfg, rng = _loopback_setup(args)
    Sh, q0, qL = nfdm_loopback(S, bank, grid, cfg, rng=rng)
    return _report(args, S, Sh, q0, qL)


def cmd_wdm_loopback(args):
    grid, bank, S, cfg, rng = _loopback_setup(args)
    Sh, q0, qL = wdm_loopback(S, wdm_bank_like(bank, grid), cfg, rng=rng)
    return _report(args, S, Sh, q0, qL)


def _config_from_args(args):
    from .experiment import ExperimentConfig

    cfg = ExperimentConfig.from_yaml(args.config) if args.config else ExperimentConfig()
    flat = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    for name in flat:
        val = getattr(args, "cfg_" + name, None)
        if val is not None:
            flat[name] = val
    return ExperimentConfig(**flat)


def cmd_rate_sweep(args):
    from .experiment import run_experiment, save_result

    cfg = _config_from_args(args)

    def progress(i, p, r):
        print(f"power[{i}] = {p:.6g}: rate = {r:.4f} bits/2D", file=sys.stderr)

    res = run_experiment(cfg, progress=progress)
    manifest = save_result(res, args.out)
    print(json.dumps({"manifest": manifest, "powers": res.powers, "rates": res.rates,
                      "entropies": res.entropies, "failures": res.failures}, indent=2))
    return EXIT_OK


def cmd_emit_plots(args):
    from .experiment import emit_plot_data, result_from_manifest

    res = result_from_manifest(args.run)
    for path in emit_plot_data(res, args.kind, args.out or args.run):
        print(path)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_channel_flags(p):
    p.add_argument("--distance", type=float, default=0.0)
    p.add_argument("--noise-psd", type=float, default=0.0)
    p.add_argument("--noise-bandwidth", type=float, default=None)
    p.add_argument("--z-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def _add_modem_flags(p):
    p.add_argument("--users", type=int, default=3)
    p.add_argument("--symbols", type=int, default=4)
    p.add_argument("--spacing", type=float, default=1.25, help="user spacing W0 in generalised frequency")
    p.add_argument("--rolloff", type=float, default=0.25)
    p.add_argument("--samples", type=int, default=2048)
    p.add_argument("--window", type=float, default=64.0)
    p.add_argument("--power", type=float, default=0.25, help="normalised average power")
    _add_channel_flags(p)


def _add_config_flags(p):
    from .experiment import ExperimentConfig

    for f in fields(ExperimentConfig):
        if f.name.startswith("_"):
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.name == "powers":
            p.add_argument(flag, dest="cfg_powers", type=float, nargs="+", default=None)
        elif f.type in (int, "int"):
            p.add_argument(flag, dest="cfg_" + f.name, type=_num(int), default=None)
        elif f.type in (float, "float"):
            p.add_argument(flag, dest="cfg_" + f.name, type=_num(float), default=None)
        else:
            p.add_argument(flag, dest="cfg_" + f.name, default=None)


def _num(kind):
    def conv(text):
        try:
            return kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value {text!r}")

    return conv


def build_parser():
    parser = argparse.ArgumentParser(prog="nfdm", description="Nonlinear Fourier transform toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nft", help="forward NFT of a time-domain signal (t,re,im)")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--method", choices=("al", "clp"), default="al")
    p.add_argument("--s", type=int, choices=(1, -1), default=1)
    p.set_defaults(func=cmd_nft)

    p = sub.add_parser("inft", help="inverse NFT (layer peeling) of a spectral amplitude (lambda,re,im)")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--t-start", type=float, default=None)
    p.set_defaults(func=cmd_inft)

    p = sub.add_parser("propagate", help="split-step propagation of a signal (t,re,im)")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--s", type=int, choices=(1, -1), default=1)
    _add_channel_flags(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("nfdm-loopback", help="random NFDM frame through the channel")
    _add_modem_flags(p)
    p.set_defaults(func=cmd_nfdm_loopback)

    p = sub.add_parser("wdm-loopback", help="random WDM frame through the channel")
    _add_modem_flags(p)
    p.set_defaults(func=cmd_wdm_loopback)

    p = sub.add_parser("rate-sweep", help="Monte-Carlo achievable-rate power sweep")
    p.add_argument("--config", default=None, help="YAML experiment configuration")
    p.add_argument("--out", required=True, help="run directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_rate_sweep)

    p = sub.add_parser("emit-plots", help="write plot series from a run directory")
    p.add_argument("run")
    p.add_argument("--kind", default="all")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_emit_plots)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NumericFailureError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ResourceBudgetError, NFDMError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
