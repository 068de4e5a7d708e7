"""``stacklab`` command line: solve, sweep, verify and limits.

Exit codes: 0 success, 1 usage error, 2 degenerate game, 3 certification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace

from . import major, pn
from .errors import DegenerateGameError, InvalidSpecError, SingularProblemError
from .growth import fit_growth
from .model import Game, MajGameSpec, PnGameSpec, load_spec
from .verify import MonteCarloConfig, certify_incentive

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_CERT_FAIL = 0, 1, 2, 3

PN_FIELDS = ("r0", "q0", "r", "q")
MAJ_FIELDS = ("r0", "rM", "r", "qM", "q0", "qhat0", "q")
SHARED_REQUIRED = ("r0", "q0", "rM", "qM")
SHARED_DEFAULTS = {"r": 1.0, "q": 0.0, "qhat0": 0.0}  # ignored by the shared-signal game

PN_GAIN_COLUMNS = ("n", "alpha0", "alpha", "beta", "gain", "energy")
MAJ_GAIN_COLUMNS = ("n", "theta", "thetaM", "beta", "alpha", "alphaM", "gain", "L")
MAJ_HAT_COLUMNS = ("n", "theta_hat", "thetaM_hat", "beta_hat", "alpha_hat", "alphaM_hat")
LOSS_COLUMNS = ("n", "j_leader_opt", "j_leader_major", "loss")

log = logging.getLogger("stacklab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; usage errors here are 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("STACKLAB_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"STACKLAB_SEED must be an integer, got {raw!r}") from None


def parse_grid(text: str) -> list[int]:
    """``"10,100,1000"`` or an inclusive range ``"1..50"``; must be strictly increasing."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            grid = list(range(int(lo), int(hi) + 1))
        else:
            grid = [int(float(tok)) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}") from None
    if not grid or grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError(f"grid must be a non-empty, strictly increasing list of positive integers: {text!r}")
    return grid


def _add_common(p, with_n=True):
    p.add_argument("--game", choices=[g.value for g in Game], default=Game.PN.value,
                   help="pn: all followers incentivized; maj: major + minor followers; "
                        "maj_shared: shared-signal major/minor example")
    p.add_argument("--spec", metavar="FILE", help="JSON spec file (alternative to inline weights)")
    for name in MAJ_FIELDS:
        p.add_argument(f"--{name}", type=float, help=f"weight {name}")
    if with_n:
        p.add_argument("--n", type=int, help="number of (minor) followers")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stacklab", description="LQG Stackelberg incentive-design games: solve, sweep, verify.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver diagnostics")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one game instance")
    _add_common(p)

    p = sub.add_parser("sweep", help="solve over a grid of population sizes")
    _add_common(p, with_n=False)
    p.add_argument("--grid", required=True, help="comma list (10,100,1000) or inclusive range (1..50)")
    p.add_argument("--curve", choices=("gain", "loss", "params"), default="gain",
                   help="gain: coefficients and gain; loss: leader cost under both plans; "
                        "params: leader-optimal coefficients (maj)")
    p.add_argument("--plot", metavar="PATH", help="also render the curve to an image file")

    p = sub.add_parser("verify", help="certify the incentive equilibrium of one instance")
    _add_common(p)
    p.add_argument("--seed", type=int, default=None, help="Monte Carlo seed (default: $STACKLAB_SEED or 0)")
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo samples (>= 10000)")
    p.add_argument("--zero-gain", action="store_true", help="overwrite the solved gain with 0")

    p = sub.add_parser("limits", help="large-population limit of the solution")
    _add_common(p, with_n=False)
    return parser


def resolve_spec(args, n_required=True):
    game = Game(args.game)
    fields = PN_FIELDS if game is Game.PN else MAJ_FIELDS
    inline = {k: getattr(args, k) for k in MAJ_FIELDS if getattr(args, k) is not None}
    if args.spec and inline:
        raise UsageError("give either --spec or inline weights, not both")
    if args.spec:
        try:
            spec = load_spec(args.spec, Game.PN if game is Game.PN else Game.MAJ)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read spec file: {exc}") from None
    else:
        if not inline:
            raise UsageError("give --spec FILE or the inline weights")
        extra = set(inline) - set(fields)
        if extra:
            raise UsageError(f"weights not used by game {game.value}: {', '.join(sorted(extra))}")
        if game is Game.MAJ_SHARED:
            inline = {**SHARED_DEFAULTS, **inline}
            missing = [k for k in SHARED_REQUIRED if k not in inline]
        else:
            missing = [k for k in fields if k not in inline]
        if missing:
            raise UsageError(f"missing weights: {', '.join('--' + k for k in missing)}")
        cls = PnGameSpec if game is Game.PN else MajGameSpec
        spec = cls(**inline)
    n = getattr(args, "n", None)
    if n is not None:
        spec = spec.with_n(n)
    elif n_required and not args.spec:
        raise UsageError("--n is required")
    return game, spec


# ---------------------------------------------------------------------------
# output


def _num(x):
    return None if x is None else float(x)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r[c] if c == "n" else repr(float(r[c])) for c in columns])
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def _solve_doc(game, spec) -> tuple[dict, dict]:
    """JSON document and a flat row for CSV."""
    doc = {"game": game.value, "spec": spec.to_dict()}
    if game is Game.PN:
        eq = pn.pn_equilibrium(spec)
        doc["solution"] = eq.to_dict()
        row = {"n": spec.n, **eq.params}
    elif game is Game.MAJ:
        eq = major.maj_equilibrium(spec)
        hat = major.maj_leader_optimal(spec)
        loss = major.maj_loss(spec)
        doc["leader_major"] = eq.to_dict()
        doc["leader_optimal"] = {"n": spec.n, "params": {k: _num(v) for k, v in hat.to_dict().items() if k != "n"},
                                 "residuals": major.maj_hat_residuals(spec, hat)}
        doc["loss"] = loss.to_dict()
        row = {"n": spec.n, **{k: v for k, v in eq.params.items()}, "loss": loss.loss}
    else:
        sol = major.zero_loss_solve(spec)
        loss = major.zero_loss_loss(spec)
        doc["solution"] = {"n": spec.n, "params": {k: _num(v) for k, v in sol.to_dict().items() if k != "n"},
                           "residuals": major.zero_loss_residuals(spec, sol)}
        doc["loss"] = loss.to_dict()
        row = {"n": spec.n, **{k: v for k, v in sol.to_dict().items() if k != "n"}, "loss": loss.loss}
    return doc, row


def cmd_solve(args) -> int:
    game, spec = resolve_spec(args)
    doc, row = _solve_doc(game, spec)
    if args.format == "csv":
        _emit(_csv([row], list(row)), args.out)
    else:
        _emit(_json(doc), args.out)
    return EXIT_OK


def _sweep_rows(game, spec, grid, curve):
    if curve == "loss":
        if game is Game.PN:
            raise UsageError("the loss curve is defined for the major/minor games only")
        fn = major.maj_loss if game is Game.MAJ else major.zero_loss_loss
        return [fn(spec.with_n(n)).to_dict() for n in grid], LOSS_COLUMNS
    if game is Game.PN:
        return [r.to_dict() for r in pn.pn_sweep(spec, grid)], PN_GAIN_COLUMNS
    if game is Game.MAJ_SHARED:
        raise UsageError("the shared-signal game supports --curve loss only")
    if curve == "params":
        hats = [major.maj_leader_optimal(spec.with_n(n)) for n in grid]
        return [dict(zip(MAJ_HAT_COLUMNS, (h.n, *h.coefficients()))) for h in hats], MAJ_HAT_COLUMNS
    return [s.to_dict() for s in major.maj_sweep(spec, grid)], MAJ_GAIN_COLUMNS


def cmd_sweep(args) -> int:
    game, spec = resolve_spec(args, n_required=False)
    grid = parse_grid(args.grid)
    rows, columns = _sweep_rows(game, spec, grid, args.curve)
    fit = fit_growth(grid, [r["gain"] for r in rows]) if "gain" in columns and len(grid) >= 3 else None
    if args.format == "json":
        doc = {"game": game.value, "spec": spec.to_dict(), "curve": args.curve,
               "rows": [{c: r[c] for c in columns} for r in rows]}
        if fit is not None:
            doc["gain_fit"] = fit.to_dict()
        _emit(_json(doc), args.out)
    else:
        _emit(_csv(rows, columns), args.out)
    if args.plot:
        from . import plotting

        if args.curve == "loss":
            plotting.plot_loss_curve(rows, args.plot)
        elif args.curve == "gain":
            plotting.plot_gain_growth(rows, args.plot, fit)
        else:
            plotting.plot_parameters(rows, [c for c in columns if c != "n"], args.plot)
    return EXIT_OK


def cmd_verify(args) -> int:
    game, spec = resolve_spec(args)
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        cfg = MonteCarloConfig(samples=args.samples, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if game is Game.PN:
        sol = pn.pn_solve(spec)
    elif game is Game.MAJ:
        sol = major.maj_solve(spec)
    else:
        sol = major.zero_loss_solve(spec)
    if args.zero_gain:
        sol = replace(sol, gain=0.0)
    report = certify_incentive(spec, sol, mc=cfg)
    doc = {"game": game.value, "spec": spec.to_dict(), "solution": {k: _num(v) if k != "n" else v
                                                                    for k, v in sol.to_dict().items()},
           **report.to_dict()}
    _emit(_json(doc), args.out)
    return EXIT_OK if report.passed else EXIT_CERT_FAIL


def cmd_limits(args) -> int:
    game, spec = resolve_spec(args, n_required=False)
    doc = {"game": game.value, "spec": {k: v for k, v in spec.to_dict().items() if k != "n"}}
    if game is Game.PN:
        doc["limits"] = pn.pn_limits(spec)
        doc["note"] = "no finite-energy incentive exists in the large-population limit"
    elif game is Game.MAJ:
        lim = major.maj_limits(spec)
        doc["limits"] = {
            **{f"{k}_inf": _num(getattr(lim, k)) for k in major.PARAM_NAMES},
            "gain_inf": _num(lim.gain),
            "L_inf": _num(lim.L),
            "D_inf": _num(lim.D),
        }
        doc["mean_minor_action"] = {
            "omega0": _num(lim.alpha),
            "yM": _num(lim.alphaM),
            "description": f"ubar -> {lim.alpha:.10g}*omega0 + {lim.alphaM:.10g}*yM",
        }
    else:
        raise UsageError("limits are available for --game pn and --game maj")
    if args.format == "csv":
        _emit(_csv([{"n": "inf", **doc["limits"]}], ["n", *doc["limits"]]), args.out)
    else:
        _emit(_json(doc), args.out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "limits": cmd_limits}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error from argparse
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidSpecError) as exc:
        parser.print_usage(sys.stderr)
        print(f"stacklab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateGameError, SingularProblemError) as exc:
        print(f"stacklab: degenerate game: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
