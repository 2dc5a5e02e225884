"""Command-line interface: ``kselect select|simulate|df-curve|oracle``.

Exit codes: 0 success, 1 internal error, 2 input error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import ConstantColumn, KTooLarge, fit_series, standardize
from .edf import df_vs_kprime_curve, direct_sampling
from .evaluate import ideal_selection, mean_ari, summarize
from .selection import METHODS, SelectionConfig, select_all
from .simulate import SCHEMES, MixtureSpec, RejectionFailure, generate, run_scenario

log = logging.getLogger("kselect")

SCHEMA = "kselect/1"
EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3


class InputError(Exception):
    pass


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- input


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _label_columns(spec: str, n_cols: int) -> list[int]:
    """0-based label column indices for ``--labels``."""
    spec = spec.strip().lower()
    if spec == "none":
        return []
    out = []
    for part in spec.split(","):
        part = part.strip()
        if part == "last":
            idx = n_cols - 1
        elif part == "first":
            idx = 0
        else:
            try:
                idx = int(part)
            except ValueError:
                raise ConfigError(f"--labels: cannot interpret {part!r}") from None
            # Negative values count from the end, like Python indexing.
            idx = idx if idx >= 0 else n_cols + idx
        if not 0 <= idx < n_cols:
            raise ConfigError(f"--labels: column {part} out of range for {n_cols} columns")
        if idx not in out:
            out.append(idx)
    return out


def read_table(text: str, labels: str = "none", source: str = "<input>"):
    """Parse CSV text into ``(X, truths, feature_names)``.

    A first row whose feature cells are all non-numeric is a header. Label
    columns may hold arbitrary strings. Any other non-numeric cell raises
    :class:`InputError` naming its 1-based row and column.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{source}: no data rows")
    n_cols = len(rows[0])
    label_idx = _label_columns(labels, n_cols)
    feat_idx = [c for c in range(n_cols) if c not in label_idx]
    if not feat_idx:
        raise ConfigError("no feature columns left after removing label columns")

    names = [f"x{c + 1}" for c in feat_idx]
    start = 0
    first = [rows[0][c].strip() for c in feat_idx] if len(rows[0]) == n_cols else []
    if first and not any(_is_number(v) for v in first):
        names, start = first, 1

    X = np.empty((len(rows) - start, len(feat_idx)))
    truths = [[] for _ in label_idx]
    for r, row in enumerate(rows[start:], start=start + 1):
        if len(row) != n_cols:
            raise InputError(f"{source}: row {r} has {len(row)} columns, expected {n_cols}")
        for m, c in enumerate(feat_idx):
            cell = row[c].strip()
            try:
                val = float(cell)
            except ValueError:
                raise InputError(
                    f"{source}: non-numeric value {cell!r} at row {r}, column {c + 1}"
                ) from None
            if not math.isfinite(val):
                raise InputError(f"{source}: non-finite value at row {r}, column {c + 1}")
            X[r - start - 1, m] = val
        for t, c in enumerate(label_idx):
            truths[t].append(row[c].strip())
    if X.shape[0] < 2:
        raise InputError(f"{source}: need at least two data rows")
    return X, [np.asarray(t) for t in truths], names


def _read_input(path: str, labels: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not UTF-8 ({exc})") from None
    return read_table(text, labels, source=path)


# ---------------------------------------------------------------- output


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
        if f.is_integer() and abs(f) < 1e16:
            return str(int(f))
        return repr(f)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _emit(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------- helpers


def _int_list(text: str, flag: str) -> list[int]:
    """``"5,10,15"`` or ``"1:30"`` (inclusive) or a mix of both."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ":" in part:
                a, b = (int(p) for p in part.split(":"))
                out.extend(range(a, b + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise ConfigError(f"{flag}: cannot parse {text!r}") from None
    if not out:
        raise ConfigError(f"{flag}: empty list")
    return out


def _methods(text: str) -> tuple[str, ...]:
    names = tuple(m.strip().lower().replace("-", "_") for m in text.split(",") if m.strip())
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise ConfigError(f"--methods: unknown {bad}; choose from {','.join(METHODS)}")
    return tuple(m for m in METHODS if m in names)


def _check_run(args):
    if not 1 <= args.kmin <= args.kmax:
        raise ConfigError("require 1 <= --kmin <= --kmax")
    if args.inits < 1:
        raise ConfigError("--inits must be >= 1")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if not getattr(args, "bandwidth", 0.0) >= 0:
        raise ConfigError("--bandwidth must be >= 0")
    if getattr(args, "gap_B", 2) < 2:
        raise ConfigError("--gap-B must be >= 2")


def _config(args) -> SelectionConfig:
    return SelectionConfig(methods=_methods(args.methods), bandwidth=args.bandwidth,
                           gap_B=args.gap_B, gap_reference=args.gap_reference,
                           seed=args.seed)


def _spec(args, **over) -> MixtureSpec:
    fields = dict(scheme=args.scheme, k=args.k, d=args.d, n=args.n, seed=args.seed,
                  separation=args.separation, base_sigma=args.base_sigma,
                  box_scale=args.box_scale)
    fields.update(over)
    try:
        return MixtureSpec(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid mixture: {exc}") from None


# ---------------------------------------------------------------- commands


def cmd_select(args) -> str:
    _check_run(args)
    X, truths, _ = _read_input(args.input, args.labels)
    config = _config(args)
    if args.standardize is not False:
        try:
            X = standardize(X)
        except ConstantColumn as exc:
            raise InputError(f"{args.input}: column {exc.column + 1} is constant; "
                             "use --no-standardize or drop it") from None
    if args.kmax + 1 > X.shape[0]:
        raise ConfigError(f"--kmax + 1 = {args.kmax + 1} exceeds the {X.shape[0]} data rows")
    series = fit_series(X, args.kmin, args.kmax, n_init=args.inits, seed=args.seed,
                        threads=args.threads)
    results, errors = select_all(X, series, config)

    ideal = None
    if truths:
        k_id, ari_id = ideal_selection(series, np.stack(truths))
        ideal = {"k": k_id, "ari": ari_id}
    rows = []
    for res in results:
        entry = {"method": res.method, "k_hat": int(res.k_hat), "ks": list(res.ks),
                 "scores": res.scores,
                 "runtime_ms": round(res.runtime_ms, 3) if args.timings else None}
        if truths:
            ari = mean_ari(series[res.k_hat].assignments, truths)
            entry["ari"] = ari
            entry["normalized_regret"] = ((ideal["ari"] - ari) / ideal["ari"]
                                          if ideal["ari"] > 0 else None)
        rows.append(entry)

    if args.format == "json":
        return json_text({
            "schema": SCHEMA,
            "input": args.input,
            "n": X.shape[0],
            "d": X.shape[1],
            "standardized": args.standardize is not False,
            "label_columns": len(truths),
            "config": {"k_min": args.kmin, "k_max": args.kmax, "n_init": args.inits,
                       "seed": args.seed, "methods": list(config.methods),
                       "bandwidth": args.bandwidth, "gap_B": args.gap_B,
                       "gap_reference": args.gap_reference},
            "results": rows,
            "ideal": ideal,
            "errors": {m: f"{type(e).__name__}: {e}" for m, e in errors.items()},
        })
    table = [[r["method"], r["k_hat"], r.get("ari"), r.get("normalized_regret"),
              r["runtime_ms"], ";".join(_fmt(s) for s in np.asarray(r["scores"]))]
             for r in rows]
    if ideal is not None:
        table.append(["ideal", ideal["k"], ideal["ari"], 0.0, None, ""])
    return csv_text(["method", "k_hat", "ari", "normalized_regret", "runtime_ms", "scores"],
                    table)


def _write_dataset(path: Path, X, labels):
    rows = [list(x) + [int(lab)] for x, lab in zip(X, labels)]
    header = [f"x{j + 1}" for j in range(X.shape[1])] + ["label"]
    path.write_text(csv_text(header, rows), encoding="utf-8")


def cmd_simulate(args) -> str:
    _check_run(args)
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    config = _config(args)
    schemes = [s.strip() for s in args.scheme.split(",")]
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise ConfigError(f"--scheme: unknown {bad}; choose from {','.join(SCHEMES)}")
    ks, ds = _int_list(args.k, "--k"), _int_list(args.d, "--d")
    centiles = (10, 50, 90)
    header = ["scheme", "k", "d", "n", "reps", "failed"]
    names = list(config.methods) + ["ideal"]
    for m in names:
        header += [f"{m}_khat_p{c}" for c in centiles] + [f"{m}_ari_p{c}" for c in centiles]
    rows = []
    for scheme, k, d in itertools.product(schemes, ks, ds):
        spec = _spec(args, scheme=scheme, k=k, d=d)
        if args.kmax + 1 > spec.n:
            raise ConfigError(f"--kmax + 1 exceeds n = {spec.n}")
        if args.save_data:
            _save_scenario(Path(args.save_data), spec, args)
        try:
            summ = run_scenario(spec, reps=args.reps, config=config, seed=args.seed,
                                k_min=args.kmin, k_max=args.kmax, n_init=args.inits,
                                centiles=centiles, threads=args.threads)
        except RejectionFailure as exc:
            raise ConfigError(str(exc)) from None
        row = [scheme, k, d, spec.n, args.reps, len(summ.failures)]
        for m in names:
            if m == "ideal" and summ.outcomes:
                kh = summarize([o.ideal[0] for o in summ.outcomes], centiles)
                ar = summarize([100 * o.ideal[1] for o in summ.outcomes], centiles)
            elif m in summ.k_hat:
                kh, ar = summ.k_hat[m], summ.ari100[m]
            else:
                kh = ar = {c: None for c in centiles}
            row += [kh[c] for c in centiles] + [ar[c] for c in centiles]
        rows.append(row)
    return csv_text(header, rows)


def _save_scenario(root: Path, spec: MixtureSpec, args):
    # Same per-rep data seeds as run_scenario, so the files are the data it clusters.
    root.mkdir(parents=True, exist_ok=True)
    for r, ss in enumerate(np.random.SeedSequence(args.seed).spawn(args.reps)):
        data_ss, _ = ss.spawn(2)
        rep_spec = replace(spec, seed=int(data_ss.generate_state(1)[0]))
        data = generate(rep_spec)
        name = f"{spec.scheme}_k{spec.k}_d{spec.d}_n{spec.n}_rep{r:03d}.csv"
        _write_dataset(root / name, data.X, data.labels)


def cmd_df_curve(args) -> str:
    ks = _int_list(args.k_list, "--k")
    kprimes = _int_list(args.kprime, "--kprime")
    if args.inits < 1:
        raise ConfigError("--inits must be >= 1")
    if args.input:
        X, _, _ = _read_input(args.input, args.labels)
        if args.standardize is not False:
            try:
                X = standardize(X)
            except ConstantColumn as exc:
                raise InputError(f"{args.input}: column {exc.column + 1} is constant") from None
    else:
        X = generate(_spec(args)).X
        if args.standardize:
            X = standardize(X)
    n = X.shape[0]
    if any(not 1 <= k <= n for k in ks):
        raise ConfigError(f"--k values must lie in [1, {n}]")
    if any(not 1 <= kp <= n - 1 for kp in kprimes):
        raise ConfigError(f"--kprime values must lie in [1, {n - 1}]")
    rows = []
    cache = {}
    for k in ks:
        for kp, df in _df_rows(X, k, kprimes, args, cache):
            rows.append([k, kp, df])
    return csv_text(["k", "k_prime", "df_hat"], rows)


def _df_rows(X, k, kprimes, args, cache):
    # Share fits across the k list through a FitSeries-like cache.
    from .core import FitSeries, best_of_inits, k_seed

    need = sorted(set(kprimes) | {k})
    for m in need:
        if m not in cache:
            cache[m] = best_of_inits(X, m, n_init=args.inits, seed=k_seed(args.seed, m))
    series = FitSeries(fits=cache, k_min=min(cache), k_max=max(cache) - 1)
    return df_vs_kprime_curve(X, k, kprimes, n_init=args.inits, seed=args.seed, series=series)


def cmd_oracle(args) -> str:
    _check_run(args)
    if args.reps < 2:
        raise ConfigError("--reps must be >= 2")
    spec = _spec(args)
    if spec.scheme != "assumptions_met":
        raise ConfigError("oracle needs the Gaussian scheme 'assumptions_met'")
    k_prime = args.kprime if args.kprime is not None else args.kmax + 1
    if k_prime <= args.kmax or k_prime > spec.n - 1:
        raise ConfigError("--kprime must exceed --kmax and be at most n - 1")
    data = generate(spec)
    mu = data.means[data.labels - 1]
    ks = list(range(args.kmin, args.kmax + 1))
    oracle, est = direct_sampling(mu, spec.base_sigma, ks, args.reps, n_init=args.inits,
                                  seed=args.seed, k_prime=k_prime)
    rows = [[k, o, e, k * spec.d] for k, o, e in zip(ks, oracle, est)]
    return csv_text(["k", "df_oracle", "df_hat", "kd"], rows)


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_run(p, kmax=30):
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--kmax", type=int, default=kmax)
    p.add_argument("--inits", type=int, default=10, help="random starts per k")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default=None, help="output file (default stdout)")


def _add_select_opts(p):
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--bandwidth", type=float, default=3.0)
    p.add_argument("--gap-B", dest="gap_B", type=int, default=50)
    p.add_argument("--gap-reference", dest="gap_reference", choices=("box", "pca"),
                   default="box", help="uniform reference over the data box or its PCA box")


def _add_std(p):
    p.add_argument("--standardize", dest="standardize", action="store_true", default=None)
    p.add_argument("--no-standardize", dest="standardize", action="store_false")


def _add_mixture(p, k="5", d="5"):
    p.add_argument("--scheme", default="assumptions_met")
    p.add_argument("--k", default=k, help="true cluster count")
    p.add_argument("--d", default=d, help="dimension")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--base-sigma", dest="base_sigma", type=float, default=1.0)
    p.add_argument("--box-scale", dest="box_scale", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kselect", description="Choose the number of k-means clusters.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("select", help="run the selectors on a CSV file")
    p.add_argument("input", help="CSV file, or - for stdin")
    p.add_argument("--labels", default="none", help="last|first|<index>|none, comma list allowed")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--timings", action="store_true",
                   help="report runtime_ms (makes output non-reproducible)")
    _add_run(p)
    _add_select_opts(p)
    _add_std(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="selector accuracy over simulated data sets")
    _add_run(p)
    _add_select_opts(p)
    _add_mixture(p)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--save-data", default=None, help="directory for the generated CSV files")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("df-curve", help="estimated df against the plug-in model size k'")
    p.add_argument("input", nargs="?", default=None, help="CSV file (omit to simulate)")
    p.add_argument("--labels", default="none")
    p.add_argument("--k-list", "--ks", dest="k_list", default="5,10,15")
    p.add_argument("--kprime", default="1:30")
    p.add_argument("--inits", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv",), default="csv")
    _add_std(p)
    _add_mixture(p)
    p.set_defaults(func=cmd_df_curve)

    p = sub.add_parser("oracle", help="direct-sampling df next to the estimate and kd")
    _add_run(p, kmax=10)
    _add_mixture(p)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--kprime", type=int, default=None, help="plug-in model size (default kmax+1)")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("simulate", "oracle", "df-curve"):
        # Mixture sizes arrive as strings so simulate can take lists.
        if args.command != "simulate":
            try:
                args.k, args.d = int(args.k), int(args.d)
            except ValueError:
                print("kselect: error: --k and --d must be integers", file=sys.stderr)
                return EXIT_CONFIG
    try:
        text = args.func(args)
        _emit(text, getattr(args, "out", None))
    except InputError as exc:
        print(f"kselect: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, KTooLarge, RejectionFailure) as exc:
        print(f"kselect: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("internal error", exc_info=True)
        print(f"kselect: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
