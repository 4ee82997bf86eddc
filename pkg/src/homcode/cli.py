"""Command-line front end.

Exit status: 0 when every check passes, 1 when a check fails, 2 for
configuration errors (bad flags, malformed config, unknown groups).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import experiments as ex
from .catalog import CatalogEntry, CatalogError, UnknownGroupError, catalog, parse_catalog
from .combinatorial import verify_list_bound
from .decoder import NOISE_MODELS, DecoderParams, list_decode
from .groups import Group, GroupError, classify
from .homs import HypothesisError, format_affine, parse_group_word

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SEED_ENV = "HOMCODE_SEED"


class ConfigError(Exception):
    pass


@dataclass
class Settings:
    seed: int = ex.DEFAULT_SEED
    group: str | None = None
    target: str | None = None
    epsilon: float = 0.1
    seeds: int = 100
    trials: int = 1000
    noise: str = "uniform-random-values"
    paper_default_loops: bool = False
    out: str | None = None
    catalog: str | None = None
    decoder: dict | None = None


_TYPES = {
    "seed": int, "group": str, "target": str, "epsilon": (int, float), "seeds": int, "trials": int,
    "noise": str, "paper_default_loops": bool, "out": str, "catalog": str, "decoder": dict,
}


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    for key, value in data.items():
        if key not in _TYPES:
            raise ConfigError(f"{path}: unknown key {key!r}")
        want = _TYPES[key]
        if value is not None and (not isinstance(value, want) or (want is int and isinstance(value, bool))):
            raise ConfigError(f"{path}: key {key!r} has the wrong type ({type(value).__name__})")
    return data


def resolve_settings(args: argparse.Namespace) -> Settings:
    s = Settings()
    if args.config:
        for k, v in load_config(args.config).items():
            setattr(s, k, v)
    for f in fields(Settings):
        v = getattr(args, f.name, None)
        if v is not None and v is not False:
            setattr(s, f.name, v)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            s.seed = int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    if not 0 < s.epsilon < 1:
        raise ConfigError(f"epsilon must lie in (0, 1), got {s.epsilon}")
    if s.seeds < 1 or s.trials < 1:
        raise ConfigError("seeds and trials must be positive")
    if s.noise not in NOISE_MODELS:
        raise ConfigError(f"noise must be one of {', '.join(NOISE_MODELS)}")
    if s.decoder:
        allowed = {f.name for f in fields(DecoderParams)} - {"epsilon", "seed"}
        bad = set(s.decoder) - allowed
        if bad:
            raise ConfigError(f"decoder: unknown keys {sorted(bad)}")
    return s


class Groups:
    """Lookup through a user catalog file first, then the built-ins."""

    def __init__(self, path: str | None):
        self.extra: dict[str, Group] = {}
        if path:
            try:
                text = Path(path).read_text()
            except OSError as e:
                raise ConfigError(f"{path}: cannot read catalog: {e.strerror}") from None
            try:
                self.extra = parse_catalog(text)
            except CatalogError as e:
                raise ConfigError(f"{path}:{e.line}: {e}" if e.line else f"{path}: {e}") from None

    def __call__(self, name: str | None, what: str) -> Group:
        if not name:
            raise ConfigError(f"--{what} is required")
        if name in self.extra:
            return self.extra[name]
        try:
            return ex.group(name)
        except (UnknownGroupError, GroupError) as e:
            raise ConfigError(f"{what} {name!r}: {e}") from None


class Output:
    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        if self.dir:
            (self.dir / name).write_text(text)


def _envelope(command: str, s: Settings, **payload) -> str:
    params = {"epsilon": s.epsilon, "seeds": s.seeds, "trials": s.trials, "noise": s.noise,
              "paper_default_loops": s.paper_default_loops, "decoder": s.decoder or {},
              "group": s.group, "target": s.target}
    return ex.dumps({"schema": f"homcode.{command}/1", "seed": s.seed, "params": params, **payload})


def _print_rows(columns, rows) -> None:
    print("\t".join(columns))
    for r in rows:
        print("\t".join(str(r.get(c, "")) for c in columns))


# --------------------------------------------------------------------------
# subcommands


def cmd_catalog(s: Settings, groups: Groups, out: Output) -> int:
    entries = catalog()
    for name, G in groups.extra.items():
        entries.append(CatalogEntry(name, G.order, classify(G), None))
    cols = ("name", "order", "abelian", "nilpotent", "supersolvable", "solvable", "isomorphic_to")
    rows = [{"name": e.name, "order": e.order, **{k: getattr(e.flags, k) for k in cols[2:6]},
             "isomorphic_to": e.isomorphic_to or ""} for e in entries]
    _print_rows(cols, rows)
    out.write("catalog.csv", ex.rows_to_csv(cols, rows))
    return EXIT_OK


def cmd_lambda(s: Settings, groups: Groups, out: Output) -> int:
    if s.group or s.target:
        G, H = groups(s.group, "group"), groups(s.target, "target")
        try:
            rows, skipped = [ex.lambda_row(G, H)], []
        except HypothesisError as e:
            raise ConfigError(str(e)) from None
    else:
        rows, skipped = ex.lambda_sweep()
    _print_rows(ex.LAMBDA_COLUMNS, rows)
    bad = [r for r in rows if not r["match"]]
    print(f"{len(rows)} pairs, {len(bad)} mismatches, {len(skipped)} skipped over the affine-hom cap")
    out.write("lambda.csv", ex.rows_to_csv(ex.LAMBDA_COLUMNS, rows))
    out.write("lambda.json", _envelope("lambda", s, pairs=len(rows), mismatches=bad, skipped=skipped))
    return EXIT_FAIL if bad else EXIT_OK


def cmd_johnson(s: Settings, groups: Groups, out: Output) -> int:
    pairs = [(s.group, s.target)] if (s.group or s.target) else list(ex.JOHNSON_PAIRS)
    rows = []
    for g, h in pairs:
        rows += ex.johnson_sweep(groups(g, "group"), groups(h, "target"), s.trials, s.seed)
    bad = [r for r in rows if not r["holds"]]
    print(f"{len(rows)} instances, {len(bad)} violations")
    out.write("johnson.csv", ex.rows_to_csv(ex.JOHNSON_COLUMNS, rows))
    out.write("johnson.json", _envelope("johnson", s, instances=len(rows), violations=bad))
    return EXIT_FAIL if bad else EXIT_OK


def cmd_list_bound(s: Settings, groups: Groups, out: Output) -> int:
    G, H = groups(s.group or "Z2^4", "group"), groups(s.target or "Z2", "target")
    try:
        rep = verify_list_bound(G, H, s.epsilon, s.trials, s.seed)
    except HypothesisError as e:
        raise ConfigError(str(e)) from None
    d = rep.summary()
    print(f"{G.name} -> {H.name}, eps={s.epsilon}: max list size {rep.max_list_size}, "
          f"sanity ceiling {rep.sanity_bound:.0f} ({'ok' if rep.sanity_ok else 'exceeded'}), "
          f"log10 bound {rep.bound_log10:.1f}")
    out.write("list_bound.csv", rep.to_csv())
    out.write("list_bound.json", _envelope("list-bound", s, report=d))
    return EXIT_OK if rep.bound_ok else EXIT_FAIL


def _params_factory(s: Settings, G: Group, H: Group):
    extra = dict(s.decoder or {})
    if s.paper_default_loops:
        base = DecoderParams.paper_defaults(s.epsilon, G, H)
        print(f"literal loop counts: outer {base.outer_repeats}, extend {base.extend_repeats}, "
              f"prune {base.prune_repeats}", file=sys.stderr)
        return lambda seed: DecoderParams(**{**base.to_dict(), **extra, "seed": seed})
    return lambda seed: DecoderParams.desk(s.epsilon, seed=seed, **extra)


def cmd_decode(s: Settings, groups: Groups, out: Output, word: str | None) -> int:
    if word:
        known = dict(groups.extra)
        try:
            text = Path(word).read_text()
        except OSError as e:
            raise ConfigError(f"{word}: cannot read word: {e.strerror}") from None
        header = text.split()
        for name in (header[3:4] + header[5:6]) if len(header) >= 6 else []:
            known.setdefault(name, groups(name, "group"))
        try:
            f = parse_group_word(text, known)
        except ValueError as e:
            raise ConfigError(f"{word}:{e}") from None
        params = _params_factory(s, f.source, f.target)(s.seed)
        rep = list_decode(f, params)
        for phi in rep.recovered:
            print(format_affine(phi))
        print(f"{len(rep.recovered)} recovered, {rep.queries} queries")
        out.write("decode.json", rep.to_json())
        return EXIT_OK if all(phi.is_affine_homomorphism() for phi in rep.recovered) else EXIT_FAIL

    G, H = groups(s.group or "Z2^4", "group"), groups(s.target or "Z2", "target")
    rows = ex.decode_trials(G, H, s.epsilon, s.seeds, s.seed, s.noise, params_for=_params_factory(s, G, H))
    summ = ex.summarize_decode(rows)
    print(f"{G.name} -> {H.name}: planted recovered {summ['planted']}/{summ['trials']}, "
          f"validated {summ['validated']}/{summ['trials']}, mean queries {summ['mean_queries']:.1f}")
    out.write("decode.csv", ex.rows_to_csv(ex.DECODE_COLUMNS, rows))
    out.write("decode.json", _envelope("decode", s, summary=summ))
    return EXIT_OK if summ["validated"] == summ["trials"] else EXIT_FAIL


def cmd_worst_case(s: Settings, out: Output, p: int, n: int, m: int) -> int:
    try:
        row = ex.worst_case_row(p, n, m)
    except (ValueError, GroupError) as e:
        raise ConfigError(str(e)) from None
    _print_rows(ex.WORST_CASE_COLUMNS, [row])
    out.write("worst_case.csv", ex.rows_to_csv(ex.WORST_CASE_COLUMNS, [row]))
    out.write("worst_case.json", _envelope("worst-case", s, result=row))
    return EXIT_OK if row["match"] else EXIT_FAIL


def cmd_verify_all(s: Settings, out: Output) -> int:
    results = ex.run_all(s.seed)
    for r in results:
        print(r.line())
        out.write(f"criterion_{r.number}.csv", r.to_csv())
        out.write(f"criterion_{r.number}.json", r.to_json())
    ok = all(r.passed for r in results)
    out.write("summary.json", _envelope("verify-all", s, passed=ok, criteria={r.number: r.passed for r in results}))
    print("all criteria pass" if ok else "some criteria fail")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--catalog", help="extra groups in catalog file format")
    common.add_argument("--group", help="source group G")
    common.add_argument("--target", help="target group H")
    common.add_argument("--epsilon", type=float)
    common.add_argument("--seeds", type=int, help="number of seeded decoding trials")
    common.add_argument("--trials", type=int, help="number of trials for sweeps")
    common.add_argument("--noise", choices=NOISE_MODELS)
    common.add_argument("--paper-default-loops", action="store_true", dest="paper_default_loops",
                        help="use the literal polynomial loop counts (very slow)")
    common.add_argument("--out", help="directory for CSV/JSON artifacts")

    parser = argparse.ArgumentParser(prog="homcode", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("catalog", parents=[common], help="list built-in groups")
    sub.add_parser("lambda", parents=[common], help="agreement constant, formula vs brute force")
    sub.add_parser("johnson", parents=[common], help="Johnson bound sweep")
    sub.add_parser("list-bound", parents=[common], help="list-size sweep")
    d = sub.add_parser("decode", parents=[common], help="decoder trials or decode a word file")
    d.add_argument("--word", help="word file to decode instead of planted trials")
    w = sub.add_parser("worst-case", parents=[common], help="exponential list instance Z_p^n -> Z_p^m")
    w.add_argument("p", type=int)
    w.add_argument("n", type=int)
    w.add_argument("m", type=int)
    sub.add_parser("verify-all", parents=[common], help="run every acceptance criterion")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        s = resolve_settings(args)
        groups = Groups(s.catalog)
        out = Output(s.out)
        cmd = args.command
        if cmd == "catalog":
            return cmd_catalog(s, groups, out)
        if cmd == "lambda":
            return cmd_lambda(s, groups, out)
        if cmd == "johnson":
            return cmd_johnson(s, groups, out)
        if cmd == "list-bound":
            return cmd_list_bound(s, groups, out)
        if cmd == "decode":
            return cmd_decode(s, groups, out, args.word)
        if cmd == "worst-case":
            return cmd_worst_case(s, out, args.p, args.n, args.m)
        return cmd_verify_all(s, out)
    except ConfigError as e:
        print(f"homcode: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
