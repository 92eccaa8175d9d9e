"""Command line entry point: ``malle-random <subcommand> [--config FILE] [flags]``.

Every run resolves a RunConfig (config file first, flags on top), executes one
subcommand and writes a JSON report carrying the resolved config and the code
version.  Reports are serialised with sorted keys and no timestamp, so equal
configs give byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .category import (FiniteLocalObject, e2m_membership, epi_product_exists,
                       epi_product_oracle)
from .errors import MalleRandomError, OracleFailure, ValidationError
from .groups import (NO_QUALIFYING_SUBGROUP, ab_torsion_order, beta_invariant, k_classes,
                     make_weight, malle_ab, min_weight_gen_check, parse_group)
from .local import (LocalConditions, Place, admissibility_check, bundled_wild_tables,
                    describe_hom, is_wild, load_wild_table, local_hom_set, place_of, primes_upto)
from .model import (MODES, build_profile, exact_survival, gap_report, grunwald_diagnostic,
                    lln_experiment, moment_experiment, surjective_target)
from .oracles import (malle_ab_oracle, tame_exponents_oracle, tame_pairs_oracle,
                      wild_table_oracle)
from .sampling import ENUM_CAP
from .series import (BaseField, build_profile as series_profile, decay_probe, oracle_coeffs,
                     prediction, tauberian_table)

log = logging.getLogger("malle_random")

SCHEMA_VERSION = 1
SUBCOMMANDS = ("invariants", "local", "series", "constant", "moments", "simulate", "lln",
               "grunwald", "oracle")


@dataclasses.dataclass
class RunConfig:
    subcommand: str
    group: str = "C2"
    degree: int | None = None
    weight: str = "ind"
    base: dict = dataclasses.field(default_factory=dict)
    conditions: dict = dataclasses.field(default_factory=dict)
    places: str = "norm<=5"
    target_places: str | None = None
    target_index: int = 0
    local_places: list = dataclasses.field(default_factory=lambda: [3])
    X: int = 1000
    checkpoints: list = dataclasses.field(default_factory=list)
    pmax: int = 10**6
    samples: int = 1000
    seed: int | None = None
    mode: str = "no-torsion"
    engine: str = "auto"
    enum_cap: int = ENUM_CAP
    frame_cap: int = 10**6
    wild_tables: list = dataclasses.field(default_factory=list)
    parallelism: int = 1
    out: str | None = None
    csv: str | None = None
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValidationError(f"unknown subcommand {self.subcommand!r}")
        if self.schema != SCHEMA_VERSION:
            raise ValidationError(f"config schema {self.schema} unsupported (want {SCHEMA_VERSION})")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        for name in ("X", "pmax", "samples", "enum_cap", "frame_cap", "parallelism"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.subcommand in ("simulate", "lln", "grunwald") and self.seed is None:
            raise ValidationError(f"{self.subcommand} is stochastic and needs an explicit --seed")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)


# parsing helpers

def parse_conditions(text: str) -> dict:
    """``"default=all,inf=all,2=unramified,7=0|1"`` -> conditions dict."""
    out: dict[str, Any] = {"overrides": {}}
    for item in filter(None, (t.strip() for t in text.split(","))):
        if "=" not in item:
            raise ValidationError(f"bad condition {item!r}; expected key=rule")
        k, v = (s.strip() for s in item.split("=", 1))
        if k in ("default", "archimedean"):
            out[k] = v
        elif "|" in v or v.isdigit():
            out["overrides"][k] = [int(x) for x in v.split("|")]
        else:
            out["overrides"][k] = v
    return out


def make_conditions(d: dict) -> LocalConditions:
    d = dict(d)
    over = {}
    for k, v in d.get("overrides", {}).items():
        key = k if k in ("inf", "real") else int(k)
        over[key] = tuple(v) if isinstance(v, list) else v
    cr = d.get("class_rule")
    return LocalConditions(d.get("default", "all"), d.get("archimedean", "all"), over,
                           (cr[0], tuple(cr[1]), cr[2]) if cr else None)


def make_base(d: dict) -> BaseField:
    d = dict(d)
    real, cplx = int(d.pop("real", 1)), int(d.pop("complex", 0))
    arch = tuple(Place("real", label="inf" if i == 0 else f"inf{i}") for i in range(real))
    arch += tuple(Place.complex(f"C{i}") for i in range(cplx))
    allowed = {"name", "m", "unit_rank", "residue"}
    if set(d) - allowed:
        raise ValidationError(f"unknown base keys: {sorted(set(d) - allowed)}")
    if arch != (Place.real(),) and "unit_rank" not in d:
        d["unit_rank"] = len(arch) - 1
    return BaseField(archimedean=arch, **d)


def group_of(cfg: RunConfig):
    spec = cfg.group if cfg.degree is None else f"{cfg.group}@{cfg.degree}"
    return parse_group(spec)


def tables_of(cfg: RunConfig):
    return tuple(load_wild_table(p) for p in cfg.wild_tables)


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n"


# subcommands

def cmd_invariants(cfg: RunConfig) -> dict:
    G = group_of(cfg)
    w = make_weight(G, cfg.weight)
    inv = malle_ab(G, None, w)
    beta = beta_invariant(G, None, w)
    oa, ob = malle_ab_oracle(G, "ind" if w.name == "ind" else "one")
    return {"group": G.name, "order": G.order, "degree": G.degree, "weight": w.name,
            "a": inv.a, "b": inv.b,
            "minimal_classes": [[G.label(g) for g in c.members] for c in inv.minimal_classes],
            "k_classes": len(k_classes(G)),
            "beta": None if beta is NO_QUALIFYING_SUBGROUP else beta,
            "abelian_invariants": list(G.abelian_invariants),
            "ab_torsion_order_m2": ab_torsion_order(G, 2),
            "minimal_weight_generates": min_weight_gen_check(G, w),
            "oracle": {"a": oa, "b": ob, "agrees": (oa, ob) == (inv.a, inv.b)}}


def cmd_local(cfg: RunConfig) -> dict:
    G = group_of(cfg)
    w = make_weight(G, cfg.weight)
    base = make_base(cfg.base)
    tables = tables_of(cfg)
    out = []
    for key in cfg.local_places:
        v = place_of(key)
        hs = local_hom_set(G, v, m=base.m, wild_tables=tables)
        exps = hs.exponents(w)
        out.append({"place": v.label, "wild": is_wild(G, v), "count": len(hs),
                    "unramified": len(hs.unramified()), "generators": list(hs.generators),
                    "exponents": {str(k): exps.count(k) for k in sorted(set(exps))},
                    "homs": [describe_hom(G, hs, i, w) for i in range(len(hs))]})
    return {"group": G.name, "weight": w.name, "places": out}


def cmd_series(cfg: RunConfig) -> dict:
    G = group_of(cfg)
    base = make_base(cfg.base)
    sigma = make_conditions(cfg.conditions)
    checkpoints = sorted(cfg.checkpoints or [10**k for k in range(1, 7) if 10**k <= cfg.X])
    if not admissibility_check(sigma, G).admissible:
        rows = decay_probe(G, cfg.weight, sigma, checkpoints, base, tables_of(cfg))
        return {"admissible": False, "decay": [
            {"X": r.X, "restricted": r.restricted, "admissible_sum": r.admissible,
             "normalized": r.normalized, "below_inverse_X": r.normalized < 1 / r.X} for r in rows]}
    prof = series_profile(G, cfg.weight, max(cfg.X, max(checkpoints)), sigma, base, tables_of(cfg))
    pred = prediction(G, cfg.weight, sigma, base, pmax=cfg.pmax, wild_tables=tables_of(cfg))
    table = tauberian_table(prof, checkpoints, pred)
    head = min(prof.X, 50)
    return {"admissible": True, "arch_multiplier": prof.arch_multiplier, "prefactor": prof.prefactor,
            "coefficients": {str(n): prof.coeffs[n] for n in range(1, head + 1)},
            "tauberian": [{"X": r.X, "A": r.A, "A_float": float(r.A), "predicted": r.predicted,
                           "ratio": r.ratio} for r in table],
            "prediction": pred.to_json()}


def cmd_constant(cfg: RunConfig) -> dict:
    G = group_of(cfg)
    pred = prediction(G, cfg.weight, make_conditions(cfg.conditions), make_base(cfg.base),
                      pmax=cfg.pmax, wild_tables=tables_of(cfg))
    return {"group": G.name, "weight": make_weight(G, cfg.weight).name, **pred.to_json()}


def _profile(cfg: RunConfig, engine: str | None = None):
    G = group_of(cfg)
    return build_profile(G, cfg.places, make_conditions(cfg.conditions), cfg.weight,
                         make_base(cfg.base), engine=engine or cfg.engine,
                         frame_cap=cfg.frame_cap, enum_cap=cfg.enum_cap,
                         wild_tables=tables_of(cfg))


def _target(cfg: RunConfig, profile) -> FiniteLocalObject:
    if not cfg.target_places:
        return surjective_target(profile, cfg.target_index)
    sub = build_profile(profile.group, cfg.target_places, profile.sigma, profile.weight,
                        profile.base, engine="generic", frame_cap=cfg.frame_cap,
                        enum_cap=cfg.enum_cap, wild_tables=tables_of(cfg))
    return surjective_target(sub, cfg.target_index)


def cmd_moments(cfg: RunConfig) -> dict:
    profile = _profile(cfg, "generic")
    G = profile.group
    sv = exact_survival(profile)
    k = profile.n_plain()
    rows = []
    for j in np.nonzero(profile.surjective)[0][:200]:
        j = int(j)
        rows.append({"local_data": profile.describe(j),
                     "no_torsion": sv.probability(j, k, "no-torsion"),
                     "structural": sv.probability(j, k, "structural")})
    n = len(profile.places)
    closed = Fraction(1, ab_torsion_order(G, profile.base.m)) * Fraction(G.order) ** (1 - n)
    return {"group": G.name, "places": [v.label for v in profile.places],
            "closed_form_full_S": closed, "surjective_tuples": int(profile.surjective.sum()),
            "table_by_size": {str(s): Fraction(1, ab_torsion_order(G, profile.base.m))
                              * Fraction(G.order) ** (1 - s) for s in range(1, n + 1)},
            "tuples": rows, "tuples_listed": len(rows)}


def cmd_simulate(cfg: RunConfig) -> dict:
    profile = _profile(cfg, "generic")
    target = _target(cfg, profile)
    return moment_experiment(profile, target, cfg.samples, cfg.seed, cfg.mode,
                             workers=cfg.parallelism).to_json()


def cmd_lln(cfg: RunConfig) -> dict:
    G = group_of(cfg)
    Xs = cfg.checkpoints or [cfg.X]
    engine = "abelian" if cfg.engine == "auto" else cfg.engine
    rep = lln_experiment(G, cfg.weight, Xs, cfg.samples, cfg.seed, make_conditions(cfg.conditions),
                         make_base(cfg.base), mode=cfg.mode, engine=engine, pmax=cfg.pmax,
                         workers=cfg.parallelism)
    return rep.to_json()


def cmd_grunwald(cfg: RunConfig) -> dict:
    profile = _profile(cfg, "generic")
    subs = cfg.target_places.split(",") if cfg.target_places else None
    return grunwald_diagnostic(profile, cfg.samples, cfg.seed, subs, cfg.mode).to_json()


def cmd_oracle(cfg: RunConfig) -> dict:
    """Brute-force cross-checks for the configured group; any failure exits 5."""
    G = group_of(cfg)
    w = make_weight(G, cfg.weight)
    checks = []

    def check(name, ok, detail=""):
        checks.append({"check": name, "ok": bool(ok), "detail": detail})

    inv = malle_ab(G, None, w)
    o = malle_ab_oracle(G, "ind" if w.name == "ind" else "one")
    check("malle_ab", o == (inv.a, inv.b), f"fast {(inv.a, inv.b)} oracle {o}")
    for p in (int(x) for x in primes_upto(50)):
        if G.order % p == 0:
            continue
        hs = local_hom_set(G, Place.finite(p))
        want = tame_exponents_oracle(G, p, "ind" if w.name == "ind" else "one")
        got = sorted(hs.exponents(w))
        check(f"tame_homs_q{p}", len(hs) == len(tame_pairs_oracle(G, p)) and got == want,
              f"{len(hs)} homs")
        check(f"unramified_q{p}", len(hs.unramified()) == G.order)
    for t in bundled_wild_tables():
        check(f"wild_table_p{t.p}_{t.group_spec}", wild_table_oracle(t))
    sigma = make_conditions(cfg.conditions)
    X = min(cfg.X, 500)
    try:
        prof = series_profile(G, w, X, sigma, make_base(cfg.base), tables_of(cfg))
        oc = oracle_coeffs(G, w, X, sigma, make_base(cfg.base), tables_of(cfg))
        check(f"sieve_vs_patterns_X{X}", prof.coeffs.fractions() == oc)
    except MalleRandomError as exc:
        check("sieve_vs_patterns", True, f"skipped: {exc}")
    try:
        profile = _profile(cfg, "generic")
        gap = gap_report(profile)
        check("gap_report_consistent", gap.summary["consistent"])
        places = [v.key for v in profile.places][:3]
        if len(places) >= 2 and G.order <= 8:
            sub = build_profile(G, ",".join(str(k) for k in places if k != "inf"), engine="generic")
            cols = np.nonzero(sub.surjective)[0][:6]
            objs = [surjective_target(sub, i) for i in range(len(cols))]
            agree = all(epi_product_exists(A, B).exists == epi_product_oracle(A, B)
                        for A in objs for B in objs)
            check("epi_product_vs_brute_force", agree, f"{len(objs) ** 2} pairs")
            mult = all(e2m_membership(A, B).multiplicative for A in objs for B in objs)
            check("moment_multiplicativity", mult)
    except MalleRandomError as exc:
        check("generic_profile", True, f"skipped: {exc}")
    failed = [c["check"] for c in checks if not c["ok"]]
    report = {"group": G.name, "checks": checks, "failed": failed}
    if failed:
        raise OracleFailure(f"oracle checks failed: {', '.join(failed)}", report)
    return report


COMMANDS = {"invariants": cmd_invariants, "local": cmd_local, "series": cmd_series,
            "constant": cmd_constant, "moments": cmd_moments, "simulate": cmd_simulate,
            "lln": cmd_lln, "grunwald": cmd_grunwald, "oracle": cmd_oracle}


# argument handling

def _number(text: str) -> int:
    try:
        return int(float(text)) if any(c in text for c in "eE.") else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="malle-random", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON RunConfig; flags override it")
        p.add_argument("--group")
        p.add_argument("--degree", type=int)
        p.add_argument("--weight", help="ind | ramified-primes")
        p.add_argument("--conditions", help='e.g. "2=unramified,inf=all,default=all"')
        p.add_argument("--places", help='"norm<=B" or "inf,2,3,5"')
        p.add_argument("--target-places", dest="target_places")
        p.add_argument("--target-index", dest="target_index", type=int)
        p.add_argument("--local-places", dest="local_places",
                       help="comma-separated places for the local subcommand")
        p.add_argument("--X", "-X", dest="X", type=_number)
        p.add_argument("--checkpoints", help="comma-separated bounds")
        p.add_argument("--pmax", type=_number)
        p.add_argument("--samples", type=_number)
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--engine", choices=("auto", "generic", "abelian"))
        p.add_argument("--enum-cap", dest="enum_cap", type=_number)
        p.add_argument("--frame-cap", dest="frame_cap", type=_number)
        p.add_argument("--wild-table", dest="wild_tables", action="append")
        p.add_argument("--parallelism", type=int)
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--csv", help="also write the report rows as CSV")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data: dict[str, Any] = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if data.get("subcommand", args.subcommand) != args.subcommand:
            raise ValidationError("config file is for a different subcommand")
    data["subcommand"] = args.subcommand
    for key, val in vars(args).items():
        if key in ("config", "subcommand", "verbose") or val is None:
            continue
        if key == "conditions":
            val = parse_conditions(val)
        elif key == "checkpoints":
            val = [_number(x) for x in val.split(",") if x.strip()]
        elif key == "local_places":
            val = [x.strip() for x in val.split(",") if x.strip()]
        data[key] = val
    return RunConfig.from_json(data)


def _flat_rows(report: dict) -> list[dict]:
    for key in ("rows", "tuples", "tauberian", "decay", "checks"):
        if isinstance(report.get(key), list):
            return [{k: (json.dumps(v, default=_jsonable) if isinstance(v, (dict, list)) else v)
                     for k, v in r.items()} for r in report[key]]
    return [{k: v for k, v in report.items() if not isinstance(v, (dict, list))}]


def write_csv(path: str, report: dict) -> None:
    rows = _flat_rows(report)
    cols = sorted({k for r in rows for k in r})
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols)
        wr.writeheader()
        for r in rows:
            wr.writerow({k: _jsonable(v) if isinstance(v, (Fraction, np.generic)) else v
                         for k, v in r.items()})


def run(cfg: RunConfig) -> dict:
    body = COMMANDS[cfg.subcommand](cfg)
    return {"version": __version__, "config": cfg.to_json(), "report": body}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        report = run(cfg)
    except OracleFailure as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        if len(exc.args) > 1:
            sys.stdout.write(dumps({"version": __version__, "report": exc.args[1]}))
        return exc.exit_code
    except MalleRandomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    text = dumps(report)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.csv:
        write_csv(cfg.csv, report["report"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
