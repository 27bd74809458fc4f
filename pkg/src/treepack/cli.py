"""Command-line driver: ``treepack pack`` and ``treepack diagnose``.

Exit codes: 0 certified / all checks passed, 1 input error, 2 retryable
failure (a round or the correction ran out of room; try another seed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .errors import CapabilityError, InputError, TreepackError
from .graph import Exact, Sampled, bad_profile, quasirandom_defect, read_edge_list
from .limping import lemma_suite
from .pipeline import PipelineConfig, pack_family, paper_constants
from .trees import generate_family, read_family

EXIT_OK, EXIT_INPUT, EXIT_RETRY = 0, 1, 2


def _threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("TREEPACK_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"TREEPACK_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def _dump(obj, dest: str | None) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    if dest in (None, "-"):
        print(text)
    else:
        Path(dest).write_text(text + "\n")
    return text


def _content_hash(*chunks: str) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c.encode())
        h.update(b"\0")
    return h.hexdigest()


def _write_manifest(path: str | None, config: dict, input_hash: str, outputs: dict,
                    timings: dict) -> None:
    if not path:
        return
    manifest = {
        "treepack": __version__,
        "config": config,
        "input_hash": input_hash,
        "outputs": outputs,
        "timings": timings,  # the only non-deterministic field anywhere
    }
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


# -- pack -----------------------------------------------------------------------------

def cmd_pack(a: argparse.Namespace) -> int:
    if (a.trees is None) == (a.generate is None):
        raise InputError("give exactly one of --trees or --generate")
    for name in ("n", "epsilon", "delta"):
        if getattr(a, name) is None:
            raise InputError(f"--{name} is required")
    if a.epsilon <= 0 or a.delta < 1 or a.n < 1:
        raise InputError("need --n >= 1, --epsilon > 0 and --delta >= 1")

    if a.paper_faithful:
        const = paper_constants(a.epsilon, a.delta)
        need = const["log10_n0_lower_bound"]
        if math.log10(a.n) < need:
            print(f"paper-faithful constants: r = 10^{const['log10_r']:.1f}, "
                  f"n_0 >= 10^{need:.1f}; n={a.n} is too small", file=sys.stderr)
            return EXIT_INPUT

    if a.trees is not None:
        src = Path(a.trees).read_text()
        fam = read_family(a.trees)
        input_desc = src
    else:
        fam = generate_family(a.generate, a.seed)
        input_desc = f"generate:{a.generate}:seed={a.seed}"

    cfg = PipelineConfig(
        n=a.n, epsilon=a.epsilon, delta=a.delta, seed=a.seed, retries=a.retries,
        threads=_threads(a.threads), paper_faithful=a.paper_faithful,
        **{k: v for k, v in (("r", a.rounds), ("c", a.groups), ("gamma", a.gamma),
                             ("alpha", a.alpha), ("beta", a.beta), ("rho", a.rho))
           if v is not None},
    )
    cfg.validate()
    echo = {k: v for k, v in vars(a).items() if k not in ("func", "out", "report", "manifest")}
    input_hash = _content_hash(input_desc, json.dumps(echo, sort_keys=True))
    t0 = time.perf_counter()
    res = pack_family(fam, cfg)
    wall = time.perf_counter() - t0

    if res.success:
        doc = res.to_json()
        metrics = doc.pop("metrics")
    else:
        doc, metrics = res.to_json(), res.details
    doc["input_hash"] = input_hash
    _dump(doc, a.out)
    if a.report:
        _dump({"input_hash": input_hash, "metrics": metrics}, a.report)
    _write_manifest(a.manifest, echo, input_hash,
                    {"packing": a.out, "report": a.report}, {"pack_seconds": wall})
    if res.success:
        print(f"certified packing of {len(res.maps)} trees into K_{res.host_order}", file=sys.stderr)
        return EXIT_OK
    print(f"failed at stage {res.stage}: {res.message}", file=sys.stderr)
    return EXIT_RETRY if res.retryable else EXIT_INPUT


# -- diagnose -------------------------------------------------------------------------

def cmd_diagnose(a: argparse.Namespace) -> int:
    if a.lemma_suite == (a.graph is not None):
        raise InputError("give exactly one of --graph or --lemma-suite")
    if a.lemma_suite:
        t0 = time.perf_counter()
        reports = lemma_suite(a.seed, a.trials)
        out = {name: rep.to_json() for name, rep in reports}
        _dump(out, a.out)
        _write_manifest(a.manifest, {"lemma_suite": True, "seed": a.seed, "trials": a.trials},
                        _content_hash("lemma-suite", str(a.seed), str(a.trials)),
                        {"report": a.out}, {"seconds": time.perf_counter() - t0})
        return EXIT_OK if all(rep.all_passed for _, rep in reports) else EXIT_RETRY

    if a.gamma is None or a.delta is None:
        raise InputError("--graph needs --gamma and --delta")
    g = read_edge_list(a.graph)
    mode = Exact() if a.exact else Sampled(a.samples, a.seed)
    t0 = time.perf_counter()
    defect = quasirandom_defect(g, mode)
    prof = bad_profile(g, a.gamma, a.delta, None if a.exact else Sampled(a.samples, a.seed))
    out = {"order": g.m, "edges": g.edge_count, "density": g.density,
           "defect": defect.to_json(), "bad_profile": prof.to_json()}
    _dump(out, a.out)
    _write_manifest(a.manifest, {"graph": a.graph, "gamma": a.gamma, "delta": a.delta,
                                 "exact": a.exact, "samples": a.samples, "seed": a.seed},
                    _content_hash(Path(a.graph).read_text()), {"report": a.out},
                    {"seconds": time.perf_counter() - t0})
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treepack", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"treepack {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pk = sub.add_parser("pack", help="pack a tree family into a complete graph")
    src = pk.add_argument_group("input")
    src.add_argument("--trees", help="tree family file (JSON lines)")
    src.add_argument("--generate", help='generator descriptor, e.g. "random:n=200,count=40"')
    pk.add_argument("--n", type=int)
    pk.add_argument("--epsilon", type=float)
    pk.add_argument("--delta", type=int)
    pk.add_argument("--rounds", type=int, help="number of nibble rounds r")
    pk.add_argument("--groups", type=int, help="number of order groups c")
    pk.add_argument("--gamma", type=float)
    pk.add_argument("--alpha", type=float)
    pk.add_argument("--beta", type=float)
    pk.add_argument("--rho", type=float)
    pk.add_argument("--seed", type=int, default=0)
    pk.add_argument("--retries", type=int, default=3)
    pk.add_argument("--threads", type=int)
    pk.add_argument("--paper-faithful", action="store_true",
                    help="use the asymptotic constants; refuses unless n clears n_0")
    pk.add_argument("--out", default="-", help="packing JSON (default stdout)")
    pk.add_argument("--report", help="metrics JSON")
    pk.add_argument("--manifest", help="run manifest JSON (config echo, hash, timings)")
    pk.set_defaults(func=cmd_pack)

    dg = sub.add_parser("diagnose", help="graph quasirandomness or sampler diagnostics")
    dg.add_argument("--graph", help="edge-list file")
    dg.add_argument("--gamma", type=float)
    dg.add_argument("--delta", type=int)
    dg.add_argument("--exact", action="store_true")
    dg.add_argument("--samples", type=int, default=10_000)
    dg.add_argument("--lemma-suite", action="store_true")
    dg.add_argument("--trials", type=int, default=100_000)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--out", default="-")
    dg.add_argument("--manifest")
    dg.set_defaults(func=cmd_diagnose)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return a.func(a)
    except (InputError, CapabilityError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TreepackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RETRY


if __name__ == "__main__":
    sys.exit(main())
