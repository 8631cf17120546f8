"""Command-line interface.

Exit codes: 0 success, 1 domain error, 2 usage error.  Stochastic commands
require ``--seed``; every experiment output embeds its configuration so a
run can be reproduced from the output alone.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analysis, flow
from .fixtures import FIXTURES, torus_state
from .flips import (
    DegenerateWidth,
    InapplicableWord,
    JoinStalled,
    flip,
    flip_matrix,
    height_matrix,
    resolve_word,
)
from .formats import ParseError, load, serialize, to_json
from .geometry import GeometryError, SurfaceState
from .triangulation import BACKWARD, FORWARD, Colour, TriangulationError

VERSION = "0.1.0"
DOMAIN_ERRORS = (
    TriangulationError,
    GeometryError,
    DegenerateWidth,
    InapplicableWord,
    JoinStalled,
    flow.FlowError,
    analysis.AnalysisError,
    ParseError,
    KeyError,
)
# the neat loop blue -> red -> blue on the torus, used to code trajectories
TORUS_THETA = ("c:R", "b:B")


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = None
    threads: int = 1
    version: str = VERSION

    def to_dict(self):
        return asdict(self)


def make_rng(seed, worker=0):
    """Counter-based generator for (seed, worker index)."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(worker)]))


def _shards(n, threads):
    base, extra = divmod(n, threads)
    return [base + (i < extra) for i in range(threads)]


def _parallel(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# inputs


def _triangulation(args):
    if getattr(args, "file", None):
        t, vectors = load(args.file)
        return t, vectors
    name = args.fixture or "torus"
    if name == "torus-state":
        st = torus_state()
        return st.triangulation, dict(st.vectors)
    if name not in FIXTURES:
        raise UsageError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return FIXTURES[name](), None


def _word_tokens(text):
    return [w for w in (text or "").split(",") if w.strip()]


def _emit(args, text, rows=None, header=None, doc=None):
    """Human text to stdout, or CSV/JSON to ``--out`` when given."""
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            if out.endswith(".json"):
                fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
            else:
                fh.write("# config: " + json.dumps(doc["config"], sort_keys=True) + "\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
    sys.stdout.write(text)


def _config(args, **params):
    seed = getattr(args, "seed", None)
    threads = getattr(args, "threads", 1) or 1
    return ExperimentConfig(args.command, params, seed, threads)


def _fmt(v):
    return format(float(v), ".17g")


# commands


def cmd_validate(args):
    t, _ = _triangulation(args)
    report = t.validate()
    lines = [f"valid: {report.ok}"] + [f"  {f}" for f in report.failures]
    if report.ok:
        lines.append(f"veering: {t.is_veering()}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0 if report.ok and t.is_veering() else 1


def cmd_stratum(args):
    t, _ = _triangulation(args)
    k = t.stratum_datum()
    sys.stdout.write(f"genus {k.genus} kappa {list(k.kappa)}\n")
    return 0


def cmd_flip(args):
    t, vectors = _triangulation(args)
    direction = BACKWARD if args.backward else FORWARD
    if vectors is not None:
        new, move = flip(SurfaceState(t, vectors), args.edge, direction)
        sys.stdout.write(f"# {move.token()}\n" + serialize(new.triangulation, new.vectors))
        return 0
    if not args.colour:
        raise UsageError("a triangulation without geometry needs --colour R or B")
    new = t.flip(args.edge, Colour(args.colour), direction)
    sys.stdout.write(serialize(new))
    return 0


def _matrix_text(M):
    return "[" + ",".join("[" + ",".join(str(v) for v in row) + "]" for row in M) + "]"


def cmd_matrix(args):
    t, _ = _triangulation(args)
    word = resolve_word(t, _word_tokens(args.word))
    M = height_matrix(word) if args.heights else flip_matrix(word)
    text = _matrix_text(M) + "\n"
    if args.verbose:
        text += f"labels {' '.join(t.labels)}\nmoves {','.join(word.tokens())}\n"
    sys.stdout.write(text)
    return 0


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command} is stochastic; --seed is required")


def _start_state(args):
    t, vectors = _triangulation(args)
    if vectors is not None:
        return flow.make_balanced(flow.FlowState.from_surface(SurfaceState(t, vectors)))[0]
    _require_seed(args)
    return flow.sample_state(t, make_rng(args.seed))


def _state_text(s):
    vec = s.surface_state().vectors
    return serialize(s.triangulation, vec)


def cmd_balance(args):
    s = _start_state(args)
    sys.stdout.write(_state_text(s))
    return 0


def cmd_flow(args):
    s = _start_state(args)
    traj = flow.run_trajectory(s, args.returns, args.renorm_every, seed=args.seed)
    cfg = _config(args, fixture=args.fixture, file=args.file, returns=args.returns, renorm_every=args.renorm_every)
    rows = [[i, _fmt(ev.roof), " ".join(ev.flipped), ev.symbol_key] for i, ev in enumerate(traj.events)]
    header = ["event_index", "roof", "flipped_labels", "symbol_key"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = "# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n" + buf.getvalue()
    if traj.abort_reason:
        text += f"# aborted: {traj.abort_reason}\n"
    _emit(args, text, rows, header, {"config": cfg.to_dict()})
    return 1 if traj.abort_reason else 0


def _theta(t, tokens):
    return resolve_word(t, tokens)


def cmd_code(args):
    s = _start_state(args)
    t, _ = _triangulation(args)
    theta = _theta(t, _word_tokens(args.theta) or list(TORUS_THETA))
    traj = flow.run_trajectory(s, args.returns, seed=args.seed)
    rec = flow.code_by_theta(traj, theta)
    cfg = _config(args, fixture=args.fixture, returns=args.returns, theta=list(theta.tokens()))
    doc = {
        "config": cfg.to_dict(),
        "segments": len(rec.symbols),
        "mean_length": float(np.mean([len(x) for x in rec.symbols])),
        "mean_duration": float(np.mean(rec.durations)),
        "tail_moves": len(rec.tail),
    }
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n", doc=doc)
    return 0


def random_unipotent(rng, d, n_factors):
    """Product of elementary matrices I + E_ij: nonnegative with determinant one."""
    A = np.eye(d, dtype=np.int64)
    for _ in range(n_factors):
        i, j = rng.choice(d, size=2, replace=False)
        E = np.eye(d, dtype=np.int64)
        E[i, j] = 1
        A = A @ E
    return A


def jacobian_trials(seed, n, max_d=6, max_factors=8):
    rng = make_rng(seed)
    out = []
    for _ in range(n):
        d = int(rng.integers(2, max_d + 1))
        A = random_unipotent(rng, d, int(rng.integers(1, max_factors + 1)))
        u = rng.dirichlet(np.ones(d))
        out.append((A, u, analysis.jacobian_full(A, u)))
    return out


def cmd_jacobian(args):
    _require_seed(args)
    trials = jacobian_trials(args.seed, args.trials)
    cfg = _config(args, trials=args.trials)
    rows = [[k, len(u), _fmt(r.analytic), _fmt(r.numeric), _fmt(r.rel_err)] for k, (A, u, r) in enumerate(trials)]
    worst = max(r.rel_err for _, _, r in trials)
    text = f"trials {len(trials)} worst_rel_err {worst:.3e}\n"
    _emit(args, text, rows, ["trial", "d", "analytic", "numeric", "rel_err"], {"config": cfg.to_dict(), "worst_rel_err": worst})
    return 0


def _kerckhoff_worker(seed, worker, n, fixture, Ms):
    t = FIXTURES[fixture]()
    rep = analysis.kerckhoff_estimate(t, Ms, n, make_rng(seed, worker))
    return {k: round(v * n) for k, v in rep.fractions.items()}, rep.horizon_exceeded, n


def kerckhoff_run(seed, n_samples, Ms=(10, 30, 100), fixture="torus", threads=1):
    jobs = [(seed, i, k, fixture, tuple(Ms)) for i, k in enumerate(_shards(n_samples, threads))]
    parts = _parallel(_kerckhoff_worker, jobs, threads)
    hits, capped, total = {}, 0, 0
    for h, c, n in parts:
        for k, v in h.items():
            hits[k] = hits.get(k, 0) + v
        capped += c
        total += n
    labels = FIXTURES[fixture]().labels
    fractions = {k: v / total for k, v in hits.items()}
    fitted = {k: k[0] * v for k, v in fractions.items()}
    return analysis.KerckhoffReport(tuple(Ms), labels, fractions, total, capped, fitted)


def cmd_kerckhoff(args):
    _require_seed(args)
    Ms = tuple(float(m) for m in args.M.split(","))
    rep = kerckhoff_run(args.seed, args.samples, Ms, args.fixture or "torus", args.threads)
    cfg = _config(args, fixture=args.fixture or "torus", samples=args.samples, M=list(Ms))
    rows = [[_fmt(M), r, _fmt(rep.fractions[(M, r)]), rep.n_samples] for M in Ms for r in rep.labels]
    text = "".join(f"M={M:g} r={r} fraction={rep.fractions[(M, r)]:.5f} c={rep.fitted_c[(M, r)]:.4f}\n" for M in Ms for r in rep.labels)
    text += f"horizon_exceeded {rep.horizon_exceeded}\nstable {rep.stable()}\n"
    _emit(args, text, rows, ["M", "r", "fraction", "n"], {"config": cfg.to_dict()})
    return 0


def _tails_worker(seed, worker, n_returns, fixture, theta_tokens):
    t = FIXTURES[fixture]()
    rng = make_rng(seed, worker)
    traj = flow.run_trajectory(flow.sample_state(t, rng), n_returns)
    theta = resolve_word(t, theta_tokens)
    rec = flow.code_by_theta(traj, theta)
    return rec.durations, traj.roofs().tolist(), len(traj.events)


def coded_roofs(seed, min_returns=10**5, min_samples=10**4, fixture="torus", theta=TORUS_THETA, chunk=200000, threads=1):
    """Coded roof samples pooled over trajectories until both minimums are met.

    Returns (coded durations, raw roofs, returns used).
    """
    coded, raw, used, worker = [], [], 0, 0
    while used < min_returns or len(coded) < min_samples:
        jobs = [(seed, worker + i, chunk, fixture, tuple(theta)) for i in range(max(1, threads))]
        for d, r, n in _parallel(_tails_worker, jobs, threads):
            coded += d
            raw += r
            used += n
        worker += len(jobs)
    return coded, raw, used


def cmd_tails(args):
    _require_seed(args)
    theta = _word_tokens(args.theta) or list(TORUS_THETA)
    coded, raw, used = coded_roofs(args.seed, args.returns, args.min_samples, args.fixture or "torus", theta, threads=args.threads)
    fit = analysis.tail_fit(coded)
    raw_fit = analysis.tail_fit(raw)
    cfg = _config(args, fixture=args.fixture or "torus", returns=args.returns, min_samples=args.min_samples, theta=theta)
    doc = {
        "config": cfg.to_dict(),
        "h_hat": fit.h_hat,
        "r2": fit.r2,
        "n": fit.n,
        "discarded_top": fit.discarded,
        "returns_used": used,
        "raw_roof_h_hat": raw_fit.h_hat,
        "raw_roof_r2": raw_fit.r2,
    }
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n", doc=doc)
    return 0


NORMALITY_WORDS = (("c:B",), ("c:B", "a:B"), ("c", "b", "c", "a"))


def normality_run(seed, n_returns, n_mc, fixture="torus", words=NORMALITY_WORDS):
    t = FIXTURES[fixture]()
    traj = flow.run_trajectory(flow.sample_state(t, make_rng(seed, 0)), n_returns)
    out = []
    for k, toks in enumerate(words):
        try:
            w = resolve_word(t, list(toks))
        except InapplicableWord:
            w = None
        ft, fl = analysis.normality_check(traj, w, n_mc, make_rng(seed, k + 1))
        out.append((",".join(w.tokens()) if w else ",".join(toks), ft, fl))
    return out


def cmd_normality(args):
    _require_seed(args)
    words = [tuple(_word_tokens(w)) for w in args.word] if args.word else NORMALITY_WORDS
    res = normality_run(args.seed, args.returns, args.samples, args.fixture or "torus", words)
    cfg = _config(args, fixture=args.fixture or "torus", returns=args.returns, samples=args.samples, words=[list(w) for w in words])
    rows = [[w, _fmt(ft), _fmt(fl), _fmt(ft / fl) if fl > 0 else "inf"] for w, ft, fl in res]
    text = "".join(f"{w}: trajectory {ft:.5f} lebesgue {fl:.5f}\n" for w, ft, fl in res)
    _emit(args, text, rows, ["word", "freq_trajectory", "freq_lebesgue", "ratio"], {"config": cfg.to_dict()})
    return 0


def cmd_torus_volume(args):
    seed = args.seed if args.seed is not None else 0
    tv = analysis.torus_volume(args.samples, make_rng(seed))
    if abs(tv.closed_form_check) > args.quad_tol:
        raise analysis.QuadratureNonconvergence(f"I1+I2 misses pi^2/12 by {tv.closed_form_check:.3e}")
    cfg = _config(args, samples=args.samples, quad_tol=args.quad_tol)
    doc = {"config": cfg.to_dict(), **{k: float(v) if isinstance(v, (float, np.floating)) else v for k, v in asdict(tv).items()}}
    text = (
        f"I1 {_fmt(tv.I1)}\nI2 {_fmt(tv.I2)}\n"
        f"I1+I2 {_fmt(tv.I1 + tv.I2)} (pi^2/12 {_fmt(math.pi**2 / 12)}, diff {tv.closed_form_check:.3e})\n"
        f"scaled 3*I1 {_fmt(tv.scaled_I1)} 3*I2 {_fmt(tv.scaled_I2)}\n"
        f"volume 2(I1+I2) {_fmt(tv.volume)} (pi^2/6 {_fmt(math.pi**2 / 6)})\n"
        f"monte_carlo {_fmt(tv.mc_estimate)} +- {tv.mc_stderr:.2e} (n={tv.n_samples}, both halves sampled {_fmt(tv.mc_full_range)})\n"
    )
    _emit(args, text, doc=doc)
    return 0


def cmd_enumerate(args):
    cg = analysis.enumerate_core_graph(args.genus, args.marked)
    comps = cg.components_by_stratum()
    lines = [f"core triangulations {len(cg.nodes)} arcs {len(cg.arcs)}"]
    for k in sorted(comps):
        lines.append(f"kappa {list(k)} nodes {sum(len(c) for c in comps[k])} components {len(comps[k])} D {cg.expected_dim[k]}")
    lines.append(f"strongly connected per stratum: {cg.strongly_connected_per_stratum()}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_show(args):
    t, vectors = _triangulation(args)
    sys.stdout.write(to_json(t, vectors) if args.json else serialize(t, vectors))
    return 0


# parser


def build_parser():
    p = argparse.ArgumentParser(prog="veering", description="Veering triangulations and the flow they code.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, stochastic=False, out=False):
        sp = sub.add_parser(name)
        sp.set_defaults(fn=fn)
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--fixture", choices=sorted(FIXTURES) + ["torus-state"], default=None)
        src.add_argument("--file", help="triangulation in text (.tri) or JSON (.json) format")
        sp.add_argument("--seed", type=int, default=None, help="required for stochastic commands" if stochastic else None)
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        if out:
            sp.add_argument("--out", help="write CSV or JSON (by extension)")
        return sp

    add("validate", cmd_validate)
    add("stratum", cmd_stratum)
    sp = add("show", cmd_show)
    sp.add_argument("--json", action="store_true")
    sp = add("flip", cmd_flip)
    sp.add_argument("--edge", required=True)
    sp.add_argument("--colour", choices=["R", "B"])
    sp.add_argument("--backward", action="store_true")
    sp = add("matrix", cmd_matrix)
    sp.add_argument("--word", required=True, help="comma-separated edges, optionally edge:R / edge:B, ~ for backward")
    sp.add_argument("--heights", action="store_true", help="print the height transport matrix instead")
    sp.add_argument("--verbose", action="store_true")
    add("balance", cmd_balance, stochastic=True)
    sp = add("flow", cmd_flow, stochastic=True, out=True)
    sp.add_argument("--returns", type=int, default=10)
    sp.add_argument("--renorm-every", type=int, default=1000)
    sp = add("code", cmd_code, stochastic=True, out=True)
    sp.add_argument("--returns", type=int, default=10**5)
    sp.add_argument("--theta", default="")
    sp = add("jacobian", cmd_jacobian, stochastic=True, out=True)
    sp.add_argument("--trials", type=int, default=100)
    sp = add("kerckhoff", cmd_kerckhoff, stochastic=True, out=True)
    sp.add_argument("--samples", type=int, default=10**5)
    sp.add_argument("--M", default="10,30,100")
    sp = add("tails", cmd_tails, stochastic=True, out=True)
    sp.add_argument("--returns", type=int, default=10**5)
    sp.add_argument("--min-samples", type=int, default=10**4)
    sp.add_argument("--theta", default="")
    sp = add("normality", cmd_normality, stochastic=True, out=True)
    sp.add_argument("--returns", type=int, default=10**5)
    sp.add_argument("--samples", type=int, default=20000)
    sp.add_argument("--word", action="append", help="repeatable; comma-separated tokens")
    sp = add("torus-volume", cmd_torus_volume, out=True)
    sp.add_argument("--quad-tol", type=float, default=1e-8)
    sp.add_argument("--samples", type=int, default=10**6)
    sp = add("enumerate", cmd_enumerate)
    sp.add_argument("--genus", type=int, required=True)
    sp.add_argument("--marked", type=int, required=True)
    return p


def run_command(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    except DOMAIN_ERRORS as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
