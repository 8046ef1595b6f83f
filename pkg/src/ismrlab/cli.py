"""Command line entry point ``ismrlab``.

Randomised subcommands draw from PCG64 generators seeded by
``SeedSequence([seed, task_index])``.  CSV outputs start with a ``#`` header
line holding the subcommand, seed, generator name, config hash and the full
config, so ``ismrlab replay FILE`` can regenerate the file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable

import numpy as np

from . import classical, core, games, nndecomp, qec, qsim, resources

PRNG_NAME = "PCG64"
HEADER_PREFIX = "# ismrlab "


class ConfigError(core.IsmrError):
    pass


def task_rng(seed: int, task_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(task_index)])))


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def header_line(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True)
    return f"{HEADER_PREFIX}prng={PRNG_NAME} seed={config.get('seed')} config_sha256={config_hash(config)} config={blob}\n"


def render_csv(config: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(header_line(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _bits(text: str) -> tuple[int, ...]:
    text = str(text).strip()
    if any(c not in "01" for c in text):
        raise ConfigError(f"expected a bit string, got {text!r}")
    return tuple(int(c) for c in text)


# ------------------------------------------------------------- subcommands


def cmd_ismr_verify(cfg: dict) -> str:
    x, y = _bits(cfg["x"]), _bits(cfg["y"])
    inst = core.IsmrInstance(cfg["p"], len(x), len(y))
    result = {"p": cfg["p"], "residue": core.ismr_residue(inst, x), "valid": core.ismr_verify(inst, x, y)}
    return json.dumps(result) + "\n"


def cmd_game_brute(cfg: dict) -> str:
    game = games.GameSpec(cfg["p"], cfg["n"], cfg["kind"], cfg["r"])
    b_star, corr = games.optimal_classical_correlation_bruteforce(game)
    bound = games.classical_correlation_upper_bound(game.p, game.n, game.r, game.kind).magnitude
    out: dict[str, Any] = {"b_star": list(b_star), "corr": corr, "bound": bound, "satisfied": corr <= bound + 1e-12}
    if game.p == 3:
        _, success = games.optimal_success_bruteforce(game)
        sb = games.winning_probability_bound_p3(game.n, game.r, game.kind)
        out.update(success=success, success_bound=sb, success_satisfied=success <= sb + 1e-12)
    return json.dumps(out) + "\n"


def cmd_game_bound(cfg: dict) -> str:
    rep = games.classical_correlation_upper_bound(cfg["p"], cfg["n"], cfg["r"], cfg["kind"])
    out: dict[str, Any] = {"real_part": rep.real_part, "magnitude": rep.magnitude, "simplified": rep.simplified}
    if cfg["p"] == 3:
        out["success_bound"] = games.winning_probability_bound_p3(cfg["n"], cfg["r"], cfg["kind"])
        out["displayed_cap"] = games.displayed_p3_correlation_bound(cfg["n"], cfg["r"], cfg["kind"])
    return json.dumps(out) + "\n"


SIM_COLUMNS = ("x", "corr", "success_prob", "output_len")


def _even_inputs(n: int, p: int, limit: int | None, rng) -> list[tuple[int, ...]]:
    xs = list(core.iter_residue_zero_bits(n, p))
    if limit is not None and len(xs) > limit:
        idx = sorted(rng.choice(len(xs), size=limit, replace=False))
        xs = [xs[i] for i in idx]
    return xs


def cmd_sim_php(cfg: dict) -> str:
    graph = qsim.GraphSpec.of_kind(cfg["graph"], cfg["n"])
    inst = core.IsmrInstance(2, cfg["n"], qsim.php_output_length(graph))
    rows = []
    limit = None if cfg.get("exhaustive") else cfg.get("max_inputs")
    for t, x in enumerate(_even_inputs(cfg["n"], 2, limit, task_rng(cfg["seed"], 0))):
        if cfg["shots"] and not cfg.get("exhaustive"):
            rng = task_rng(cfg["seed"], t + 1)
            wins = sum(core.ismr_verify(inst, x, qsim.run_qubit_php_circuit(x, graph, rng)) for _ in range(cfg["shots"]))
            success = wins / cfg["shots"]
        else:
            law = qsim.php_output_law(x, graph)
            success = sum(q for y, q in law.items() if core.ismr_verify(inst, x, y))
        rows.append(("".join(map(str, x)), repr(float(2 * success - 1)), repr(float(success)), inst.m))
    return render_csv(cfg, SIM_COLUMNS, rows)


def cmd_sim_qupit(cfg: dict) -> str:
    p, n = cfg["p"], cfg["n"]
    graph = qsim.GraphSpec.of_kind(cfg["graph"], n)
    teleport = cfg["circuit"] == "teleport"
    length = (qsim.teleport_correction_length if teleport else qsim.correction_length)(graph, p)
    rows = []
    limit = None if cfg.get("exhaustive") else cfg.get("max_inputs")
    for t, x in enumerate(_even_inputs(n, p, limit, task_rng(cfg["seed"], 0))):
        target = (-(sum(x) // p)) % p
        if cfg["shots"] and not cfg.get("exhaustive"):
            rng = task_rng(cfg["seed"], t + 1)
            run = qsim.run_clifford_plus_T_circuit if teleport else qsim.run_qupit_ismr_circuit
            law = np.zeros(p)
            for _ in range(cfg["shots"]):
                raw, corr = run(p, x, graph, rng)
                law[(raw.digit_sum + corr.digit_sum - target) % p] += 1
            law /= cfg["shots"]
            c, success = core.correlation_from_shift_law(p, law), float(law[0])
        elif teleport:
            c, success = qsim.clifford_t_correlation(p, x, graph), float("nan")
        else:
            law = qsim.ismr_deviation_law(p, x, graph)
            c, success = core.correlation_from_shift_law(p, law), float(law[0])
        rows.append(("".join(map(str, x)), repr(float(c)), repr(float(success)), n + length))
    return render_csv(cfg, SIM_COLUMNS, rows)


SWITCH_COLUMNS = (
    "n", "m", "w", "k", "keep_prob", "t", "trials", "failures", "estimate", "ci_low", "ci_high", "bound", "vacuous", "ok",
)


def cmd_switch_empirical(cfg: dict) -> str:
    F = classical.random_depth2_circuit(cfg["n"], cfg["m"], cfg["w"], cfg["k"], task_rng(cfg["seed"], 0))
    est = classical.empirical_switch_prob(F, cfg["keep_prob"], cfg["t"], cfg["trials"], task_rng(cfg["seed"], 1))
    row = (
        cfg["n"], cfg["m"], cfg["w"], cfg["k"], cfg["keep_prob"], cfg["t"], est.trials, est.failures,
        repr(est.estimate), repr(est.ci_low), repr(est.ci_high), repr(est.bound), est.vacuous, est.ok,
    )
    return render_csv(cfg, SWITCH_COLUMNS, [row])


def cmd_anf(cfg: dict) -> str:
    if cfg.get("tree"):
        with open(cfg["tree"], encoding="utf-8") as fh:
            anf = classical.dt_to_anf(classical.tree_from_json(json.load(fh)))
    elif cfg.get("table"):
        anf = classical.anf_from_truth_table(_bits(cfg["table"]))
    else:
        raise ConfigError("anf needs --table or --tree")
    out = {"anf": str(anf), "monomials": [list(s) for s in anf.sets()], "degree": anf.degree()}
    out["degree_counts"] = {d: anf.count_degree(d) for d in range(anf.degree() + 1)}
    return json.dumps(out) + "\n"


def _qec_task(args: tuple) -> qec.FailureEstimate:
    p, L, tau, trials, seed, index = args
    return qec.monte_carlo_failure(qec.SurfaceLattice(p, L), tau, trials, task_rng(seed, index))


def cmd_qec_threshold(cfg: dict) -> str:
    tasks = [
        (cfg["p"], L, tau, cfg["trials"], cfg["seed"], i)
        for i, (L, tau) in enumerate(itertools.product(_int_list(cfg["L_list"]), _float_list(cfg["tau_list"])))
    ]
    if cfg.get("workers", 1) > 1:
        with ProcessPoolExecutor(cfg["workers"]) as pool:
            results = list(pool.map(_qec_task, tasks))
    else:
        results = [_qec_task(t) for t in tasks]
    rows = [(r.p, r.L, r.tau, r.trials, r.failures, repr(r.rate), repr(r.ci_low), repr(r.ci_high)) for r in results]
    return render_csv(cfg, qec.QEC_COLUMNS, rows)


def cmd_nn_decompose(cfg: dict) -> str:
    if cfg["activation"] != "relu":
        raise ConfigError("only the relu activation is available")
    spec = nndecomp.relu_spec(cfg["n"], cfg["c"], cfg["w"], cfg["k"])
    l, gates = nndecomp.decompose_activation(spec)
    mismatches = []
    for h in range(spec.n + 1):
        x = [1] * h + [0] * (spec.n - h)
        got = nndecomp.eval_krelu(gates, x, spec.w)
        want = nndecomp.discretized(spec, h) if h <= spec.k else spec.w * l
        if got != want:
            mismatches.append({"weight": h, "got": got, "want": want})
    out = json.loads(nndecomp.gates_to_json(l, gates, spec))
    out["report"] = {"weights_checked": spec.n + 1, "mismatches": mismatches, "ok": not mismatches}
    return json.dumps(out, indent=2) + "\n"


RESOURCE_COLUMNS = ("row", "d", "c_q", "c_classical", "log10_n_star", "published_log10")


def cmd_resource_estimate(cfg: dict) -> str:
    rows_ = resources.ROWS if cfg["row"] == "all" else (cfg["row"],)
    rows = []
    for row in rows_:
        for d in _int_list(cfg["d_list"]):
            model = resources.CrossoverModel(row, d, cfg["c_q"], cfg["c_classical"])
            n_star = resources.resource_crossover(model)
            published = resources.PUBLISHED_ORDERS[row] if d == 3 else ""
            rows.append((row, d, cfg["c_q"], cfg["c_classical"], f"{n_star:.4f}", published))
    return render_csv(cfg, RESOURCE_COLUMNS, rows)


COMMANDS: dict[str, Callable[[dict], str]] = {
    "ismr-verify": cmd_ismr_verify,
    "game-brute": cmd_game_brute,
    "game-bound": cmd_game_bound,
    "sim-php": cmd_sim_php,
    "sim-qupit": cmd_sim_qupit,
    "switch-empirical": cmd_switch_empirical,
    "anf": cmd_anf,
    "qec-threshold": cmd_qec_threshold,
    "nn-decompose": cmd_nn_decompose,
    "resource-estimate": cmd_resource_estimate,
}

KINDS = ("UniformDitResidueZero", "HammingEncodedUniformBinary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ismrlab", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with a 'subcommand' key and its parameters")
    sub = parser.add_subparsers(dest="subcommand")

    def add(name: str, help_: str, seeded: bool = False) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", help="output path (stdout when omitted)")
        if seeded:
            sp.add_argument("--seed", type=int, required=True)
        return sp

    sp = add("ismr-verify", "check an output string against an input")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)

    for name, help_ in (("game-brute", "brute-force the best classical strategy"), ("game-bound", "closed-form bounds")):
        sp = add(name, help_)
        sp.add_argument("--p", type=int, required=True)
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--r", type=int, default=0)
        sp.add_argument("--kind", "--dist", dest="kind", choices=KINDS, default=KINDS[0])

    sp = add("sim-php", "parity halving circuit: exact or sampled success per input", seeded=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--graph", choices=("path", "tree", "grid3d"), default="tree")
    sp.add_argument("--shots", type=int, default=0)
    sp.add_argument("--exhaustive", action="store_true", help="exact law over every valid input (ignores --shots)")
    sp.add_argument("--max-inputs", type=int)

    sp = add("sim-qupit", "qupit ISMR circuit: exact or sampled correlation per input", seeded=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--graph", choices=("path", "tree", "grid3d"), default="path")
    sp.add_argument("--circuit", "--gadget", dest="circuit", choices=("direct", "teleport"), default="direct")
    sp.add_argument("--shots", type=int, default=0)
    sp.add_argument("--exhaustive", action="store_true", help="exact law over every valid input (ignores --shots)")
    sp.add_argument("--max-inputs", type=int)

    sp = add("switch-empirical", "random-restriction frequency against the switching bound", seeded=True)
    sp.add_argument("--n", type=int, default=60)
    sp.add_argument("--m", type=int, default=20)
    sp.add_argument("--w", type=int, default=2)
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--keep-prob", type=float, default=0.02)
    sp.add_argument("--t", type=int, default=3)
    sp.add_argument("--trials", type=int, default=10000)

    sp = add("anf", "algebraic normal form of a truth table or a decision tree")
    sp.add_argument("--table", help="truth table bits, index bit i is x_i")
    sp.add_argument("--tree", help="decision tree JSON file")

    sp = add("qec-threshold", "surface-code failure rates under i.i.d. noise", seeded=True)
    sp.add_argument("--p", type=int, default=2)
    sp.add_argument("--L-list", dest="L_list", default="3,5,7")
    sp.add_argument("--tau-list", default="0.005")
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--workers", type=int, default=1)

    sp = add("nn-decompose", "decompose a discretized activation into bPTF gates")
    sp.add_argument("--activation", default="relu")
    sp.add_argument("--c", type=float, required=True)
    sp.add_argument("--w", type=float, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)

    sp = add("resource-estimate", "input size where classical lower bounds pass a linear quantum circuit")
    sp.add_argument("--row", choices=resources.ROWS + ("all",), default="all")
    sp.add_argument("--d-list", default="3,4,5")
    sp.add_argument("--c-q", type=float, default=1.0)
    sp.add_argument("--c-classical", type=float, default=1.0)

    rp = sub.add_parser("replay", help="re-run the command recorded in a CSV header")
    rp.add_argument("file")
    rp.add_argument("--out")
    return parser


def _defaults(parser: argparse.ArgumentParser, name: str) -> dict:
    action = next(a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    sp = action.choices[name]
    return {a.dest: a.default for a in sp._actions if a.dest not in ("help",)}


def load_config(path: str, parser: argparse.ArgumentParser) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from err
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror}") from err
    return normalise_config(raw, parser, source=path)


def normalise_config(raw: Any, parser: argparse.ArgumentParser, source: str = "config") -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    name = raw.get("subcommand")
    if name not in COMMANDS:
        raise ConfigError(f"{source}: field 'subcommand' must be one of {sorted(COMMANDS)}, got {name!r}")
    cfg = _defaults(parser, name)
    cfg.pop("out", None)
    for key, value in raw.items():
        k = key.replace("-", "_")
        if k == "out":
            continue
        if k != "subcommand" and k not in cfg:
            raise ConfigError(f"{source}: unknown field {key!r} for {name}")
        cfg[k] = value
    missing = [k for k, v in cfg.items() if v is None and k in _required(parser, name)]
    if missing:
        raise ConfigError(f"{source}: missing field(s) {missing} for {name}")
    cfg["subcommand"] = name
    return cfg


def _required(parser: argparse.ArgumentParser, name: str) -> set[str]:
    action = next(a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    return {a.dest for a in action.choices[name]._actions if a.required}


def read_header_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith(HEADER_PREFIX) or " config=" not in first:
        raise ConfigError(f"{path}: line 1: no replay header")
    return json.loads(first.split(" config=", 1)[1])


def run_experiment(config: dict) -> str:
    """Run one normalised config and return its text output."""
    return COMMANDS[config["subcommand"]](config)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
            try:
                out = json.loads(text).pop("out", None)
            except (json.JSONDecodeError, AttributeError):
                out = None
            cfg = load_config(args.config, parser)
        elif args.subcommand == "replay":
            cfg = normalise_config(read_header_config(args.file), parser, source=args.file)
            out = args.out
        elif args.subcommand:
            cfg = {k: v for k, v in vars(args).items() if k not in ("config", "out")}
            out = args.out
        else:
            parser.print_help()
            return 2
        emit(run_experiment(cfg), out)
    except (core.IsmrError, KeyError, ValueError) as err:
        print(f"ismrlab: error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
