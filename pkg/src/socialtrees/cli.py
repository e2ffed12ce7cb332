"""Command-line entry point: ``socialtrees {train,evaluate,prune,sweep,budget}``."""

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__, seeding
from .analysis import SweepSpec, evaluate, prune_with_traces, sweep, sweep_csv
from .config import ConfigError, load_config, read_text
from .dtree import TreeParseError, parse, serialize
from .envs import ENVIRONMENTS, EnvFactory
from .grammar import default_oblique_grammar
from .social import RUN_LOG_FIELDS, EVOLUTION_LOG_FIELDS, NoValidSolution, budget_report, train

EXIT_CONFIG = 2
EXIT_NO_SOLUTION = 3
EXIT_PARSE = 4


def _out_dir(path):
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def cmd_train(args):
    try:
        cfg = load_config(args.config, {"seed": args.seed, "out": args.out, "workers": args.workers})
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    budget = cfg.planned_budget()
    if args.dry_run:
        print(f"planned episodes: collaborative={budget.collaborative_episodes} "
              f"individual={budget.individual_episodes} total={budget.total()}")
        return 0
    if cfg.seed is None:
        cfg.seed = seeding.fresh_seed()
    out = _out_dir(cfg.out)
    env_factory = cfg.env_factory()
    n_inputs = env_factory().spec.n_inputs
    rows = []

    def on_generation(row, best):
        rows.append(row)
        if best is not None:
            (out / f"best_gen{row['generation']:04d}.tree").write_text(serialize(best) + "\n")

    manifest = {"version": __version__, "seed": cfg.seed, "config": cfg.to_dict(),
                "planned_total_episodes": budget.total()}
    try:
        result = train(default_oblique_grammar(n_inputs), env_factory, cfg.evo_params(), cfg.social_config(),
                       seed=cfg.seed, workers=cfg.workers, on_generation=on_generation)
    except NoValidSolution as e:
        print(f"error: {e}", file=sys.stderr)
        manifest["status"] = "no-valid-solution"
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        return EXIT_NO_SOLUTION
    finally:
        _write_csv(out / "run_log.csv", RUN_LOG_FIELDS, rows)
        _write_csv(out / "evolution_log.csv", EVOLUTION_LOG_FIELDS, rows)
    (out / "best.tree").write_text(serialize(result.best_tree) + "\n")
    ledger = result.ledger
    (out / "ledger.txt").write_text(f"{ledger}\n")
    manifest.update({
        "status": "ok",
        "best_fitness": result.best_fitness,
        "best_generation": result.best_generation,
        "collaborative_episodes": ledger.collaborative_episodes,
        "individual_episodes": ledger.individual_episodes,
        "total_episodes": ledger.total(),
    })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"episodes: {ledger}")
    print(f"best fitness {result.best_fitness:.3f} (generation {result.best_generation})")
    return 0


def _tree_and_env(args):
    text = read_text(args.tree)
    tree = parse(text)
    if args.env not in ENVIRONMENTS:
        raise ConfigError(f"unknown environment {args.env!r}")
    factory = EnvFactory(args.env, args.bins)
    spec = factory().spec
    if tree.n_splits == 0:
        # a lone leaf does not mention any input
        tree = parse(text, spec.n_inputs)
    if (tree.n_inputs, tree.n_actions) != (spec.n_inputs, spec.n):
        raise ConfigError(f"tree has {tree.n_inputs} inputs and {tree.n_actions} actions but {args.env} "
                          f"has {spec.n_inputs} inputs and {spec.n} actions")
    return tree, factory


def cmd_evaluate(args):
    tree, env = _tree_and_env(args)
    res = evaluate(tree, env, args.n, args.seed or 0)
    out = _out_dir(args.out)
    (out / "evaluate.csv").write_text(res.csv())
    print(f"mean {res.mean:.6f} std {res.std:.6f} over {args.n} episodes")
    return 0


def cmd_prune(args):
    tree, env = _tree_and_env(args)
    pruned, report = prune_with_traces(tree, env, args.episodes, args.threshold, args.seed or 0)
    out = _out_dir(args.out)
    (out / "pruned.tree").write_text(serialize(pruned) + "\n")
    (out / "prune_report.txt").write_text(str(report) + "\n")
    (out / "visits.csv").write_text(report.visits_csv)
    print(report)
    return 0


def _parse_sweep_spec(text):
    kv = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"sweep spec line {lineno}: expected 'key = value'")
        k, v = (p.strip() for p in line.split("=", 1))
        kv[k] = v
    unknown = set(kv) - {"env", "bins", "split", "coef", "values", "episodes", "seed"}
    if unknown:
        raise ConfigError(f"sweep spec: unknown keys {', '.join(sorted(unknown))}")
    try:
        coef = kv.get("coef", "bias")
        spec = SweepSpec(
            split=int(kv.get("split", 0)),
            coef=None if coef == "bias" else int(coef),
            values=[float(v) for v in kv["values"].split(",") if v.strip()],
            episodes_per_value=int(kv.get("episodes", 100)),
            seed=int(kv.get("seed", 0)),
        )
    except KeyError:
        raise ConfigError("sweep spec: 'values' is required") from None
    except ValueError as e:
        raise ConfigError(f"sweep spec: {e}") from None
    return spec, kv.get("env"), int(kv.get("bins", 7))


def cmd_sweep(args):
    spec, env_name, bins = _parse_sweep_spec(read_text(args.spec))
    if args.seed is not None:
        spec.seed = args.seed
    args.env = args.env or env_name or "cartpole"
    args.bins = bins if args.bins is None else args.bins
    tree, env = _tree_and_env(args)
    rows = sweep(tree, spec, env)
    out = _out_dir(args.out)
    text = sweep_csv(rows)
    (out / "sweep.csv").write_text(text)
    print(text, end="")
    return 0


def cmd_budget(args):
    try:
        cfg = load_config(args.config)
        soc = cfg.social_config()
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    rep = budget_report(cfg.population_size, soc.e_c, soc.e_i, args.baseline)
    print(rep)
    print(rep.csv(), end="")
    if args.out:
        (_out_dir(args.out) / "budget.csv").write_text(rep.csv())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="socialtrees", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="evolve and train a tree policy")
    t.add_argument("--config", required=True, help="key=value config file, bundled config name, or run manifest")
    t.add_argument("--out", help="output directory")
    t.add_argument("--seed", type=int)
    t.add_argument("--workers", type=int, help="max concurrent worker processes")
    t.add_argument("--dry-run", action="store_true", help="validate and print the episode budget only")
    t.set_defaults(func=cmd_train)

    def tree_cmd(name, func, help_):
        c = sub.add_parser(name, help=help_)
        c.add_argument("tree", help="tree file (canonical text) or bundled tree name")
        c.add_argument("--env", default=None if name == "sweep" else "cartpole", help="environment name")
        c.add_argument("--bins", type=int, default=None if name == "sweep" else 7)
        c.add_argument("--out")
        c.add_argument("--seed", type=int)
        c.add_argument("--workers", type=int, default=1)
        c.set_defaults(func=func)
        return c

    e = tree_cmd("evaluate", cmd_evaluate, "greedy evaluation of a tree")
    e.add_argument("-n", "--n", type=int, default=100, help="episodes")
    pr = tree_cmd("prune", cmd_prune, "visit-ratio pruning from evaluation traces")
    pr.add_argument("--episodes", type=int, default=100)
    pr.add_argument("--threshold", type=float, default=0.005)
    sw = tree_cmd("sweep", cmd_sweep, "coefficient sensitivity sweep")
    sw.add_argument("--spec", required=True, help="sweep spec file")

    b = sub.add_parser("budget", help="social vs non-social episode budget")
    b.add_argument("--config", required=True)
    b.add_argument("--baseline", type=int, required=True, help="episodes per agent without social learning")
    b.add_argument("--out")
    b.set_defaults(func=cmd_budget)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TreeParseError as e:
        print(f"error: cannot parse tree: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: file not found: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
