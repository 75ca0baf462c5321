"""Command-line interface.

Subcommands: gen-data, gen-bench, train, finetune, eval, solve, plot.
Every subcommand accepts --config pointing at an INI file (see
:mod:`ncolab.config`); explicit flags override config values, which
override builtin defaults. Exit codes: 0 success, 2 configuration or
usage errors, 3 numerical failures, 4 data or schema errors.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .checkpoint import load_model, save_model
from .config import BUILTIN_DEFAULTS, load_ini, resolve_seed, setting
from .datagen import (DOMAIN_BENCHMARK, DOMAIN_TRAIN, LABELS, MODES,
                      generate_dataset, read_records, write_records)
from .envs import ENV_IDS, SYNTHETIC_ENV_IDS, make_instance
from .errors import (ConfigError, DataFormatError, DivergenceError, DomainError,
                     InfeasibleError, NonFiniteError, NumericalError, SchemaError,
                     ShapeError, SingularityError)
from .evaluation import evaluate_model, time_classical_solver, time_operator
from .operator import AGGREGATIONS, ARCHITECTURES, BASIS_KINDS, BasisSpec
from .solvers import (DirectSolverConfig, ZermeloConfig, solve_curve,
                      solve_direct, solve_zermelo)
from .training import TrainConfig, build_model, finetune, train

_NUMERICAL_ERRORS = (NonFiniteError, DivergenceError, SingularityError,
                     NumericalError, InfeasibleError, DomainError)
_DATA_ERRORS = (SchemaError, DataFormatError)


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got '{text}'") from exc


def _parse_constants(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"constants need NAME=VALUE pairs, got '{part}'")
        name, raw = part.split("=", 1)
        try:
            out[name.strip()] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"constant '{name}' needs a number, got '{raw}'") from exc
    return out


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI file with default options")


def _build_parser(ini: dict) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncolab",
        description="Operator learning laboratory for optimal control problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, domain in (("gen-data", DOMAIN_TRAIN), ("gen-bench", DOMAIN_BENCHMARK)):
        p = sub.add_parser(name, help=f"generate a {'training' if domain == 0 else 'benchmark'} dataset")
        _add_config_arg(p)
        p.add_argument("--env", required="env" not in ini, default=ini.get("env"),
                       choices=ENV_IDS)
        default_n = setting("n_train" if domain == DOMAIN_TRAIN else "n_benchmark", ini)
        p.add_argument("--n", type=int, default=default_n)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--label", default=setting("label", ini), choices=sorted(LABELS))
        p.add_argument("--mode", default=setting("mode", ini), choices=MODES)
        p.add_argument("--chunk-size", type=int, default=setting("chunk_size", ini))
        p.add_argument("--n-grid", type=int, default=setting("n_grid", ini))
        p.add_argument("--max-iters", type=int, default=None,
                       help="override solver iteration budget")
        p.set_defaults(func=_cmd_generate, domain=domain)

    p = sub.add_parser("train", help="train an operator on a dataset")
    _add_config_arg(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint stem (writes .json/.bin)")
    p.add_argument("--arch", default=setting("arch", ini), choices=ARCHITECTURES)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=setting("epochs", ini))
    p.add_argument("--lr0", type=float, default=setting("lr0", ini))
    p.add_argument("--lr-decay", type=float, default=setting("lr_decay", ini))
    p.add_argument("--lr-decay-period", type=int, default=setting("lr_decay_period", ini))
    p.add_argument("--batch-instances", type=int, default=setting("batch_instances", ini))
    p.add_argument("--queries-per-instance", type=int,
                   default=setting("queries_per_instance", ini))
    p.add_argument("--width", type=int, default=ini.get("width"))
    p.add_argument("--basis", default=setting("basis", ini), choices=BASIS_KINDS)
    p.add_argument("--p", type=int, default=setting("p", ini))
    p.add_argument("--aggregation", default=setting("aggregation", ini),
                   choices=AGGREGATIONS)
    p.add_argument("--val-data", default=None)
    p.add_argument("--val-every", type=int, default=setting("val_every", ini))
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("finetune", help="adapt a trained model, basis frozen")
    _add_config_arg(p)
    p.add_argument("--model", required=True, help="checkpoint stem to start from")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None,
                   help="default: a fifth of the configured training epochs")
    p.add_argument("--lr0", type=float, default=0.001)
    p.add_argument("--batch-instances", type=int, default=setting("batch_instances", ini))
    p.add_argument("--queries-per-instance", type=int,
                   default=setting("queries_per_instance", ini))
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("eval", help="score a model on a benchmark dataset")
    _add_config_arg(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--timing", action="store_true",
                   help="also measure per-instance solve and inference time")
    p.add_argument("--repeats", type=int, default=25)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("solve", help="solve one instance with the classical solver")
    _add_config_arg(p)
    p.add_argument("--env", required="env" not in ini, default=ini.get("env"),
                   choices=ENV_IDS)
    p.add_argument("--x-goal", default=None, help="comma-separated goal state")
    p.add_argument("--x-init", default=None, help="comma-separated initial state")
    p.add_argument("--constants", default=None, help="NAME=VALUE[,NAME=VALUE...]")
    p.add_argument("--tf", type=float, default=1.0)
    p.add_argument("--n-grid", type=int, default=setting("n_grid", ini))
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--out", default=None, help="write the solution as a JSONL record")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("plot", help="export one record's control to CSV")
    _add_config_arg(p)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plot)

    return parser


def _solver_configs(env_id: str, n_grid: int, max_iters: int | None) -> dict:
    out: dict = {}
    if env_id == "brachistochrone":
        kw = {"n_knots": n_grid, "lr0": 0.02, "grad_tol": 1e-9, "max_iters": 2000}
        if max_iters is not None:
            kw["max_iters"] = max_iters
        out["curve_config"] = DirectSolverConfig(**kw)
    elif env_id == "zermelo":
        kw = {"n_grid": n_grid}
        if max_iters is not None:
            kw["max_iters"] = max_iters
        out["zermelo_config"] = ZermeloConfig(**kw)
    else:
        kw = {"n_knots": n_grid}
        if max_iters is not None:
            kw["max_iters"] = max_iters
        out["direct_config"] = DirectSolverConfig(**kw)
    return out


def _cmd_generate(args, ini: dict) -> int:
    seed = resolve_seed(args.seed, ini)
    records = generate_dataset(
        args.env, args.n, seed, label=args.label, domain=args.domain,
        mode=args.mode, n_grid=args.n_grid, chunk_size=args.chunk_size,
        **_solver_configs(args.env, args.n_grid, args.max_iters))
    write_records(args.out, records)
    converged = sum(r["converged"] for r in records)
    print(f"wrote {len(records)} {args.env} records to {args.out} "
          f"(label={args.label}, seed={seed}, converged {converged}/{len(records)})")
    return 0


def _train_config(args, seed: int, epochs: int, lr_decay: float,
                  lr_decay_period: int) -> TrainConfig:
    return TrainConfig(epochs=epochs, lr0=args.lr0, lr_decay=lr_decay,
                       lr_decay_period=lr_decay_period,
                       batch_instances=args.batch_instances,
                       queries_per_instance=args.queries_per_instance,
                       seed=seed, val_every=getattr(args, "val_every", 0))


def _cmd_train(args, ini: dict) -> int:
    seed = resolve_seed(args.seed, ini)
    records = read_records(args.data)
    env_id = records[0]["env_id"]
    if "env" in ini and ini["env"] != env_id:
        raise ConfigError(f"config env '{ini['env']}' != dataset env '{env_id}'")
    basis = BasisSpec(kind=args.basis, p=args.p) if args.arch in ("nasm", "sno") else None
    model = build_model(args.arch, env_id, records, seed, width=args.width,
                        basis=basis, aggregation=args.aggregation)
    config = _train_config(args, seed, args.epochs, args.lr_decay, args.lr_decay_period)
    validation = read_records(args.val_data) if args.val_data else None
    result = train(model, records, config, validation_records=validation)
    result.model.meta.update({
        "trained_on": len(records), "epochs": args.epochs, "seed": seed,
        "final_loss": result.losses[-1] if result.losses else None,
    })
    json_path, bin_path = save_model(result.model, args.out)
    last_loss = result.losses[-1] if result.losses else float("nan")
    line = (f"trained {args.arch} on {len(records)} {env_id} records "
            f"for {args.epochs} epochs (seed={seed}): loss {last_loss:.6e}")
    if result.validation:
        line += f", validation mse {result.validation[-1][1]:.6e}"
    print(line)
    print(f"saved {json_path} and {bin_path}")
    return 0


def _cmd_finetune(args, ini: dict) -> int:
    seed = resolve_seed(args.seed, ini)
    model = load_model(args.model)
    records = read_records(args.data)
    if records[0]["env_id"] != model.env_id:
        raise ConfigError(f"model is for '{model.env_id}' but data is "
                          f"'{records[0]['env_id']}'")
    epochs = args.epochs
    if epochs is None:
        epochs = max(1, int(setting("epochs", ini)) // 5)
    config = _train_config(args, seed, epochs, lr_decay=1.0, lr_decay_period=1)
    result = finetune(model, records, config)
    result.model.meta.update({"finetuned_on": len(records), "finetune_epochs": epochs,
                              "finetune_seed": seed})
    json_path, bin_path = save_model(result.model, args.out)
    last_loss = result.losses[-1] if result.losses else float("nan")
    print(f"fine-tuned on {len(records)} records for {epochs} epochs "
          f"(seed={seed}): loss {last_loss:.6e}")
    print(f"saved {json_path} and {bin_path}")
    return 0


def _cmd_eval(args, ini: dict) -> int:
    model = load_model(args.model)
    records = read_records(args.data)
    report = evaluate_model(model, records)
    print(f"{model.arch} on {report.n} {report.env_id} records: "
          f"mape {report.mape:.6e}, diverged {report.n_diverged}")
    if args.timing:
        t_op = time_operator(model, records[0], repeats=args.repeats)
        t_cl = time_classical_solver(records[0])
        print(f"operator {t_op:.3e} s/instance, classical solver {t_cl:.3e} s/instance, "
              f"speedup {t_cl / t_op:.1f}x")
    return 0


def _cmd_solve(args, ini: dict) -> int:
    x_goal = _parse_floats(args.x_goal) if args.x_goal else None
    x_init = _parse_floats(args.x_init) if args.x_init else None
    constants = _parse_constants(args.constants) if args.constants else None
    env_id = args.env
    from .envs import default_parameters
    defaults = default_parameters(env_id)

    if env_id == "brachistochrone":
        y1 = x_init[0] if x_init else defaults["x_init"][0]
        y2 = x_goal[0] if x_goal else defaults["x_goal"][0]
        cfg = None
        if args.max_iters is not None or args.n_grid != 100:
            cfg = DirectSolverConfig(n_knots=args.n_grid, lr0=0.02, grad_tol=1e-9,
                                     max_iters=args.max_iters or 2000)
        heights, t_best, converged, _ = solve_curve(y1, y2, config=cfg)
        print(f"descent time {t_best:.9f} s from y1={y1} to y2={y2} "
              f"(converged={converged})")
        u_star = [[float(v)] for v in heights]
        record = {"env_id": env_id, "label": "id", "index": 0, "tf": None,
                  "n_grid": len(heights), "x_init": [y1], "x_goal": [y2],
                  "constants": defaults["constants"], "u_star": u_star,
                  "j_opt": t_best, "converged": bool(converged), "n_iters": 0}
    elif env_id == "zermelo":
        goal = x_goal if x_goal else defaults["x_goal"]
        consts = dict(defaults["constants"])
        if constants:
            consts.update(constants)
        params = [goal[0], goal[1], consts["V"], consts["A"], consts["B"],
                  consts["C"], consts["D"]]
        cfg = ZermeloConfig(n_grid=args.n_grid, **(
            {"max_iters": args.max_iters} if args.max_iters is not None else {}))
        sol = solve_zermelo(np.array(params), cfg)
        print(f"arrival time {sol.travel_time:.9f} s, miss {sol.miss:.2e}, "
              f"score {sol.score:.9f} (converged={sol.converged})")
        record = {"env_id": env_id, "label": "id", "index": 0, "tf": None,
                  "n_grid": args.n_grid, "x_init": [0.0, 0.0], "x_goal": list(goal),
                  "constants": consts,
                  "u_star": [[float(v)] for v in sol.beta],
                  "j_opt": float(sol.score), "t_star": float(sol.travel_time),
                  "miss": float(sol.miss), "converged": bool(sol.converged),
                  "n_iters": int(sol.n_iters)}
    else:
        instance = make_instance(env_id, x_goal=x_goal, x_init=x_init,
                                 constants=constants, tf=args.tf, n_grid=args.n_grid)
        kw = {"n_knots": args.n_grid}
        if args.max_iters is not None:
            kw["max_iters"] = args.max_iters
        sol = solve_direct(instance, DirectSolverConfig(**kw))
        print(f"objective {sol.objective:.9f} after {sol.n_iters} iterations "
              f"(converged={sol.converged}, grad norm {sol.grad_norm:.2e}, "
              f"{sol.solve_time:.2f} s)")
        record = {"env_id": env_id, "label": "id", "index": 0, "tf": args.tf,
                  "n_grid": args.n_grid,
                  "x_init": [float(v) for v in instance.x_init],
                  "x_goal": [float(v) for v in instance.cost.x_goal],
                  "constants": instance.env.constants,
                  "c_x": [float(v) for v in instance.cost.c_x],
                  "c_u": float(instance.cost.c_u),
                  "u_star": [[float(v) for v in row] for row in sol.controls.values],
                  "j_opt": float(sol.objective), "converged": bool(sol.converged),
                  "n_iters": int(sol.n_iters)}
        if instance.q_init is not None:
            record["q_init"] = [float(v) for v in instance.q_init]
    if args.out:
        write_records(args.out, [record])
        print(f"wrote solution record to {args.out}")
    return 0


def _cmd_plot(args, ini: dict) -> int:
    records = read_records(args.data)
    if not 0 <= args.index < len(records):
        raise ConfigError(f"--index {args.index} outside dataset of {len(records)}")
    record = records[args.index]
    u = np.array(record["u_star"], dtype=np.float64)
    t = np.linspace(0.0, 1.0, record["n_grid"])
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_norm"] + [f"u{d}" for d in range(u.shape[1])])
        for k in range(u.shape[0]):
            writer.writerow([f"{t[k]:.10g}"] + [f"{v:.17g}" for v in u[k]])
    print(f"wrote {u.shape[0]} x {u.shape[1]} control samples for "
          f"{record['env_id']} record {args.index} to {args.out}")
    return 0


def main(argv=None) -> int:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    try:
        ini = load_ini(known.config)
        args = _build_parser(ini).parse_args(argv)
        return args.func(args, ini)
    except (ConfigError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
