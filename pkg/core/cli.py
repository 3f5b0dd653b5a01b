"""
Command line front end.

    simulate   run the simulation grid from a JSON config and write the summary table
    generate   draw one simulation data set and write train/test CSVs and the true model
    train      fit a network to a data CSV (optionally layer/connection/node regularized)
    condense   merge inactive layers of a model and report the residual
    refit      condense a layer-sparse model and refit it by least squares
    verify     largest output difference between two models on seeded probes
    gradcheck  compare backprop with finite differences on a model and data CSV

Exit codes: 0 success, 2 usage/parse/shape errors, 3 divergence, 4 soundness failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .condense import DEFAULT_CLI_TOLERANCE, CondenseMode, condense, verify_equivalence
from .data import GenConfig, generate
from .errors import (
    DivergenceError,
    ParameterError,
    ParseError,
    PreconditionError,
    ShapeError,
    SoundnessError,
    ValidationError,
)
from .experiment import emit_table, load_experiment_config, run_experiment
from .files import atomic_write_text, read_dataset_csv, write_dataset_csv
from .network import load_model, save_model
from .numkit import RngStream, sample_std_normal
from .refit import default_activations, sls_then_refit
from .regularizers import RegWeights
from .training import DataSet, TrainConfig, Warm, gradient_check, initialize, lsq_loss, sgd_fit

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_UNSOUND = 4


def parse_tuning(text, depth, name):
    """A scalar broadcast over `depth` entries or a comma separated list of exactly `depth` values."""
    if text is None:
        return (0.0,) * depth
    try:
        values = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ParameterError(f"--{name} expects a number or a comma separated list, got {text!r}") from None
    if len(values) == 1:
        return tuple(values) * depth
    if len(values) != depth:
        raise ParameterError(f"--{name} lists {len(values)} values, the network needs {depth}")
    return tuple(values)


def regularization(args, depth):
    return RegWeights(
        parse_tuning(args.rc, depth, "rc"),
        parse_tuning(args.rn, depth, "rn"),
        parse_tuning(args.rl, depth - 1, "rl"),
    )


def train_config(args):
    return TrainConfig(batch_size=args.batch, learning_rate=args.lr, epochs=args.epochs, seed=args.seed)


def load_data(path):
    inputs, targets = read_dataset_csv(path)
    return DataSet(inputs, targets)


def cmd_simulate(args):
    config = load_experiment_config(args.config)
    seed = args.seed if args.seed is not None else config.master_seed
    n_runs = args.runs if args.runs is not None else config.n_runs
    aggregates = run_experiment(
        config.settings, n_runs=n_runs, master_seed=seed, methods=config.methods, overrides=config.overrides
    )
    text = emit_table(aggregates, args.format)
    if args.out:
        atomic_write_text(args.out, text)
        logger.info("wrote %d rows to %s", len(aggregates), args.out)
    else:
        sys.stdout.write(text)

    by_setting = {}
    for a in aggregates:
        by_setting.setdefault(a.setting, []).append(a.failed == a.runs)
    diverged = [s for s, flags in by_setting.items() if all(flags)]
    if diverged:
        logger.error("every fit diverged in settings %s", diverged)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_generate(args):
    cfg = GenConfig(
        input_dim=args.input_dim,
        width=args.width,
        hidden_layers=args.hidden_layers,
        s_w=args.s_w,
        n_train=args.n_train,
        n_test=args.n_test,
        standardize=not args.raw_targets,
    )
    model, train, test = generate(cfg, RngStream(args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(out / "train.csv", train.inputs, train.targets)
    write_dataset_csv(out / "test.csv", test.inputs, test.targets)
    save_model(model.network, out / "true_model.json")
    summary = {
        "indicators": list(model.indicators),
        "active_layers": list(model.active.indices),
        "shat": model.shat,
        "target_scale": model.target_scale,
    }
    atomic_write_text(out / "true_model_info.json", json.dumps(summary, indent=1) + "\n")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_train(args):
    data = load_data(args.data)
    if args.init_from:
        start = load_model(args.init_from)
        init = Warm(start)
        widths, activations = start.widths, start.activations
    else:
        widths = (1,) + (args.width,) * args.hidden_layers + (data.input_dim,)
        activations = default_activations(len(widths) - 1)
        init = None
    cfg = train_config(args)
    start = initialize(widths, activations, init or cfg.init, cfg.seed)
    reg = regularization(args, start.depth)
    fitted, report = sgd_fit(start, data, cfg, reg)
    save_model(fitted, args.out)
    print(json.dumps({
        "widths": list(fitted.widths),
        "epochs": report.epochs_run,
        "final_objective": report.final_objective,
        "loss": lsq_loss(fitted, data),
    }))
    return EXIT_OK


def _probes(args, dim):
    return sample_std_normal(RngStream(args.seed).child("probes"), args.probes, dim)


def cmd_condense(args):
    net = load_model(args.model)
    report = condense(net, args.mode, args.tol, probes=_probes(args, net.input_dim))
    save_model(report.condensed, args.out)
    text = json.dumps(report.to_dict(), indent=1) + "\n"
    if args.report:
        atomic_write_text(args.report, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_refit(args):
    net = load_model(args.model)
    data = load_data(args.data)
    cfg = train_config(args)
    _, condensed, refitted, report = sls_then_refit(
        data, net.widths, cfg, rl=0.0, tol=args.tol, mode=args.mode, fitted=net
    )
    save_model(refitted, args.out)
    print(json.dumps({
        "active_layers": list(report.active.indices),
        "condensed_widths": list(condensed.widths),
        "loss_condensed": lsq_loss(condensed, data),
        "loss_refit": lsq_loss(refitted, data),
    }))
    return EXIT_OK


def cmd_verify(args):
    a = load_model(args.model_a)
    b = load_model(args.model_b)
    if a.input_dim != b.input_dim:
        raise ShapeError(f"models take inputs of dimension {a.input_dim} and {b.input_dim}")
    residual = verify_equivalence(a, b, _probes(args, a.input_dim))
    print(repr(residual))
    return EXIT_OK


def cmd_gradcheck(args):
    net = load_model(args.model)
    data = load_data(args.data)
    reg = regularization(args, net.depth)
    error = gradient_check(net, data, None if reg.is_zero else reg, step=args.step)
    print(repr(error))
    return EXIT_OK


def _add_training_flags(p, epochs=200):
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--lr", type=float, default=1e-2, help="learning rate")
    p.add_argument("--batch", type=int, default=10, help="mini-batch size")
    p.add_argument("--seed", type=int, default=0)


def _add_reg_flags(p):
    p.add_argument("--rl", help="layer tuning: scalar or comma separated per layer 1..l-1")
    p.add_argument("--rc", help="connection tuning: scalar or comma separated per layer")
    p.add_argument("--rn", help="node tuning: scalar or comma separated per layer")


def _add_condense_flags(p):
    p.add_argument("--mode", choices=[m.value for m in CondenseMode], default=CondenseMode.AS_STATED.value)
    p.add_argument("--tol", type=float, default=DEFAULT_CLI_TOLERANCE)


def build_parser():
    parser = argparse.ArgumentParser(prog="layer-sparsity", description="Layer-sparse network training and condensation")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the simulation grid")
    p.add_argument("config", help="experiment config (JSON)")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--seed", type=int, help="overrides the config master_seed")
    p.add_argument("--runs", type=int, help="overrides the config n_runs")
    p.add_argument("--format", choices=["csv", "table"], default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="draw one simulation data set")
    p.add_argument("out_dir")
    p.add_argument("--hidden-layers", type=int, default=10)
    p.add_argument("--s-w", type=float, default=0.1)
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--input-dim", type=int, default=2)
    p.add_argument("--n-train", type=int, default=100)
    p.add_argument("--n-test", type=int, default=50)
    p.add_argument("--raw-targets", action="store_true", help="skip the unit root-mean-square target scaling")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a network to a data CSV")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    p.add_argument("--hidden-layers", type=int, default=10)
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--init-from", help="warm start from this model")
    _add_training_flags(p)
    _add_reg_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("condense", help="merge inactive layers")
    p.add_argument("model")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="also write the condensation report here")
    p.add_argument("--probes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_condense_flags(p)
    p.set_defaults(func=cmd_condense)

    p = sub.add_parser("refit", help="condense a layer-sparse model and refit it")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    _add_training_flags(p)
    _add_condense_flags(p)
    p.set_defaults(func=cmd_refit)

    p = sub.add_parser("verify", help="largest output difference between two models")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--probes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gradcheck", help="backprop against finite differences")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--step", type=float, default=1e-6)
    _add_reg_flags(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def configure_logging(verbosity):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    if getattr(args, "probes", 1) < 1:
        parser.error("--probes must be positive")
    try:
        return args.func(args)
    except DivergenceError as e:
        logger.error("%s", e)
        return EXIT_DIVERGED
    except (SoundnessError, PreconditionError) as e:
        logger.error("%s", e)
        return EXIT_UNSOUND
    except (ParseError, ShapeError, ValidationError, ParameterError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except OSError as e:
        logger.error("%s: %s", e.filename or "", e.strerror or e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
