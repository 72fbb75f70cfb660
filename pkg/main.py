import argparse
import os
import sys

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError

# Manual Path Setup
sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))

from expconcavify import settings
from expconcavify.analysis.characterization import (
    check_canonical_condition,
    check_identity_necessary,
    check_prop4_identity,
    check_prop5,
    check_prop6,
    check_theorem7,
)
from expconcavify.analysis.numeric import numeric_exp_concavity, numeric_mixability
from expconcavify.bregman.divergence import (
    blf_from_proper_loss,
    blf_mixability_report,
    check_blf_exp_concavity,
    check_lemma14_condition,
    kl_loss,
    kl_pair_loss,
)
from expconcavify.engine.game import GameConfig, run_game
from expconcavify.engine.substitution import SUBSTITUTIONS
from expconcavify.errors import ExpConcavifyError, InvalidInputError
from expconcavify.geometry.cloud import build_cloud, check_prop1_condition, ray_escape_witness
from expconcavify.geometry.surrogate import build_surrogate, in_S_epsilon, surrogate_loss
from expconcavify.links.composite import CompositeLoss
from expconcavify.links.link_functions import LINK_BUILDERS, build_link
from expconcavify.losses.catalog import LOSS_CATALOG, catalog_loss
from expconcavify.losses.risk import mixability_constant
from expconcavify.providers.dataset import ingest_outcome_csv
from expconcavify.providers.experts import ExpertSettingSpec, build_experts
from expconcavify.providers.outcomes import OutcomeSpec, generate_outcomes
from expconcavify.sweep import sweep_appendix_a

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2

# Lowest-precedence values; explicit flags, then --config, then the environment win over these.
DEFAULTS = {
    "loss": "log", "n": 2, "link": "identity", "m": 30, "beta": None, "alpha": None, "eta": 0.5,
    "algo": "AA", "subst": "inverse_loss", "experts": "1", "p": 0.5, "T": 100, "epsilon": 0.05,
    "c_beta": 1.0, "method": "analytic", "witness": "log",
}
# games read a binary prediction as the probability of class 2
COMMAND_DEFAULTS = {"run": {"link": "complement"}}
CONVERTERS = {
    "n": int, "m": int, "T": int, "seed": int, "workers": int,
    "beta": float, "alpha": float, "eta": float, "p": float, "epsilon": float, "c_beta": float,
    "allow_non_exp_concave": lambda raw: str(raw).lower() in ("1", "true", "yes", "on"),
}
ENVIRONMENT = {"seed": settings.master_seed, "workers": settings.max_workers, "out_dir": settings.output_dir}


def configure_logging(verbose=False):
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else settings.log_level())
    log_file = settings.log_file()
    directory = os.path.dirname(log_file)
    if directory:
        os.makedirs(directory, exist_ok=True)
    logger.add(log_file, level="DEBUG")


def parse_values(raw):
    try:
        return [float(x) for x in str(raw).replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise InvalidInputError(f"expected comma-separated numbers, got '{raw}'") from None


def resolve(args):
    """Fill unset options from --config, then the environment, then DEFAULTS."""
    config = settings.read_config_file(args.config) if getattr(args, "config", None) else {}
    defaults = {**DEFAULTS, **COMMAND_DEFAULTS.get(args.command, {})}
    for key, value in vars(args).items():
        if value is not None:
            continue
        if key in config:
            converter = CONVERTERS.get(key, str)
            try:
                setattr(args, key, converter(config[key]))
            except ValueError:
                raise InvalidInputError(f"config value for {key} is not valid: '{config[key]}'") from None
        elif key in ENVIRONMENT:
            setattr(args, key, ENVIRONMENT[key]())
        elif key in defaults:
            setattr(args, key, defaults[key])
    return args


def _composite(args, beta=None):
    loss = catalog_loss(args.loss, args.n)
    return CompositeLoss(base=loss, link=build_link(args.link, loss, beta))


def _emit(report, out):
    print(report.summary())
    for line in report.diagnostics:
        print(f"  {line}")
    if out:
        report.to_csv(out)
        logger.info(f"Report written to {out}")


# --- losses ---

def cmd_losses_eval(args):
    loss = catalog_loss(args.loss, args.n)
    p = np.asarray(parse_values(args.probs))
    if len(p) == args.n - 1:
        p = np.append(p, 1.0 - p.sum())
    print(f"loss {loss.name} at p={p.tolist()}")
    print(f"  partial losses: {np.round(loss.partials(p), 12).tolist()}")
    print(f"  bayes risk: {float(loss.risk(p)):.12g}")
    if loss.n == 2 and loss.weight is not None and loss.is_strictly_proper:
        print(f"  weight: {float(loss.weight(np.asarray(p[0]))):.12g}")
        print(f"  mixability constant: {mixability_constant(loss):.6g}")


# --- checks ---

def cmd_check_mixability(args):
    _emit(numeric_mixability(catalog_loss(args.loss, 2), args.beta or mixability_constant(catalog_loss(args.loss, 2))), args.out)


def cmd_check_expconcavity(args):
    if args.alpha is None:
        raise InvalidInputError("--alpha is required")
    loss = catalog_loss(args.loss, args.n)
    if args.method == "numeric":
        _emit(numeric_exp_concavity(_composite(args, args.beta), args.alpha), args.out)
    elif loss.n == 3:
        _emit(check_prop4_identity(loss, args.alpha, m=args.m), args.out)
    elif args.link == "canonical":
        _emit(check_canonical_condition(loss, args.alpha), args.out)
    else:
        _emit(check_prop5(loss, build_link(args.link, loss, args.beta), args.alpha), args.out)


def cmd_check_prop6(args):
    if args.alpha is None:
        raise InvalidInputError("--alpha is required")
    loss = catalog_loss(args.loss, 2)
    if args.link == "identity":
        _emit(check_identity_necessary(loss, args.alpha), args.out)
    else:
        _emit(check_prop6(loss, build_link(args.link, loss, args.beta), args.alpha), args.out)


THEOREM7_WITNESSES = {
    "log": (lambda q: -4.0, lambda q: -4.0),
    "square": (lambda q: -1.0 / q ** 2, lambda q: -1.0 / (1.0 - q) ** 2),
}


def cmd_check_thm7(args):
    if args.alpha is None:
        raise InvalidInputError("--alpha is required")
    try:
        a, b = THEOREM7_WITNESSES[args.witness]
    except KeyError:
        raise InvalidInputError(f"unknown witness {args.witness}, try: " + ", ".join(THEOREM7_WITNESSES)) from None
    _emit(check_theorem7(catalog_loss(args.loss, 2), a, b, args.alpha), args.out)


# --- links ---

def cmd_link_eval(args):
    loss = catalog_loss(args.loss, 2)
    link = build_link(args.link, loss, args.beta)
    q = np.asarray(parse_values(args.values))
    for value, forward, slope in zip(q, np.atleast_1d(link.forward(q)), np.atleast_1d(link.derivative(q))):
        print(f"psi({value:g}) = {forward:.12g}   psi'({value:g}) = {slope:.12g}")


def cmd_link_invert(args):
    loss = catalog_loss(args.loss, 2)
    link = build_link(args.link, loss, args.beta)
    v = np.asarray(parse_values(args.values))
    for value, inverse in zip(v, np.atleast_1d(link.invert(v))):
        print(f"psi^-1({value:g}) = {inverse:.12g}")


# --- games ---

def cmd_run(args):
    config = GameConfig.create(
        _composite(args, args.beta), algorithm=args.algo, substitution=args.subst, eta=args.eta,
        seed=args.seed, allow_non_exp_concave=bool(args.allow_non_exp_concave),
    )
    if args.outcomes:
        outcomes, file_predictions = ingest_outcome_csv(args.outcomes)
    else:
        outcomes = generate_outcomes(OutcomeSpec(kind="bernoulli", p=args.p, T=args.T, seed=config.seed))
        file_predictions = None
    if args.experts in ("1", "2", "3"):
        spec = ExpertSettingSpec.numbered(args.experts)
    elif args.experts == "file" and file_predictions is not None:
        spec = ExpertSettingSpec(kind="file", path=args.outcomes)
    else:
        spec = ExpertSettingSpec(kind="file", path=args.experts)
    trace = run_game(config, build_experts(spec, outcomes), outcomes)
    print(f"{config.algorithm} {config.composite.name} eta={config.eta:g}: T={len(trace.records)}, "
          f"regret {trace.final_regret:.6g}, bound {trace.bound:.6g}")
    if args.out:
        trace.to_csv(args.out)
        logger.info(f"Trace written to {args.out}")
    logger.success("Game complete.")


def cmd_sweep(args):
    path = sweep_appendix_a(out_dir=args.out_dir, T=args.T, master_seed=args.seed, max_workers=args.workers)
    print(path)


# --- geometry ---

def cmd_geometry_cloud(args):
    loss = catalog_loss(args.loss, args.n)
    cloud = build_cloud(loss, args.beta or loss.known_mixability or 1.0, args.m)
    holds, witness = check_prop1_condition(cloud)
    print(f"cloud {loss.name} n={loss.n} beta={cloud.beta:g} m={cloud.m}: {len(cloud.points)} points, "
          f"boundary condition {'holds' if holds else 'fails'}")
    if args.out:
        cloud.to_frame().to_csv(args.out, index=False)


def cmd_geometry_witness(args):
    loss = catalog_loss(args.loss, args.n)
    witness = ray_escape_witness(build_cloud(loss, args.beta or loss.known_mixability or 1.0, args.m))
    if witness is None:
        print("no escaping ray found")
        return
    print(f"escaping midpoint {np.round(witness.c, 6).tolist()} (max travel {witness.max_travel:g})")
    if args.out:
        pd.DataFrame([witness.to_row()]).to_csv(args.out, index=False)


def cmd_geometry_surrogate(args):
    loss = catalog_loss(args.loss, args.n)
    beta = args.beta or loss.known_mixability or 1.0
    model = build_surrogate(loss, beta, args.epsilon, args.m)
    p = np.asarray(parse_values(args.probs))
    value = surrogate_loss(model, p)
    print(f"surrogate at p={p.tolist()}: {np.round(value, 9).tolist()}")
    print(f"  loss: {np.round(loss.partials(p), 9).tolist()}, in S_epsilon: {in_S_epsilon(loss, beta, args.epsilon, p)}")


# --- bregman ---

def cmd_bregman_kl(args):
    print(f"{kl_loss(parse_values(args.y), parse_values(args.v)):.12g}")


def cmd_bregman_check(args):
    pair = kl_pair_loss() if args.loss == "kl" else blf_from_proper_loss(catalog_loss(args.loss, 2))
    beta = args.beta or 1.0
    _emit(blf_mixability_report(pair, beta), args.out)
    _emit(check_blf_exp_concavity(pair, beta), None)
    _emit(check_lemma14_condition(pair, beta, args.c_beta), None)


def build_parser():
    parser = argparse.ArgumentParser(prog="expconcavify", description="Mixability, exp-concavity and expert-advice games.")
    parser.add_argument("--config", help="flat key=value file mirroring the long flags")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    def loss_options(sub, link=False):
        sub.add_argument("--loss", choices=sorted(LOSS_CATALOG) + (["kl"] if sub.prog.endswith("bregman check") else []))
        sub.add_argument("--n", type=int)
        sub.add_argument("--beta", type=float)
        sub.add_argument("--out")
        if link:
            sub.add_argument("--link", choices=sorted(LINK_BUILDERS))

    losses = commands.add_parser("losses").add_subparsers(dest="action", required=True)
    sub = losses.add_parser("eval")
    loss_options(sub)
    sub.add_argument("--p", dest="probs", required=True, help="probabilities, e.g. 0.2,0.8")
    sub.set_defaults(handler=cmd_losses_eval)

    check = commands.add_parser("check").add_subparsers(dest="action", required=True)
    for name, handler in (("mixability", cmd_check_mixability), ("expconcavity", cmd_check_expconcavity),
                          ("prop6", cmd_check_prop6), ("thm7", cmd_check_thm7)):
        sub = check.add_parser(name)
        loss_options(sub, link=True)
        sub.add_argument("--alpha", type=float)
        sub.add_argument("--method", choices=["analytic", "numeric"])
        sub.add_argument("--witness", choices=sorted(THEOREM7_WITNESSES))
        sub.add_argument("--m", type=int, help="barycentric resolution for three-class checks")
        sub.set_defaults(handler=handler)

    link = commands.add_parser("link").add_subparsers(dest="action", required=True)
    for name, handler in (("eval", cmd_link_eval), ("invert", cmd_link_invert)):
        sub = link.add_parser(name)
        loss_options(sub, link=True)
        sub.add_argument("--values", required=True, help="comma-separated points")
        sub.set_defaults(handler=handler)

    sub = commands.add_parser("run")
    loss_options(sub, link=True)
    sub.add_argument("--algo", choices=["AA", "WAA"])
    sub.add_argument("--subst", choices=list(SUBSTITUTIONS))
    sub.add_argument("--eta", type=float)
    sub.add_argument("--experts", help="1, 2, 3, 'file' (columns of --outcomes) or a CSV path")
    sub.add_argument("--outcomes", help="outcome CSV with header t,y[,e1,...]")
    sub.add_argument("--p", type=float)
    sub.add_argument("--T", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--allow-non-exp-concave", dest="allow_non_exp_concave", action="store_const", const=True)
    sub.set_defaults(handler=cmd_run)

    sub = commands.add_parser("sweep")
    sub.add_argument("--out", dest="out_dir")
    sub.add_argument("--T", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--workers", type=int)
    sub.set_defaults(handler=cmd_sweep)

    geometry = commands.add_parser("geometry").add_subparsers(dest="action", required=True)
    for name, handler in (("cloud", cmd_geometry_cloud), ("witness", cmd_geometry_witness),
                          ("surrogate", cmd_geometry_surrogate)):
        sub = geometry.add_parser(name)
        loss_options(sub)
        sub.add_argument("--m", type=int)
        if name == "surrogate":
            sub.add_argument("--epsilon", type=float)
            sub.add_argument("--p", dest="probs", required=True)
        sub.set_defaults(handler=handler)

    bregman = commands.add_parser("bregman").add_subparsers(dest="action", required=True)
    sub = bregman.add_parser("kl")
    sub.add_argument("--y", required=True)
    sub.add_argument("--v", required=True)
    sub.set_defaults(handler=cmd_bregman_kl)
    sub = bregman.add_parser("check")
    loss_options(sub)
    sub.add_argument("--c-beta", dest="c_beta", type=float)
    sub.set_defaults(handler=cmd_bregman_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        resolve(args)
        args.handler(args)
    except (InvalidInputError, ValidationError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except ExpConcavifyError as e:
        logger.error(f"Computation failed: {e}")
        return EXIT_RUNTIME
    logger.success(f"{args.command} done.")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
