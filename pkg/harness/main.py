#
# Spdgpr -- SPD matrix networks for GPR hyperbola classification
#
# Spdgpr is free software: you can redistribute it and/or modify it under the
# terms of the GNU General Public License as published by the Free Software
# Foundation, either version 3 of the License, or (at your option) any later
# version.
#

from __future__ import absolute_import, print_function, division

__author__                      = "The spdgpr developers"
__license__                     = "GPLv3 (or later)"

"""
spdgpr.harness.main -- The spdgpr command-line tool

    spdgpr [-v...] [-c <cfg|json>...] [--no-config] [-s key.path=<JSON>...] [-l <log>] <command> ...

    gen-data	[--spec <json>] --out <dir> [--seed N] [--jobs N]
    describe	[--data <dir>]
    train	[--data <dir>] [--out <checkpoint>]
    eval	--ckpt <checkpoint> [--data <dir>]
    gradcheck	[--layer <suite>[,...]|layer|model] [--trials N] [--tol X]
    experiment	--protocol {ratio,mislabel,scenario} [--data <dir>] [--seeds N] --out <csv> [--jobs N]

Results are printed to stdout as JSON (or the gradcheck table).  Exits 0 on success, 1 on a failed
check or run, and 2 on a configuration error.
"""

__all__				= [ 'main' ]

import argparse
import json
import logging
import sys

from .. import misc
from ..data import load_dataset, describe, FormatError, EmptySplitError
from ..linalg import NumericError, DimensionError
from ..sim import default_spec, load_spec, generate_dataset
from .config import ConfigError, load_config, with_changes
from .train import TrainingDiverged, ClassMismatchError, run_plain, evaluate_checkpoint
from .experiments import SETTINGS, run_sweep, summary_path
from .gradcheck import SUITES, selected, gradcheck, report

log				= logging.getLogger( __package__ )

# Failures of a run or a check (exit 1); configuration errors (exit 2) are ConfigError
FAILURES			= ( TrainingDiverged, NumericError, DimensionError, FormatError, EmptySplitError,
                                    ClassMismatchError, OSError )


def emit( obj ):
    print( json.dumps( obj, indent=4, sort_keys=True ))


def data_directory( cfg, args ):
    directory			= args.data or cfg.data
    if not directory:
        raise ConfigError( "No dataset directory; use --data, or configure 'data'" )
    return directory


def dataset( cfg, args ):
    return load_dataset( data_directory( cfg, args ))


def gen_data( cfg, args ):
    spec			= load_spec( args.spec ) if args.spec else default_spec()
    spec['scene']		= dict( cfg.scene.plain(), **( spec.get( 'scene' ) or {} ))
    seed			= cfg.seed if args.seed is None else args.seed
    try:
        samples			= generate_dataset( spec, args.out, seed, jobs=args.jobs or cfg.jobs )
    except ( KeyError, TypeError, ValueError ) as exc:
        raise ConfigError( "Invalid dataset spec: %s" % exc )
    emit({ 'directory': args.out, 'samples': len( samples ), 'seed': seed })
    return 0


def describe_data( cfg, args ):
    emit( describe( dataset( cfg, args )))
    return 0


def train_model( cfg, args ):
    run, _			= run_plain( cfg, dataset( cfg, args ), checkpoint=args.out )
    emit( dict( run._asdict(), checkpoint=args.out ))
    return 0


def eval_model( cfg, args ):
    result			= evaluate_checkpoint( args.ckpt, data_directory( cfg, args ))
    emit({ 'accuracy': result.accuracy, 'confusion': result.confusion.tolist() })
    return 0


def check_gradients( cfg, args ):
    try:
        suites			= selected( args.layer )
    except ValueError as exc:
        raise ConfigError( str( exc ))
    if args.trials < 1 or not args.tol > 0:
        raise ConfigError( "Gradcheck needs trials >= 1 and a positive tolerance" )
    results			= gradcheck( ",".join( suites ), trials=args.trials, tol=args.tol, seed=cfg.seed )
    print( report( results ))
    return 0 if all( r.passed for r in results ) else 1


def experiment( cfg, args ):
    changes			= { 'protocol': args.protocol }
    if args.seeds is not None:
        changes['seeds']	= args.seeds
    if args.jobs is not None:
        changes['jobs']		= args.jobs
    cfg				= with_changes( cfg, changes )
    rows			= run_sweep( cfg, dataset( cfg, args ), out=args.out )
    emit({ 'rows': len( rows ), 'csv': args.out, 'summary': summary_path( args.out ) })
    return 0


def parser():
    ap				= argparse.ArgumentParser(
        prog="spdgpr",
        description="SPD matrix networks for GPR hyperbola classification",
        epilog="" )

    ap.add_argument( '-v', '--verbose', action="count",
                     default=0,
                     help="Display logging information." )
    ap.add_argument( '-c', '--config', action='append',
                     help="Add another (higher priority) config file path (.cfg, or .json)." )
    ap.add_argument( '--no-config', action='store_true',
                     default=False,
                     help="Disable loading of spdgpr.cfg files (default: False)" )
    ap.add_argument( '-s', '--set', action='append', default=[],
                     help="Override a configuration value, eg. optim.learning_rate=0.01" )
    ap.add_argument( '-l', '--log',
                     help="Log file, if desired" )

    sub				= ap.add_subparsers( dest='command', metavar='command' )
    sub.required		= True

    gen				= sub.add_parser( 'gen-data', help="Generate a synthetic thumbnail dataset" )
    gen.add_argument( '--spec', help="JSON dataset spec (default: the 1584 sample default)" )
    gen.add_argument( '--out', required=True, help="Dataset directory" )
    gen.add_argument( '--seed', type=int, default=None, help="Master seed (default: configured seed)" )
    gen.add_argument( '--jobs', type=int, default=None, help="Worker processes" )
    gen.set_defaults( function=gen_data )

    des				= sub.add_parser( 'describe', help="Count a dataset's samples by class and configuration" )
    des.add_argument( '--data', help="Dataset directory" )
    des.set_defaults( function=describe_data )

    trn				= sub.add_parser( 'train', help="Train a model with the configured split" )
    trn.add_argument( '--data', help="Dataset directory" )
    trn.add_argument( '--out', help="Checkpoint to write" )
    trn.set_defaults( function=train_model )

    evl				= sub.add_parser( 'eval', help="Evaluate a checkpoint on a dataset" )
    evl.add_argument( '--ckpt', required=True, help="Checkpoint to evaluate" )
    evl.add_argument( '--data', help="Dataset directory" )
    evl.set_defaults( function=eval_model )

    gck				= sub.add_parser( 'gradcheck', help="Finite-difference checks of the backward passes" )
    gck.add_argument( '--layer', default=None,
                      help="Suites: layer, model, or any of %s (default: all)" % ", ".join( SUITES ))
    gck.add_argument( '--trials', type=int, default=20, help="Trials per layer; entries per model parameter" )
    gck.add_argument( '--tol', type=float, default=1.0e-5, help="Relative error tolerance (default: 1e-5)" )
    gck.set_defaults( function=check_gradients )

    exp				= sub.add_parser( 'experiment', help="Run a sweep, writing a CSV and its summary" )
    exp.add_argument( '--protocol', required=True, choices=list( SETTINGS ))
    exp.add_argument( '--data', help="Dataset directory" )
    exp.add_argument( '--seeds', type=int, default=None, help="Seeds per setting" )
    exp.add_argument( '--out', required=True, help="CSV file" )
    exp.add_argument( '--jobs', type=int, default=None, help="Worker processes" )
    exp.set_defaults( function=experiment )
    return ap


def main( argv=None ):
    """Pass the desired argv (excluding the program name in sys.arg[0]); argv=None is equivalent to
    sys.argv[1:].  Returns the exit status."""
    try:
        args			= parser().parse_args( argv )
    except SystemExit as exc:
        return exc.code

    # Set up logging level (-v...) and --log <file>
    levelmap 			= {
        0: logging.WARNING,
        1: logging.NORMAL,
        2: logging.DETAIL,
        3: logging.INFO,
        4: logging.DEBUG,
        }
    misc.log_cfg['level']	= ( levelmap[args.verbose]
                                    if args.verbose in levelmap
                                    else logging.DEBUG )
    if args.log:
        misc.log_cfg['filename']= args.log
    logging.basicConfig( **misc.log_cfg )

    try:
        cfg			= load_config( files=args.config or [], overrides=args.set,
                                               config_files=not args.no_config )
        return args.function( cfg, args )
    except ConfigError as exc:
        log.error( "Configuration error: %s", exc )
        print( "spdgpr %s: %s" % ( args.command, exc ), file=sys.stderr )
        return 2
    except FAILURES as exc:
        log.error( "%s failed: %s", args.command, exc )
        print( "spdgpr %s failed: %s" % ( args.command, exc ), file=sys.stderr )
        return 1
