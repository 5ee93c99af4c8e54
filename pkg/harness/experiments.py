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
spdgpr.harness.experiments -- Training-ratio, mislabelling and shift-scenario sweeps

A sweep is a list of independent cells, one per ( setting, seed ); each cell splits the samples,
trains and evaluates one model, and yields one row.  Rows are always returned (and written) in cell
order, whether the cells ran sequentially or in a process pool.  Each row carries the config_hash of
the sweep's configuration and the cell's seed; accuracies are rounded to 4 decimals, so the summary
statistics recompute identically from the raw CSV.
"""

__all__				= [ 'SETTINGS', 'cells', 'run_cell', 'run_sweep', 'run_ratio_sweep',
                                    'run_mislabel_sweep', 'run_scenarios', 'summarize', 'boxplot',
                                    'inversions', 'write_csv', 'summary_path' ]

import collections
import concurrent.futures
import csv
import logging
import os

from .. import misc
from ..dotdict import dotdict
from ..data import split, holdout, inject_label_noise, apply_scenario, SplitSpec
from .config import ConfigError, config_hash, with_changes
from .train import train

log				= logging.getLogger( __package__ )

# The setting each protocol sweeps, and the configuration list of its values
SETTINGS			= collections.OrderedDict([
    ( 'ratio',		( 'ratio',	'ratios' )),
    ( 'mislabel',	( 'fraction',	'fractions' )),
    ( 'scenario',	( 'scenario',	'scenarios' )),
])


def cells( cfg, protocol ):
    """The ( setting, seed ) of every cell of a sweep, in order: each setting for seeds cfg.seed,
    cfg.seed+1, ... (cfg.seeds of them)."""
    if protocol not in SETTINGS:
        raise ConfigError( "Unknown sweep protocol %r; one of %s" % ( protocol, ", ".join( SETTINGS )))
    _, values			= SETTINGS[protocol]
    return [ ( value, cfg.seed + i ) for value in cfg[values] for i in range( cfg.seeds ) ]


def partition( cfg, protocol, value, samples ):
    """( train, val, test, flips ) for one cell; cfg.seed is the cell's seed."""
    flips			= []
    if protocol == 'ratio':
        train_samples, val_samples, test_samples = split(
            samples, SplitSpec( value, cfg.val_fraction, cfg.seed ))
    elif protocol == 'mislabel':
        train_samples, val_samples, test_samples = split(
            samples, SplitSpec( cfg.train_ratio, cfg.val_fraction, cfg.seed ))
        train_samples, flips	= inject_label_noise( train_samples, value, [ cfg.seed, 2 ] )
    else:
        trainval, test_samples	= apply_scenario( samples, value )
        train_samples, val_samples = holdout( trainval, cfg.scenario_val_fraction, cfg.seed )
    return train_samples, val_samples, test_samples, flips


# The samples shared by every cell run in a worker process
_samples			= None

def _share( samples ):
    global _samples
    _samples			= samples


def run_cell( work ):
    """( protocol, setting, seed, plain config[, samples] ) -> row"""
    protocol, value, seed, plain, samples = ( work + ( None, ))[:5]
    samples			= _samples if samples is None else samples
    base			= dotdict( plain )
    cfg				= with_changes( base, seed=seed )
    train_samples, val_samples, test_samples, flips = partition( cfg, protocol, value, samples )
    run, _			= train( cfg, train_samples, val_samples, test_samples )
    setting, _			= SETTINGS[protocol]
    row				= collections.OrderedDict( [ ( setting, value ) ] )
    row.update( seed=seed, config_hash=config_hash( base ), train=len( train_samples ),
                val=len( val_samples ), test=len( test_samples ), flipped=len( flips ),
                best_epoch=run.best_epoch, val_accuracy=round( max( run.val_accuracy ), 4 ),
                test_accuracy=round( run.test_accuracy, 4 ))
    log.normal( "%s %s seed %d: test accuracy %.2f%% (epoch %d)", protocol, value, seed,
                run.test_accuracy, run.best_epoch )
    return row


def run_sweep( cfg, samples, protocol=None, out=None ):
    """Runs every cell of the sweep (cfg.protocol, unless protocol is given), in a pool of cfg.jobs
    processes if > 1.  Writes the rows and their summary if out names a CSV file.  Returns the rows."""
    protocol			= protocol or cfg.protocol
    work			= [ ( protocol, value, seed, cfg.plain() ) for value, seed in cells( cfg, protocol ) ]
    log.normal( "Sweeping %s: %d cells (%d seeds), %d jobs", protocol, len( work ), cfg.seeds, cfg.jobs )
    begun			= misc.timer()
    if cfg.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=cfg.jobs, initializer=_share, initargs=( samples, )) as pool:
            rows		= list( pool.map( run_cell, work ))
    else:
        rows			= [ run_cell( w + ( samples, )) for w in work ]
    log.normal( "Swept %d %s cells in %.1fs", len( rows ), protocol, misc.timer() - begun )
    if out:
        write_csv( out, rows )
        write_csv( summary_path( out ), summarize( rows, protocol ))
    return rows


def run_ratio_sweep( cfg, samples, out=None ):
    return run_sweep( cfg, samples, 'ratio', out=out )


def run_mislabel_sweep( cfg, samples, out=None ):
    return run_sweep( cfg, samples, 'mislabel', out=out )


def run_scenarios( cfg, samples, out=None ):
    return run_sweep( cfg, samples, 'scenario', out=out )


def boxplot( values ):
    """Quartiles (nearest-rank), whiskers at the most extreme values within 1.5 IQR of the
    quartiles, and the outliers beyond them."""
    q1, median, q3		= ( misc.nearest_rank( values, p ) for p in ( 25, 50, 75 ))
    low, high			= q1 - 1.5 * ( q3 - q1 ), q3 + 1.5 * ( q3 - q1 )
    inside			= [ v for v in values if low <= v <= high ]
    return collections.OrderedDict([
        ( 'q1', q1 ), ( 'median', median ), ( 'q3', q3 ),
        ( 'whisker_low', min( inside )), ( 'whisker_high', max( inside )),
        ( 'outliers', sorted( v for v in values if not low <= v <= high )),
    ])


def summarize( rows, protocol ):
    """One summary row per setting (in order of appearance): the count, mean and 5/50/95th
    nearest-rank percentiles of the test accuracy; scenarios add their boxplot statistics."""
    setting, _			= SETTINGS[protocol]
    groups			= collections.OrderedDict()
    for row in rows:
        groups.setdefault( row[setting], [] ).append( float( row['test_accuracy'] ))
    summary			= []
    for value, accuracies in groups.items():
        row			= collections.OrderedDict([
            ( setting, value ), ( 'count', len( accuracies )),
            ( 'mean', round( sum( accuracies ) / len( accuracies ), 4 )),
            ( 'p5', misc.nearest_rank( accuracies, 5 )),
            ( 'p50', misc.nearest_rank( accuracies, 50 )),
            ( 'p95', misc.nearest_rank( accuracies, 95 )),
        ])
        if protocol == 'scenario':
            row.update( boxplot( accuracies ))
            row['outliers']	= ";".join( "%.4f" % v for v in row['outliers'] )
        summary.append( row )
    return summary


def inversions( values, increasing=True ):
    """The number of adjacent pairs out of the expected (non-strict) order."""
    pairs			= zip( values, values[1:] )
    return sum( 1 for a, b in pairs if ( b < a if increasing else b > a ))


def summary_path( path ):
    stem, _			= os.path.splitext( path )
    return stem + '.summary.csv'


def write_csv( path, rows ):
    """UTF-8 CSV with a header row and LF line endings; floats are written with 4 decimals."""
    assert rows, "No rows to write to %s" % path
    with open( path, 'w', encoding='utf-8', newline='' ) as f:
        writer			= csv.DictWriter( f, fieldnames=list( rows[0] ), lineterminator='\n' )
        writer.writeheader()
        for row in rows:
            writer.writerow({ k: "%.4f" % v if isinstance( v, float ) else v for k, v in row.items() })
    log.normal( "Wrote %d rows to %s", len( rows ), path )
