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
spdgpr.data.dataset -- Loading, splitting, label noise and shift scenarios

Every operation here is a pure function of its inputs and seed.  Splits are stratified by class:
each class's members are shuffled with the seed, and the split sizes apportioned among the classes by
largest remainder (ties to the lower class index), so every split's class histogram stays within 1
of proportional for balanced data.
"""

__all__				= [ 'EmptySplitError', 'SplitSpec', 'ShiftScenario', 'SCENARIOS',
                                    'load_dataset', 'split', 'holdout', 'apportion',
                                    'inject_label_noise', 'apply_scenario', 'describe',
                                    'class_histogram', 'split_audit' ]

import collections
import logging
import math
import os

import numpy

from .. import defaults, misc
from .formats import RadargramSample, read_manifest, read_thumbnail

log				= logging.getLogger( __package__ )


class EmptySplitError( ValueError ):
    """A split, or one side of a scenario, would contain no samples."""


SplitSpec			= collections.namedtuple( 'SplitSpec', ( 'train_ratio', 'val_fraction', 'seed' ))
SplitSpec.__new__.__defaults__	= ( defaults.train_ratio, defaults.val_fraction, 0 )

# Samples whose metadata 'axis' value is in train_values go to training/validation, in test_values
# to test; all others are excluded
ShiftScenario			= collections.namedtuple( 'ShiftScenario', (
    'id', 'axis', 'train_values', 'test_values' ))

SCENARIOS			= collections.OrderedDict( ( s.id, s ) for s in (
    ShiftScenario( 'A', 'elevation_cm',	( 75, 100 ),	( 50, )),
    ShiftScenario( 'B', 'frequency_mhz',	( 200, ),	( 350, )),
    ShiftScenario( 'C', 'soil',		( 'dry_gravel', ),	( 'gravel', )),
    ShiftScenario( 'D', 'soil',		( 'wet_sand', ),	( 'sand', )),
))


def load_dataset( directory, classes=defaults.classes ):
    """All samples of a dataset directory, in manifest order; every file's header is validated."""
    seed, entries		= read_manifest( directory, classes )
    samples			= [ RadargramSample( read_thumbnail( os.path.join( directory, meta.file )), label, meta )
                                    for meta, label in entries ]
    log.normal( "Loaded %d samples from %s (seed %s): %s", len( samples ), directory, seed,
                misc.lazystr( lambda: class_histogram( samples, len( classes ))))
    return samples


def class_histogram( samples, num_classes=defaults.num_classes ):
    return [ int( n ) for n in numpy.bincount( [ s.label for s in samples ], minlength=num_classes ) ]


def apportion( total, weights ):
    """Split the integer total proportionally to the weights by largest remainder; each share is the
    floor or ceiling of its quota, and ties go to the earlier weight."""
    weights			= list( weights )
    whole			= sum( weights )
    if not 0 <= total <= whole:
        raise ValueError( "Cannot apportion %d among %d" % ( total, whole ))
    if whole == 0:
        return [ 0 ] * len( weights )
    quotas			= [ total * w / whole for w in weights ]
    shares			= [ int( math.floor( q )) for q in quotas ]
    order			= sorted( range( len( weights )), key=lambda i: ( -( quotas[i] - shares[i] ), i ))
    for i in order[:total - sum( shares )]:
        shares[i]	       += 1
    return shares


def stratified( samples, sizes, seed ):
    """Partition samples into len( sizes ) parts of the given total sizes, stratified by label.  Each
    part keeps the input order of its members."""
    rng				= numpy.random.default_rng( seed )
    by_class			= collections.OrderedDict()
    for index, sample in enumerate( samples ):
        by_class.setdefault( sample.label, [] ).append( index )
    labels			= sorted( by_class )
    remaining			= [ len( by_class[label] ) for label in labels ]
    shares			= []
    for size in sizes[:-1]:
        share			= apportion( size, remaining )
        remaining		= [ r - s for r, s in zip( remaining, share ) ]
        shares.append( share )
    shares.append( remaining )
    parts			= [ [] for _ in sizes ]
    for k, label in enumerate( labels ):
        members			= [ by_class[label][i] for i in rng.permutation( len( by_class[label] )) ]
        start			= 0
        for part, share in zip( parts, shares ):
            part.extend( members[start:start + share[k]] )
            start	       += share[k]
    return [ [ samples[i] for i in sorted( part ) ] for part in parts ]


def split( samples, spec=None ):
    """(train, val, test): train gets floor( train_ratio N ), val floor( val_fraction ) of the remainder."""
    spec			= spec or SplitSpec()
    if not 0 < spec.train_ratio < 1 or not 0 < spec.val_fraction < 1:
        raise ValueError( "Split ratios must lie in (0,1): %r" % ( spec, ))
    n				= len( samples )
    n_train			= int( math.floor( spec.train_ratio * n + 1e-9 ))
    n_val			= int( math.floor( spec.val_fraction * ( n - n_train ) + 1e-9 ))
    train, val, test		= stratified( samples, [ n_train, n_val, n - n_train - n_val ], spec.seed )
    for name, part in ( ( 'train', train ), ( 'validation', val ), ( 'test', test )):
        if not part:
            raise EmptySplitError( "Empty %s split of %d samples with %r" % ( name, n, spec ))
    log.detail( "Split %d samples %d/%d/%d (seed %s)", n, len( train ), len( val ), len( test ), spec.seed )
    return train, val, test


def holdout( samples, val_fraction, seed ):
    """(train, val) with floor( val_fraction N ) validation samples, stratified like split."""
    n				= len( samples )
    n_val			= int( math.floor( val_fraction * n + 1e-9 ))
    train, val			= stratified( samples, [ n - n_val, n_val ], seed )
    if not train or not val:
        raise EmptySplitError( "Empty train or validation holdout of %d samples at %r" % ( n, val_fraction ))
    return train, val


def inject_label_noise( train, fraction, seed, num_classes=defaults.num_classes ):
    """Relabels floor( fraction n ) seeded samples, each uniformly to one of the other classes.  Returns
    the new list, and the flip log: [ { "index", "file", "from", "to" }, ... ]."""
    if not 0 <= fraction <= 0.5:
        raise ValueError( "Label noise fraction must be in [0,0.5], not %r" % ( fraction, ))
    n				= len( train )
    count			= int( math.floor( fraction * n + 1e-9 ))
    if not count:
        return list( train ), []
    rng				= numpy.random.default_rng( seed )
    chosen			= sorted( int( i ) for i in rng.choice( n, size=count, replace=False ))
    result			= list( train )
    flips			= []
    for index in chosen:
        old			= result[index].label
        new			= int( rng.integers( num_classes - 1 ))
        new		       += new >= old
        result[index]		= result[index]._replace( label=new )
        flips.append({ 'index': index, 'file': result[index].meta.file, 'from': old, 'to': new })
    log.detail( "Flipped %d of %d training labels (seed %s)", count, n, seed )
    return result, flips


def apply_scenario( samples, scenario, swap=False ):
    """(trainval, test) for a shift scenario (or its id); swap exchanges the two sides."""
    scenario			= SCENARIOS[scenario] if not isinstance( scenario, ShiftScenario ) else scenario
    train_values, test_values	= scenario.train_values, scenario.test_values
    if swap:
        train_values, test_values = test_values, train_values
    trainval			= [ s for s in samples if getattr( s.meta, scenario.axis ) in train_values ]
    test			= [ s for s in samples if getattr( s.meta, scenario.axis ) in test_values ]
    for name, part, values in ( ( 'train/val', trainval, train_values ), ( 'test', test, test_values )):
        if not part:
            raise EmptySplitError( "Scenario %s %s side (%s in %s) matches no samples" % (
                scenario.id, name, scenario.axis, ", ".join( map( str, values ))))
    log.normal( "Scenario %s: %d train/val, %d test, %d excluded", scenario.id, len( trainval ), len( test ),
                len( samples ) - len( trainval ) - len( test ))
    return trainval, test


def describe( samples, classes=defaults.classes ):
    """Counts of samples by class x soil x elevation, and by class x frequency x elevation."""
    def table( axis ):
        counts			= collections.OrderedDict()
        for s in samples:
            row			= counts.setdefault( classes[s.label], collections.OrderedDict() )
            cell		= row.setdefault( str( getattr( s.meta, axis )), collections.OrderedDict() )
            key			= str( s.meta.elevation_cm )
            cell[key]		= cell.get( key, 0 ) + 1
        return counts
    return {
        'total':		len( samples ),
        'classes':		dict( zip( classes, class_histogram( samples, len( classes )))),
        'soil_elevation':	table( 'soil' ),
        'frequency_elevation':	table( 'frequency_mhz' ),
    }


def split_audit( parts, flips=None ):
    """A JSON-ready record of which files landed in which split (and any relabelling)."""
    audit			= { name: [ s.meta.file for s in part ] for name, part in parts.items() }
    if flips is not None:
        audit['flips']		= flips
    return audit
