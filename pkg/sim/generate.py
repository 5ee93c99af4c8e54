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
spdgpr.sim.generate -- Synthetic thumbnail datasets

A dataset spec is a list of cells, each a count of samples of one class, soil, elevation and
frequency, and optional scene overrides:

    { "cells": [ { "class": "metal", "soil": "sand", "elevation_cm": 50, "frequency_mhz": 200,
                   "count": 13 }, ... ],
      "scene": { "noise_sigma": 0.05, ... } }

Samples are numbered in cell order, and sample i draws everything from its own stream
default_rng( [ seed, i ] ); generation in a process pool therefore produces the same bytes.
"""

__all__				= [ 'default_spec', 'load_spec', 'expand_spec', 'render_sample', 'generate_dataset' ]

import concurrent.futures
import itertools
import json
import logging
import math
import os

import numpy

from .. import defaults, misc
from ..data.formats import sample_filename, write_thumbnail, write_manifest
from .radargram import random_scene, synthesize_bscan, extract_thumbnail, SceneConfig

log				= logging.getLogger( __package__ )

CELL_FIELDS			= ( 'class', 'soil', 'elevation_cm', 'frequency_mhz', 'count' )


def default_spec( per_cell=defaults.per_cell ):
    """per_cell samples of every class x elevation, spread as evenly as possible (earlier combinations
    first) over the soil x frequency combinations; 4 x 4 x 99 = 1584 by default."""
    combos			= list( itertools.product( defaults.soils, defaults.frequencies_mhz ))
    cells			= []
    for cls in defaults.classes:
        for elevation in defaults.elevations_cm:
            for k, ( soil, frequency ) in enumerate( combos ):
                count		= per_cell // len( combos ) + ( k < per_cell % len( combos ))
                if count:
                    cells.append({ 'class': cls, 'soil': soil, 'elevation_cm': elevation,
                                   'frequency_mhz': frequency, 'count': count })
    return { 'cells': cells, 'scene': {} }


def load_spec( path ):
    with open( path, 'r', encoding='utf-8' ) as f:
        return json.load( f )


def expand_spec( spec ):
    """Validates the spec; returns the per-sample ( class, soil, elevation_cm, frequency_mhz ) list, and
    the scene overrides."""
    overrides			= dict( spec.get( 'scene' ) or {} )
    # Geometry and seeds are drawn per sample
    unknown			= set( overrides ) - ( set( SceneConfig._fields[7:] ) - { 'seed' } )
    if unknown:
        raise ValueError( "Scene overrides may not set %s" % ", ".join( sorted( unknown )))
    samples			= []
    for num, cell in enumerate( spec.get( 'cells', [] )):
        missing			= [ f for f in CELL_FIELDS if f not in cell ]
        if missing:
            raise ValueError( "Cell %d lacks %s" % ( num, ", ".join( missing )))
        if cell['class'] not in defaults.classes:
            raise ValueError( "Cell %d has unknown class %r" % ( num, cell['class'] ))
        if cell['soil'] not in defaults.soils:
            raise ValueError( "Cell %d has unknown soil %r" % ( num, cell['soil'] ))
        for key, low in (( 'elevation_cm', 0 ), ( 'frequency_mhz', None )):
            value		= cell[key]
            if ( isinstance( value, bool ) or not isinstance( value, ( int, float ))
                 or not math.isfinite( value ) or not ( value > 0 if low is None else value >= low )):
                raise ValueError( "Cell %d %s must be a %s number, not %r" % (
                    num, key, "positive" if low is None else "non-negative", value ))
        if not isinstance( cell['count'], int ) or cell['count'] < 0:
            raise ValueError( "Cell %d count must be a non-negative integer, not %r" % ( num, cell['count'] ))
        samples.extend( [ ( cell['class'], cell['soil'], cell['elevation_cm'], cell['frequency_mhz'] ) ] * cell['count'] )
    return samples, overrides


def render_sample( args ):
    """( seed, index, ( class, soil, elevation, frequency ), overrides ) -> RadargramSample."""
    seed, index, ( cls, soil, elevation, frequency ), overrides = args
    rng				= numpy.random.default_rng([ seed, index ])
    scene			= random_scene( rng, cls, soil, elevation, frequency, **overrides )
    return extract_thumbnail( synthesize_bscan( scene ), scene, rng=rng, file=sample_filename( index ))


def generate_dataset( spec, directory, seed, jobs=1 ):
    """Writes every sample of the spec, and the manifest, into directory; returns the samples."""
    cells, overrides		= expand_spec( spec )
    if not os.path.isdir( directory ):
        os.makedirs( directory )
    work			= [ ( seed, index, cell, overrides ) for index, cell in enumerate( cells ) ]
    begun			= misc.timer()
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor( max_workers=jobs ) as pool:
            samples		= list( pool.map( render_sample, work, chunksize=16 ))
    else:
        samples			= [ render_sample( w ) for w in work ]
    for sample in samples:
        write_thumbnail( os.path.join( directory, sample.meta.file ), sample.image )
    write_manifest( directory, samples, seed )
    log.normal( "Generated %d samples into %s (seed %s) in %.1fs", len( samples ), directory, seed,
                misc.timer() - begun )
    return samples
