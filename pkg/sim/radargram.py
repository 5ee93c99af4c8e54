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
spdgpr.sim.radargram -- Ray-based synthetic B-scans, and the thumbnails cut from them

A B-scan is trace_samples (time) x positions.  An antenna at position x, elevation e above the
ground, sees a reflector at ( x0, depth ) after the two-way travel time

    t( x ) = 2 ( e / c + r / v ),  r = sqrt( depth^2 + ( x - x0 )^2 )

with amplitude a exp( -2 alpha r ) depth / r.  A horizontal reflector segment of half-width h
uses the distance to its nearest point, which flattens the apex.  Each class is a set of
reflectors:

    class	reflector			amplitude	polarity
    metal	point				1.0		reversed
    shelter	roof segment (h 1.0 m)		0.8		normal
		two corners, 0.3 m below	0.5		reversed
		base segment, 1.0 m below	0.4		normal
    nonmetal	segment (h 0.15 m)		0.35		reversed, wavelet 1.5x wider
    empty	(none)

Every scene also gets its horizontal layer interfaces, seeded point-scatterer clutter and Gaussian
noise.  The simulator knows the ground truth, so each thumbnail is cropped from the object's known
bounding box; the empty class uses a random box of the same size that does not overlap the box a
point object would occupy.
"""

__all__				= [ 'ApertureError', 'BoxError', 'RickerConfig', 'SceneConfig', 'Reflector', 'Box',
                                    'ricker', 'ricker_wavelet', 'ricker_minimum', 'reflectors',
                                    'travel_time', 'positions', 'synthesize_bscan', 'object_box',
                                    'reference_box', 'empty_box', 'iou', 'extract_thumbnail',
                                    'normalize', 'random_scene' ]

import collections
import logging
import math

import numpy

from .. import defaults
from ..data.formats import RadargramSample, SampleMeta
from ..nn.frontend import bilinear_resize

log				= logging.getLogger( __package__ )

EMPTY_BOX_TRIES			= 1000
WAVELET_HALF_PERIODS		= 1.5	# box margin around an echo, in periods of the wavelet
WAVELET_SUPPORT			= 2.5	# periods either side of an arrival rendered; beyond it |r| < 1e-26


class ApertureError( ValueError ):
    """The object does not lie within the imaged aperture."""


class BoxError( ValueError ):
    """A thumbnail box does not fit within the B-scan."""


RickerConfig			= collections.namedtuple( 'RickerConfig', (
    'center_frequency', 'sample_interval', 'num_samples' ))
RickerConfig.__new__.__defaults__ = ( defaults.sample_interval, defaults.trace_samples )


def ricker_config( cfg ):
    if not cfg.center_frequency > 0:
        raise ValueError( "Ricker frequency must be positive, not %r" % ( cfg.center_frequency, ))
    if not 1 / cfg.sample_interval > 4 * cfg.center_frequency:
        raise ValueError( "Sampling at %g Hz cannot represent a %g Hz Ricker wavelet" % (
            1 / cfg.sample_interval, cfg.center_frequency ))
    return cfg


def ricker( cfg, t ):
    """( 1 - 2 pi^2 f^2 t^2 ) exp( -pi^2 f^2 t^2 ): 1 at t = 0, minima -2 exp( -3/2 ) at +/- sqrt( 3/2 ) / ( pi f )."""
    arg				= ( math.pi * cfg.center_frequency * numpy.asarray( t, dtype=numpy.float64 )) ** 2
    return ( 1 - 2 * arg ) * numpy.exp( -arg )


def ricker_wavelet( cfg ):
    """( t, r ): the wavelet sampled over num_samples, centered on sample num_samples // 2."""
    cfg				= ricker_config( cfg )
    t				= ( numpy.arange( cfg.num_samples ) - cfg.num_samples // 2 ) * cfg.sample_interval
    return t, ricker( cfg, t )


def ricker_minimum( cfg ):
    """The times of the wavelet's two minima."""
    t				= math.sqrt( 1.5 ) / ( math.pi * cfg.center_frequency )
    return -t, t


SceneConfig			= collections.namedtuple( 'SceneConfig', (
    'object', 'soil', 'elevation_cm', 'frequency_mhz', 'depth', 'x0', 'layers',
    'clutter_density', 'clutter_amplitude', 'noise_sigma', 'seed',
    'sample_interval', 'trace_samples', 'trace_spacing', 'aperture', 'aspect_jitter' ))
SceneConfig.__new__.__defaults__ = (
    1.0, defaults.aperture / 2, (),
    defaults.clutter_density, defaults.clutter_amplitude, defaults.noise_sigma, 0,
    defaults.sample_interval, defaults.trace_samples, defaults.trace_spacing, defaults.aperture,
    defaults.aspect_jitter )


def soil_properties( soil ):
    try:
        velocity, attenuation	= defaults.soils[soil]
    except KeyError:
        raise ValueError( "Unknown soil %r; expected one of %s" % ( soil, ", ".join( defaults.soils )))
    assert 0 < velocity <= defaults.c, "Soil %s wave velocity %r is not physical" % ( soil, velocity )
    return velocity, attenuation


# A reflector at depth below ground, horizontal offset from x0, of half-width (0 for a point)
Reflector			= collections.namedtuple( 'Reflector', (
    'offset', 'depth', 'half_width', 'amplitude', 'frequency_scale' ))


def reflectors( scene ):
    """The class-specific reflectors of a scene's object; signed amplitudes (negative is reversed)."""
    d				= scene.depth
    if scene.object == 'metal':
        return [ Reflector( 0.0, d, 0.0, -1.0, 1.0 ) ]
    if scene.object == 'shelter':
        return [ Reflector( 0.0, d, 1.0, 0.8, 1.0 ),
                 Reflector( -1.0, d + 0.3, 0.0, -0.5, 1.0 ),
                 Reflector( 1.0, d + 0.3, 0.0, -0.5, 1.0 ),
                 Reflector( 0.0, d + 1.0, 1.0, 0.4, 1.0 ) ]
    if scene.object == 'nonmetal':
        return [ Reflector( 0.0, d, 0.15, -0.35, 1 / 1.5 ) ]
    if scene.object == 'empty':
        return []
    raise ValueError( "Unknown object class %r; expected one of %s" % ( scene.object, ", ".join( defaults.classes )))


def positions( scene ):
    count			= int( round( scene.aperture / scene.trace_spacing )) + 1
    return numpy.arange( count ) * scene.trace_spacing


def travel_time( scene, x, x0, depth, half_width=0.0 ):
    """Two-way travel time, and the in-soil distance r, from antenna position(s) x."""
    velocity, _			= soil_properties( scene.soil )
    lateral			= numpy.maximum( numpy.abs( numpy.asarray( x ) - x0 ) - half_width, 0 )
    r				= numpy.sqrt( depth ** 2 + lateral ** 2 )
    return 2 * ( scene.elevation_cm / 100 / defaults.c + r / velocity ), r


def render( bscan, scene, x, reflector_x, depth, half_width, amplitude, frequency ):
    """Adds one reflector's echoes (a Ricker at each column's travel time) into bscan in place."""
    _, attenuation		= soil_properties( scene.soil )
    arrival, r			= travel_time( scene, x, reflector_x, depth, half_width )
    gain			= amplitude * numpy.exp( -2 * attenuation * r ) * depth / r
    reach			= int( math.ceil( WAVELET_SUPPORT / ( frequency * scene.sample_interval )))
    rows			= numpy.round( arrival / scene.sample_interval ).astype( int )[None, :] \
                                  + numpy.arange( -reach, reach + 1 )[:, None]
    cols			= numpy.broadcast_to( numpy.arange( x.size )[None, :], rows.shape )
    valid			= ( rows >= 0 ) & ( rows < scene.trace_samples )
    rows, cols			= rows[valid], cols[valid]
    bscan[rows, cols]	       += gain[cols] * ricker( RickerConfig( frequency ),
                                                       rows * scene.sample_interval - arrival[cols] )


def synthesize_bscan( scene ):
    """The time x position B-scan of a scene; a pure function of the scene (including its seed)."""
    if not scene.depth > 0:
        raise ValueError( "Object depth must be positive, not %r" % ( scene.depth, ))
    if not 0 <= scene.x0 <= scene.aperture:
        raise ApertureError( "Object at x0 = %g m lies outside the %g m aperture" % ( scene.x0, scene.aperture ))
    frequency			= scene.frequency_mhz * 1e6
    ricker_config( RickerConfig( frequency, scene.sample_interval, scene.trace_samples ))
    velocity, _			= soil_properties( scene.soil )
    rng				= numpy.random.default_rng( scene.seed )
    x				= positions( scene )
    bscan			= numpy.zeros(( scene.trace_samples, x.size ))

    for ref in reflectors( scene ):
        render( bscan, scene, x, scene.x0 + ref.offset, ref.depth, ref.half_width, ref.amplitude,
                frequency * ref.frequency_scale )

    # Horizontal interfaces: the same echo in every trace
    t				= numpy.arange( scene.trace_samples ) * scene.sample_interval
    for depth, amplitude in scene.layers:
        arrival			= 2 * ( scene.elevation_cm / 100 / defaults.c + depth / velocity )
        bscan		       += amplitude * ricker( RickerConfig( frequency ), t - arrival )[:, None]

    # Point-scatterer clutter over the imaged section
    max_depth			= velocity * scene.trace_samples * scene.sample_interval / 2
    if scene.clutter_density > 0:
        count			= rng.poisson( scene.clutter_density * scene.aperture * max_depth )
        for cx, cz, ca in zip( rng.uniform( 0, scene.aperture, count ),
                               rng.uniform( 0.05, max_depth, count ),
                               rng.uniform( -scene.clutter_amplitude, scene.clutter_amplitude, count )):
            render( bscan, scene, x, cx, cz, 0.0, ca, frequency )
    if scene.noise_sigma > 0:
        bscan		       += rng.normal( 0, scene.noise_sigma, bscan.shape )
    log.trace( "B-scan %s at %g m (%s, %d cm, %d MHz): %d x %d", scene.object, scene.depth, scene.soil,
               scene.elevation_cm, scene.frequency_mhz, bscan.shape[0], bscan.shape[1] )
    return bscan


# Half-open pixel box: rows [row0,row1) of time, columns [col0,col1) of position
Box				= collections.namedtuple( 'Box', ( 'row0', 'row1', 'col0', 'col1' ))


def iou( a, b ):
    rows			= max( 0, min( a.row1, b.row1 ) - max( a.row0, b.row0 ))
    cols			= max( 0, min( a.col1, b.col1 ) - max( a.col0, b.col0 ))
    inter			= rows * cols
    union			= ( a.row1 - a.row0 ) * ( a.col1 - a.col0 ) + ( b.row1 - b.row0 ) * ( b.col1 - b.col0 ) - inter
    return inter / union if union else 0.0


def signature_box( scene, refs, jitter=( 0.0, 0.0 )):
    """The box around the echoes of refs, out to a half-span of min( 1.5 m, depth + half-width )
    either side of x0, padded by the wavelet; jitter scales height and width."""
    frequency			= scene.frequency_mhz * 1e6
    half_span			= min( 1.5, scene.depth + max( r.half_width for r in refs ))
    margin			= WAVELET_HALF_PERIODS / ( frequency * min( r.frequency_scale for r in refs ))
    span			= numpy.array([ scene.x0 - half_span, scene.x0, scene.x0 + half_span ])
    times			= numpy.concatenate([
        travel_time( scene, span, scene.x0 + r.offset, r.depth, r.half_width )[0] for r in refs ])
    top, bottom			= times.min() - margin, times.max() + margin
    height, width		= ( bottom - top ) * ( 1 + jitter[0] ), 2 * half_span * ( 1 + jitter[1] )
    centre_t			= ( top + bottom ) / 2
    box				= Box(
        int( math.floor(( centre_t - height / 2 ) / scene.sample_interval )),
        int( math.ceil(( centre_t + height / 2 ) / scene.sample_interval )),
        int( math.floor(( scene.x0 - width / 2 ) / scene.trace_spacing )),
        int( math.ceil(( scene.x0 + width / 2 ) / scene.trace_spacing )) + 1 )
    # Slide (not shrink) a box poking out of the time window back inside it
    shift			= max( 0, -box.row0 ) - max( 0, box.row1 - scene.trace_samples )
    return box._replace( row0=box.row0 + shift, row1=box.row1 + shift )


def check_box( box, shape ):
    if not ( 0 <= box.row0 < box.row1 <= shape[0] and 0 <= box.col0 < box.col1 <= shape[1] ):
        raise BoxError( "Box %r exceeds the %d x %d B-scan" % ( tuple( box ), shape[0], shape[1] ))
    return box


def reference_box( scene, jitter=( 0.0, 0.0 )):
    """The box a point object would occupy at the scene's depth and x0."""
    return signature_box( scene, [ Reflector( 0.0, scene.depth, 0.0, 1.0, 1.0 ) ], jitter )


def object_box( scene, jitter=( 0.0, 0.0 )):
    refs			= reflectors( scene )
    return signature_box( scene, refs, jitter ) if refs else reference_box( scene, jitter )


def empty_box( scene, shape, rng, reference=None ):
    """A box the size of the reference box, drawn uniformly at random (rejection sampling) so that it
    does not overlap the reference box."""
    reference			= reference or reference_box( scene )
    height, width		= reference.row1 - reference.row0, reference.col1 - reference.col0
    if height > shape[0] or width > shape[1]:
        raise BoxError( "A %d x %d box cannot fit the %d x %d B-scan" % ( height, width, shape[0], shape[1] ))
    for _ in range( EMPTY_BOX_TRIES ):
        row0			= int( rng.integers( 0, shape[0] - height + 1 ))
        col0			= int( rng.integers( 0, shape[1] - width + 1 ))
        box			= Box( row0, row0 + height, col0, col0 + width )
        if iou( box, reference ) == 0:
            return box
    raise BoxError( "No %d x %d box avoids %r after %d tries" % ( height, width, tuple( reference ), EMPTY_BOX_TRIES ))


def normalize( image ):
    """Min-max scale to [0,1]: exactly 0 at the minimum and 1 at the maximum; a constant image is 0."""
    image			= numpy.asarray( image, dtype=numpy.float64 )
    lo, hi			= image.min(), image.max()
    if hi == lo:
        return numpy.zeros_like( image )
    return ( image - lo ) / ( hi - lo )


def extract_thumbnail( bscan, scene, rng=None, box=None, label=None, file='',
                       height=defaults.input_h, width=defaults.input_w ):
    """Crop the scene's box (or the given one), resize to height x width and normalize to [0,1].  The
    object's box size is jittered by +/- aspect_jitter; the empty class draws a non-overlapping box."""
    rng				= rng if rng is not None else numpy.random.default_rng( scene.seed )
    if box is None:
        jitter			= tuple( rng.uniform( -scene.aspect_jitter, scene.aspect_jitter, 2 )) \
                                  if scene.aspect_jitter else ( 0.0, 0.0 )
        box			= object_box( scene, jitter )
        if scene.object == 'empty':
            box			= empty_box( scene, bscan.shape, rng, check_box( box, bscan.shape ))
    check_box( box, bscan.shape )
    crop			= bscan[box.row0:box.row1, box.col0:box.col1]
    image			= normalize( bilinear_resize( crop, height, width )).astype( numpy.float32 )
    if label is None:
        label			= defaults.classes.index( scene.object )
    return RadargramSample( image, label, SampleMeta(
        file, scene.object, scene.soil, scene.elevation_cm, scene.frequency_mhz ))


def random_scene( rng, object, soil, elevation_cm, frequency_mhz, **overrides ):
    """A scene with seeded depth, x0 (keeping the largest jittered box inside the aperture), up to
    layer_count interfaces, and its own seed for clutter and noise."""
    base			= SceneConfig( object, soil, elevation_cm, frequency_mhz, **overrides )
    low, high			= defaults.depth_range
    depth			= float( rng.uniform( low, high ))
    margin			= 1.5 * ( 1 + base.aspect_jitter ) + base.trace_spacing
    x0				= float( rng.uniform( margin, base.aperture - margin ))
    velocity, _			= soil_properties( soil )
    max_depth			= velocity * base.trace_samples * base.sample_interval / 2
    layers			= tuple(
        ( float( rng.uniform( 0.1, max_depth )), float( rng.uniform( 0.05, 0.2 ) * rng.choice([ -1, 1 ])))
        for _ in range( int( rng.integers( 0, defaults.layer_count + 1 ))))
    return base._replace( depth=depth, x0=x0, layers=layers, seed=int( rng.integers( 2 ** 62 )))
