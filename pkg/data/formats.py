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
spdgpr.data.formats -- On-disk formats of a thumbnail dataset

A dataset directory holds a manifest.json and one file per thumbnail:

    "GPRT"		4 bytes magic
    height		u32 LE
    width		u32 LE
    pixels		height x width float32 LE, row-major, in [0,1]

The manifest is UTF-8 JSON (sorted keys): { "format_version", "seed", "samples": [ { "file",
"label", "class_name", "soil", "elevation_cm", "frequency_mhz" }, ... ] }.
"""

__all__				= [ 'FormatError', 'BadMagicError', 'TruncatedError', 'LabelError',
                                    'RadargramSample', 'SampleMeta', 'THUMBNAIL_MAGIC', 'MANIFEST',
                                    'encode_thumbnail', 'decode_thumbnail', 'write_thumbnail', 'read_thumbnail',
                                    'sample_filename', 'write_manifest', 'read_manifest', 'write_json' ]

import collections
import json
import logging
import os
import struct

import numpy

from .. import defaults

log				= logging.getLogger( __package__ )

THUMBNAIL_MAGIC			= b'GPRT'
THUMBNAIL_HEADER		= struct.Struct( '<4sII' )
MANIFEST			= 'manifest.json'
FORMAT_VERSION			= 1


class FormatError( ValueError ):
    """A dataset or checkpoint file is malformed; .path identifies it."""
    def __init__( self, message, path=None ):
        super( FormatError, self ).__init__( "%s: %s" % ( path, message ) if path else message )
        self.path		= path


class BadMagicError( FormatError ):
    """The file does not begin with the expected magic bytes."""


class TruncatedError( FormatError ):
    """The file ends before its header says it should."""


class LabelError( FormatError ):
    """A sample's label is out of range, or disagrees with its class name."""


SampleMeta			= collections.namedtuple( 'SampleMeta', (
    'file', 'class_name', 'soil', 'elevation_cm', 'frequency_mhz' ))

# One grayscale thumbnail (float32, in [0,1]), its class index, and its acquisition metadata
RadargramSample			= collections.namedtuple( 'RadargramSample', ( 'image', 'label', 'meta' ))


def encode_thumbnail( image ):
    image			= numpy.asarray( image )
    if image.ndim != 2:
        raise ValueError( "A thumbnail is a 2-D image, not %r" % ( image.shape, ))
    height, width		= image.shape
    return THUMBNAIL_HEADER.pack( THUMBNAIL_MAGIC, height, width ) \
        + numpy.ascontiguousarray( image, dtype='<f4' ).tobytes()


def decode_thumbnail( buf, path=None ):
    """The float32 image in buf; rejects bad magic, short or overlong payloads and values outside [0,1]."""
    if len( buf ) < THUMBNAIL_HEADER.size:
        raise TruncatedError( "header needs %d bytes, found %d" % ( THUMBNAIL_HEADER.size, len( buf )), path )
    magic, height, width	= THUMBNAIL_HEADER.unpack_from( buf )
    if magic != THUMBNAIL_MAGIC:
        raise BadMagicError( "magic %r is not %r" % ( magic, THUMBNAIL_MAGIC ), path )
    expected			= THUMBNAIL_HEADER.size + 4 * height * width
    if len( buf ) < expected:
        raise TruncatedError( "%d x %d thumbnail needs %d bytes, found %d" % (
            height, width, expected, len( buf )), path )
    if len( buf ) > expected:
        raise FormatError( "%d trailing bytes after %d x %d thumbnail" % (
            len( buf ) - expected, height, width ), path )
    image			= numpy.frombuffer( buf, dtype='<f4', count=height * width,
                                            offset=THUMBNAIL_HEADER.size ).reshape( height, width )
    if image.size and not ( numpy.isfinite( image ).all() and image.min() >= 0 and image.max() <= 1 ):
        raise FormatError( "pixel values outside [0,1]", path )
    return image.astype( numpy.float32 )


def write_thumbnail( path, image ):
    with open( path, 'wb' ) as f:
        f.write( encode_thumbnail( image ))


def read_thumbnail( path ):
    with open( path, 'rb' ) as f:
        return decode_thumbnail( f.read(), path )


def sample_filename( index ):
    return "%05d.gprt" % index


def write_json( path, obj ):
    """UTF-8 JSON with sorted keys and LF line endings, so equal objects produce identical files."""
    with open( path, 'w', encoding='utf-8', newline='\n' ) as f:
        json.dump( obj, f, sort_keys=True, indent=1, ensure_ascii=False )
        f.write( '\n' )


def manifest_entry( sample ):
    meta			= sample.meta
    return {
        'file':			meta.file,
        'label':		int( sample.label ),
        'class_name':		meta.class_name,
        'soil':			meta.soil,
        'elevation_cm':		meta.elevation_cm,
        'frequency_mhz':	meta.frequency_mhz,
    }


def write_manifest( directory, samples, seed ):
    write_json( os.path.join( directory, MANIFEST ), {
        'format_version':	FORMAT_VERSION,
        'seed':			seed,
        'samples':		[ manifest_entry( s ) for s in samples ],
    })


def read_manifest( directory, classes=defaults.classes ):
    """The manifest's seed, and a SampleMeta and validated label per sample, in manifest order."""
    path			= os.path.join( directory, MANIFEST )
    with open( path, 'r', encoding='utf-8' ) as f:
        try:
            manifest		= json.load( f )
        except ValueError as exc:
            raise FormatError( "invalid JSON: %s" % exc, path )
    if not isinstance( manifest, dict ) or manifest.get( 'format_version' ) != FORMAT_VERSION:
        raise FormatError( "unsupported manifest format %r" % (
            manifest.get( 'format_version' ) if isinstance( manifest, dict ) else manifest, ), path )
    entries			= []
    for num, entry in enumerate( manifest.get( 'samples', [] )):
        try:
            meta		= SampleMeta( **{ field: entry[field] for field in SampleMeta._fields })
            label		= entry['label']
        except ( KeyError, TypeError ) as exc:
            raise FormatError( "sample %d is incomplete: %s" % ( num, exc ), path )
        sample_path		= os.path.join( directory, meta.file )
        if not isinstance( label, int ) or not 0 <= label < len( classes ):
            raise LabelError( "label %r is not a class index 0..%d" % ( label, len( classes ) - 1 ), sample_path )
        if classes[label] != meta.class_name:
            raise LabelError( "label %d is %r, not %r" % ( label, classes[label], meta.class_name ), sample_path )
        entries.append(( meta, label ))
    return manifest.get( 'seed' ), entries
