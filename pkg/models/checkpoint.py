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
spdgpr.models.checkpoint -- Model checkpoint files

    "SPDM" | u32 version | u32 n | n bytes of JSON { variant, config, precision, seed, classes, meta }
    then, until end of file, one record per parameter and buffer:
	u32 name length | name (UTF-8) | u32 rank | u32 dims[rank] | float32 payload (row-major)

All integers and floats are little-endian.  The JSON is canonical, so a model saves to identical
bytes every time.  Loading rebuilds the model from its header, then replaces every parameter and
buffer; BiMap weights are restored exactly as stored.
"""

__all__				= [ 'CHECKPOINT_MAGIC', 'CHECKPOINT_VERSION', 'checkpoint_bytes', 'decode_checkpoint',
                                    'save_checkpoint', 'load_checkpoint' ]

import collections
import json
import logging
import struct

import numpy

from .. import defaults, misc
from ..data.formats import FormatError, BadMagicError, TruncatedError
from .model import build_model, model_config_plain

log				= logging.getLogger( __package__ )

CHECKPOINT_MAGIC		= b'SPDM'
CHECKPOINT_VERSION		= 1
CHECKPOINT_HEADER		= struct.Struct( '<4sII' )
U32				= struct.Struct( '<I' )


def checkpoint_bytes( model, classes=defaults.classes, meta=None ):
    header			= misc.canonical_json({
        'variant':		model.variant,
        'config':		model_config_plain( model.cfg ),
        'precision':		model.precision,
        'seed':			model.seed,
        'classes':		list( classes ),
        'meta':			meta or {},
    }).encode( 'ascii' )
    parts			= [ CHECKPOINT_HEADER.pack( CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len( header )), header ]
    for name, values in model.state().items():
        encoded			= name.encode( 'utf-8' )
        values			= numpy.asarray( values )
        parts.append( U32.pack( len( encoded )) + encoded )
        parts.append( struct.pack( '<I%dI' % values.ndim, values.ndim, *values.shape ))
        parts.append( numpy.ascontiguousarray( values, dtype='<f4' ).tobytes() )
    return b''.join( parts )


def decode_checkpoint( buf, path=None ):
    """The JSON header, and the name -> float32 array records of a checkpoint's bytes."""
    if len( buf ) < CHECKPOINT_HEADER.size:
        raise TruncatedError( "checkpoint header needs %d bytes, found %d" % ( CHECKPOINT_HEADER.size, len( buf )), path )
    magic, version, length	= CHECKPOINT_HEADER.unpack_from( buf )
    if magic != CHECKPOINT_MAGIC:
        raise BadMagicError( "magic %r is not %r" % ( magic, CHECKPOINT_MAGIC ), path )
    if version != CHECKPOINT_VERSION:
        raise FormatError( "unsupported checkpoint version %d" % version, path )
    offset			= CHECKPOINT_HEADER.size + length
    if len( buf ) < offset:
        raise TruncatedError( "checkpoint configuration truncated", path )
    try:
        header			= json.loads( buf[CHECKPOINT_HEADER.size:offset].decode( 'utf-8' ))
    except ValueError as exc:
        raise FormatError( "invalid checkpoint configuration: %s" % exc, path )
    missing			= [ k for k in ( 'variant', 'config', 'precision', 'seed', 'classes' ) if k not in header ]
    if missing:
        raise FormatError( "checkpoint configuration lacks %s" % ", ".join( missing ), path )

    def take( count, what ):
        nonlocal offset
        if offset + count > len( buf ):
            raise TruncatedError( "%s needs %d bytes at offset %d, found %d" % (
                what, count, offset, len( buf ) - offset ), path )
        chunk			= buf[offset:offset + count]
        offset		       += count
        return chunk

    records			= collections.OrderedDict()
    while offset < len( buf ):
        size,			= U32.unpack( take( U32.size, "record name length" ))
        name			= take( size, "record name" ).decode( 'utf-8' )
        if name in records:
            raise FormatError( "duplicate record %s" % name, path )
        rank,			= U32.unpack( take( U32.size, "rank of %s" % name ))
        shape			= struct.unpack( '<%dI' % rank, take( 4 * rank, "dimensions of %s" % name ))
        count			= int( numpy.prod( shape, dtype=numpy.int64 ))
        records[name]		= numpy.frombuffer( take( 4 * count, "payload of %s" % name ),
                                            dtype='<f4' ).reshape( shape ).astype( numpy.float32 )
    return header, records


def save_checkpoint( path, model, classes=defaults.classes, meta=None ):
    buf				= checkpoint_bytes( model, classes=classes, meta=meta )
    with open( path, 'wb' ) as f:
        f.write( buf )
    log.detail( "Saved %r checkpoint to %s (%d bytes)", model, path, len( buf ))
    return path


def load_checkpoint( path ):
    """( model, header ) of a checkpoint file."""
    with open( path, 'rb' ) as f:
        header, records		= decode_checkpoint( f.read(), path )
    try:
        model			= build_model( header['config'], seed=header['seed'], precision=header['precision'] )
        model.load_state( records )
    except ( KeyError, ValueError, TypeError ) as exc:
        raise FormatError( "checkpoint does not describe a valid model: %s" % exc, path )
    log.detail( "Loaded %r checkpoint from %s", model, path )
    return model, header
