from __future__ import absolute_import, print_function, division

import os
import struct

import numpy
import pytest

from .. import defaults
from ..data.formats import FormatError, BadMagicError, TruncatedError
from .model import build_model, miniature
from .checkpoint import *


@pytest.mark.parametrize( "variant", defaults.variants )
def test_checkpoint_round_trip( tmp_path, variant ):
    model = build_model( miniature( variant ), seed=21 )
    rng = numpy.random.default_rng( 3 )
    images = rng.random(( 2, 1, 16, 12 ))
    # Move the BN running statistics off their initial values
    model.forward( images, train=True, rng=rng )
    path = str( tmp_path / 'model.ckpt' )
    save_checkpoint( path, model, meta={ 'epoch': 3 } )

    loaded, header = load_checkpoint( path )
    assert header['variant'] == variant and header['seed'] == 21 and header['meta'] == { 'epoch': 3 }
    assert header['classes'] == list( defaults.classes )
    assert type( loaded ) is type( model ) and loaded.cfg == model.cfg
    for name, values in model.state().items():
        assert loaded.state()[name].tobytes() == values.tobytes(), name
    assert loaded.infer( images ).logits.tobytes() == model.infer( images ).logits.tobytes()

    # Saving is deterministic
    with open( path, 'rb' ) as f:
        assert f.read() == checkpoint_bytes( loaded, meta={ 'epoch': 3 } )


def test_checkpoint_layout():
    model = build_model( miniature( 'RCNET' ), seed=1 )
    buf = checkpoint_bytes( model )
    magic, version, length = struct.unpack_from( '<4sII', buf )
    assert magic == b'SPDM' and version == 1
    header, records = decode_checkpoint( buf )
    assert list( records ) == list( model.state() )
    assert records['bimap1'].shape == ( 6, 8 ) and records['bimap1'].dtype == numpy.float32
    assert header['config']['spd_dims'] == [ 8, 6, 4 ]
    # The first record follows the JSON immediately
    offset = 12 + length
    size, = struct.unpack_from( '<I', buf, offset )
    assert buf[offset + 4:offset + 4 + size] == list( model.state() )[0].encode( 'utf-8' )


def test_checkpoint_errors( tmp_path ):
    buf = checkpoint_bytes( build_model( miniature( 'SCNN' ), seed=1 ))
    with pytest.raises( BadMagicError ):
        decode_checkpoint( b'SPDX' + buf[4:] )
    with pytest.raises( TruncatedError ):
        decode_checkpoint( buf[:8] )
    with pytest.raises( TruncatedError ):
        decode_checkpoint( buf[:-2 ] )
    with pytest.raises( FormatError ):
        decode_checkpoint( buf[:4] + struct.pack( '<I', 2 ) + buf[8:] )

    # A checkpoint whose records do not fit its configuration
    header, records = decode_checkpoint( buf )
    _, length = struct.unpack_from( '<II', buf, 4 )
    path = str( tmp_path / 'short.ckpt' )
    with open( path, 'wb' ) as f:
        f.write( buf[:12 + length] )
    try:
        load_checkpoint( path )
        assert False, "Should have rejected a checkpoint without records"
    except FormatError as exc:
        assert exc.path == path
    assert os.path.getsize( path ) == 12 + length
