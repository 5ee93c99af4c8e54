from __future__ import absolute_import, print_function, division

import numpy
import pytest

from ..misc import relative_error
from ..linalg import DimensionError
from .frontend import *
from .layers_test import numeric_grad


MINI				= ConvStackConfig( num_layers=2, channels=4, srcnet_keep=2, input_h=8, input_w=6 )


def test_conv_plan():
    plan = conv_plan( ConvStackConfig() )
    assert [ ( p.h, p.w ) for p in plan ] == [ ( 56, 30 ) ] * 3 + [ ( 28, 15 ) ] * 5
    # Within 2 pixels of the 54 x 30 / 28 x 15 layout
    assert abs( plan[0].h - 54 ) <= 2 and plan[0].w == 30
    assert [ p.stride for p in plan ] == [ 2, 1, 1, 2, 1, 1, 1, 1 ]
    assert srcnet_size(( p.h, p.w ) for p in plan ) == ( 38, 21 )
    assert [ ( p.h, p.w ) for p in conv_plan( MINI ) ] == [ ( 4, 3 ), ( 4, 3 ) ]

    with pytest.raises( ValueError ):
        conv_stack_config({ 'num_layers': 0 })
    with pytest.raises( ValueError ):
        conv_stack_config({ 'srcnet_keep': 65 })


def test_conv_stack_zero_image():
    rng = numpy.random.default_rng( 50 )
    params, buffers = conv_stack_init( ConvStackConfig(), rng )
    params['stem.bn.beta'] = rng.standard_normal( 64 )
    maps, _ = conv_stack_forward( numpy.zeros(( 1, 1, 112, 60 )), None, params, buffers )
    assert len( maps ) == 8
    assert maps[0].shape == ( 1, 64, 56, 30 ) and maps[-1].shape == ( 1, 64, 28, 15 )
    # The stem is the batch-norm shift pattern through ReLU
    assert numpy.allclose( maps[0][0], numpy.maximum( params['stem.bn.beta'], 0 )[:, None, None] )
    for m in maps:
        assert ( m >= 0 ).all()

    with pytest.raises( DimensionError ):
        conv_stack_forward( numpy.zeros(( 1, 1, 60, 112 )), None, params, buffers )


def test_conv_stack_deterministic():
    rng = numpy.random.default_rng( 51 )
    params, buffers = conv_stack_init( MINI, rng )
    images = rng.random(( 2, 1, 8, 6 ))
    a, _ = conv_stack_forward( images, MINI, params, buffers )
    b, _ = conv_stack_forward( images, MINI, params, buffers )
    assert all( x.tobytes() == y.tobytes() for x, y in zip( a, b ))

    # Training updates the running statistics
    before = buffers['stem.bn.mean'].copy()
    conv_stack_forward( images, MINI, params, buffers, train=True )
    assert not numpy.array_equal( before, buffers['stem.bn.mean'] )


@pytest.mark.parametrize( "cfg", [
    MINI,
    ConvStackConfig( num_layers=3, channels=3, srcnet_keep=2, input_h=8, input_w=6, transition_layer=2 ),
])
def test_conv_stack_gradients( cfg ):
    """Every parameter, gradients arriving at every layer (as SRCNet sends them)."""
    rng = numpy.random.default_rng( 52 )
    params, buffers = conv_stack_init( cfg, rng )
    for name in params:
        if name.endswith( '.beta' ):
            params[name] = 0.1 * rng.standard_normal( params[name].shape )
    images = rng.random(( 2, 1, cfg.input_h, cfg.input_w ))
    maps, cache = conv_stack_forward( images, cfg, params, buffers, train=True )
    weights = [ rng.standard_normal( m.shape ) for m in maps ]

    def loss():
        maps, _ = conv_stack_forward( images, cfg, params, buffers, train=True )
        return float( sum( numpy.sum( m * r ) for m, r in zip( maps, weights )))

    dimages, grads = conv_stack_backward( weights, cache )
    assert set( grads ) == set( params )
    for name in params:
        assert relative_error( grads[name], numeric_grad( loss, params[name] )) < 1e-4, name
    assert relative_error( dimages, numeric_grad( loss, images )) < 1e-4

    # Only the last layer used (RCNet)
    dimages, grads = conv_stack_backward( [ None ] * ( len( maps ) - 1 ) + weights[-1:], cache )
    assert set( grads ) == set( params )


def test_resize():
    rng = numpy.random.default_rng( 53 )
    x = rng.standard_normal(( 5, 7 ))
    assert numpy.array_equal( bilinear_resize( x, 5, 7 ), x )
    assert numpy.allclose( bilinear_resize( numpy.full(( 2, 2 ), 3.5 ), 9, 4 ), 3.5 )

    ramp = numpy.arange( 16, dtype=numpy.float64 ).reshape( 4, 4 )
    assert numpy.allclose( bilinear_resize( ramp, 2, 2 ), [[ 0, 3 ], [ 12, 15 ]] )
    # A ramp stays a ramp
    assert numpy.allclose( bilinear_resize( ramp, 7, 4 )[:, 0], numpy.linspace( 0, 12, 7 ))
    assert numpy.allclose( resize_matrix( 1, 3 ), 1 )
    assert numpy.allclose( resize_matrix( 5, 3 ).sum( axis=1 ), 1 )

    # The backward is the adjoint: <R x, g> == <x, Rt g>
    g = rng.standard_normal(( 3, 2, 4, 6 ))
    x = rng.standard_normal(( 3, 2, 9, 5 ))
    assert numpy.isclose( numpy.sum( bilinear_resize( x, 4, 6 ) * g ),
                          numpy.sum( x * bilinear_resize_backward( g, 9, 5 )))
    with pytest.raises( DimensionError ):
        bilinear_resize( x, 0, 3 )


def test_assemble_rcnet():
    maps = [ numpy.zeros(( 1, 64, 56, 30 )), numpy.arange( 64 * 28 * 15, dtype=numpy.float64 ).reshape( 1, 64, 28, 15 ) ]
    t, cache = assemble_rcnet( maps )
    assert t.shape == ( 1, 64, 420 )
    c, y, x = 5, 17, 9
    assert t[0, c, y * 15 + x] == maps[-1][0, c, y, x]
    dmaps = assemble_rcnet_backward( t, cache )
    assert dmaps[0] is None and numpy.array_equal( dmaps[1], maps[1] )

    t, _ = assemble_rcnet([ numpy.ones(( 1, 64, 1, 1 )) ])
    assert t.shape == ( 1, 64, 1 )


def test_assemble_srcnet():
    rng = numpy.random.default_rng( 54 )
    maps = [ rng.random(( 1, 64, 56, 30 )) ] * 3 + [ rng.random(( 1, 64, 28, 15 )) ] * 5
    t, _ = assemble_srcnet( maps, 32 )
    assert t.shape == ( 1, 256, 38 * 21 )

    # One layer: no interpolation
    t, _ = assemble_srcnet( maps[:1], 32 )
    assert t.shape == ( 1, 32, 56 * 30 )
    assert numpy.array_equal( t[0, 3].reshape( 56, 30 ), maps[0][0, 3] )

    with pytest.raises( DimensionError ):
        assemble_srcnet( maps, 65 )

    # Gradient through the assembly, on a small stack
    small = [ rng.random(( 2, 4, 5, 4 )), rng.random(( 2, 4, 3, 2 )) ]
    t, cache = assemble_srcnet( small, 2 )
    assert t.shape == ( 2, 4, 4 * 3 )
    r = rng.standard_normal( t.shape )
    dmaps = assemble_srcnet_backward( r, cache )
    for m, dm in zip( small, dmaps ):
        loss = lambda: float( numpy.sum( assemble_srcnet( small, 2 )[0] * r ))
        assert relative_error( dm, numeric_grad( loss, m )) < 1e-7
        assert not dm[:, 2:].any()
