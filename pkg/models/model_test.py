from __future__ import absolute_import, print_function, division

import json
import math

import numpy
import pytest

from .. import defaults
from ..misc import relative_error
from ..linalg import DimensionError
from ..optim import StiefelSGD, OptimizerConfig, StiefelParam
from ..spd import vectorized_length
from .model import *


def images_labels( cfg, n=2, seed=70 ):
    rng = numpy.random.default_rng( seed )
    return rng.random(( n, 1, cfg.frontend.input_h, cfg.frontend.input_w )), rng.integers( cfg.num_classes, size=n )


def test_model_config():
    assert model_config({ 'variant': 'RCNET' }).spd_dims == ( 64, 58, 54, 44, 32 )
    assert model_config({ 'variant': 'SRCNET' }).spd_dims == ( 256, 235, 217, 179, 128 )
    assert model_config({ 'variant': 'SCNN' }).spd_dims is None
    cfg = miniature( 'SRCNET' )
    assert model_config( json.loads( json.dumps( model_config_plain( cfg )))) == cfg

    for bad in ( { 'variant': 'RFT' },
                 { 'variant': 'RCNET', 'num_classes': 1 },
                 { 'variant': 'RCNET', 'spd_dims': [ 64, 64, 32 ] },
                 { 'variant': 'RCNET', 'spd_dims': [ 32, 16 ] },		# d0 must be the channel count
                 { 'variant': 'SRCNET', 'spd_dims': [ 128, 64 ] },		# d0 must be keep x layers
                 { 'variant': 'RCNET', 'dropout_rate': 1.0 },
                 { 'variant': 'RCNET', 'learning_rate': 0.1 } ):
        with pytest.raises( ValueError ):
            model_config( bad )


def test_cross_entropy():
    loss, dlogits = cross_entropy( numpy.zeros(( 1, 4 )), [ 2 ] )
    assert abs( loss - math.log( 4 )) < 1e-12
    assert numpy.allclose( dlogits, [[ 0.25, 0.25, -0.75, 0.25 ]] )
    loss, _ = cross_entropy( numpy.array([[ 0.0, 0.0, 800.0, 0.0 ]]), [ 2 ] )
    assert 0 <= loss < 1e-300

    rng = numpy.random.default_rng( 71 )
    logits = rng.standard_normal(( 3, 4 ))
    labels = numpy.array([ 0, 3, 1 ])
    _, analytic = cross_entropy( logits, labels )
    numeric = numpy.zeros_like( logits )
    for idx in numpy.ndindex( *logits.shape ):
        step = numpy.zeros_like( logits )
        step[idx] = 1e-6
        numeric[idx] = ( cross_entropy( logits + step, labels )[0] - cross_entropy( logits - step, labels )[0] ) / 2e-6
    assert relative_error( analytic, numeric ) < 1e-7

    for bad in ( [ 4 ], [ -1 ], [ 0.5 ], [ 0, 1 ] ):
        with pytest.raises( ValueError ):
            cross_entropy( numpy.zeros(( 1, 4 )), bad )


@pytest.mark.parametrize( "variant", defaults.variants )
def test_probabilities( variant ):
    cfg = miniature( variant )
    model = build_model( cfg, seed=3, precision='float64' )
    images, _ = images_labels( cfg, n=3 )
    pred = model.infer( images )
    assert pred.logits.shape == ( 3, 4 )
    assert numpy.allclose( pred.probabilities.sum( axis=1 ), 1, atol=1e-6 )
    assert ( pred.probabilities >= 0 ).all() and ( pred.probabilities <= 1 ).all()
    assert model.predict( images ).shape == ( 3, )

    # A zero FC head classifies uniformly
    model.params['fc.w'].values[...] = 0
    model.params['fc.b'].values[...] = 0
    assert numpy.allclose( model.infer( images ).probabilities, 0.25 )

    with pytest.raises( DimensionError ):
        model.infer( numpy.zeros(( 1, 1, 15, 12 )))
    with pytest.raises( ValueError ):
        model.forward( images, train=True )		# dropout needs an rng
    with pytest.raises( RuntimeError ):
        build_model( cfg ).backward( numpy.zeros(( 3, 4 )))


def test_full_size_shapes():
    """The full-size SPD chains, traversed by an actual forward pass."""
    for variant, dims in ( ( 'RCNET', [ 64, 58, 54, 44, 32 ] ), ( 'SRCNET', [ 256, 235, 217, 179, 128 ] )):
        model = build_model({ 'variant': variant }, seed=1, precision='float64' )
        assert model.shape_chain() == dims
        assert model.params['fc.w'].shape == ( 4, vectorized_length( dims[-1] ))
        assert all( isinstance( model.params[name], StiefelParam ) for name in model.bimaps() )
        image = numpy.random.default_rng( 72 ).random(( 1, 1, 112, 60 ))
        first = model.forward( image )
        assert SpdModel.head_dims( model._cache[2] ) == dims
        # Evaluation is deterministic, and keeps no cache
        second = model.infer( image )
        assert first.logits.tobytes() == second.logits.tobytes()
    assert vectorized_length( 32 ) == 528 and vectorized_length( 128 ) == 8256
    assert build_model({ 'variant': 'SRCNET' }).shape_chain()[0] == 8 * 32


def sampled_gradcheck( model, images, labels, per_tensor=12, seed=73, h=1e-6 ):
    """Worst relative error between analytic and central-difference gradients, over up to per_tensor
    seeded entries of every parameter; training mode, with a fixed dropout mask."""
    rng = numpy.random.default_rng( seed )
    loss, grads, _ = model.loss_and_grads( images, labels, rng=numpy.random.default_rng( 5 ))

    def f():
        return cross_entropy( model.infer( images, train=True, rng=numpy.random.default_rng( 5 )), labels )[0]

    worst = {}
    for name, param in model.params.items():
        x = param.values
        flat = rng.choice( x.size, size=min( per_tensor, x.size ), replace=False )
        analytic, numeric = [], []
        for k in flat:
            idx = numpy.unravel_index( k, x.shape )
            saved = x[idx]
            x[idx] = saved + h
            plus = f()
            x[idx] = saved - h
            minus = f()
            x[idx] = saved
            analytic.append( grads[name][idx] )
            numeric.append(( plus - minus ) / ( 2 * h ))
        analytic, numeric = numpy.array( analytic ), numpy.array( numeric )
        # Biases ahead of a batch-norm have (numerically) zero gradient
        worst[name] = 0.0 if numpy.abs( analytic - numeric ).max() < 1e-9 else relative_error( analytic, numeric )
    return worst


@pytest.mark.parametrize( "variant", defaults.variants )
def test_gradients( variant ):
    cfg = miniature( variant )
    model = build_model( cfg, seed=4, precision='float64' )
    images, labels = images_labels( cfg )
    worst = sampled_gradcheck( model, images, labels )
    assert set( worst ) == set( model.params )
    bad = { name: err for name, err in worst.items() if err >= 1e-4 }
    assert not bad, "%s gradients differ: %r" % ( variant, bad )


def test_rcnet_full_bimap_gradients():
    """Every entry of every BiMap weight of the miniature RCNet."""
    cfg = miniature( 'RCNET' )
    model = build_model( cfg, seed=6, precision='float64' )
    images, labels = images_labels( cfg, n=1 )
    worst = sampled_gradcheck( model, images, labels, per_tensor=10000 )
    assert max( worst[name] for name in model.bimaps() ) < 1e-4


@pytest.mark.parametrize( "variant", defaults.variants )
def test_zero_upstream( variant ):
    cfg = miniature( variant )
    model = build_model( cfg, seed=8, precision='float64' )
    images, _ = images_labels( cfg )
    pred = model.forward( images )
    grads = model.backward( numpy.zeros_like( pred.logits ))
    assert list( grads ) == list( model.params )
    assert all( not g.any() for g in grads.values() )


@pytest.mark.parametrize( "variant", defaults.variants )
def test_sgd_step_decreases_loss( variant ):
    cfg = miniature( variant )
    model = build_model( cfg, seed=9, precision='float64' )
    images, labels = images_labels( cfg, n=1 )
    before, grads, _ = model.loss_and_grads( images, labels, train=False )
    StiefelSGD( model.params, OptimizerConfig( learning_rate=1e-4, momentum=0.0 )).step( grads )
    after, _, _ = model.loss_and_grads( images, labels, train=False )
    assert after < before
    for name in getattr( model, 'bimaps', list )():
        assert model.params[name].drift() < 1e-12


def test_layer_failure():
    cfg = miniature( 'RCNET' )
    model = build_model( cfg, seed=10, precision='float64' )
    images, _ = images_labels( cfg, n=1 )
    images[...] = numpy.nan
    try:
        model.infer( images )
        assert False, "Should have failed on NaN input"
    except LayerFailure as exc:
        assert exc.layer == 'covpool' or exc.layer.startswith(( 'frontend', 'bimap', 'reeig' ))
    with pytest.raises( LayerFailure ):
        with layer_guard( 'logeig' ):
            raise ArithmeticError( "test" )


def test_seeded_construction():
    a = build_model( miniature( 'SRCNET' ), seed=11 )
    b = build_model( miniature( 'SRCNET' ), seed=11 )
    c = build_model( miniature( 'SRCNET' ), seed=12 )
    assert a.precision == 'float32' and a.params['bimap1'].values.dtype == numpy.float32
    assert all( a.state()[k].tobytes() == b.state()[k].tobytes() for k in a.state() )
    assert a.state()['fc.w'].tobytes() != c.state()['fc.w'].tobytes()
