from __future__ import absolute_import, print_function, division

import numpy
import pytest

from ..spd import layers as spd_layers
from ..nn import frontend
from ..linalg import checked
from .gradcheck import *
from .gradcheck import selected


def test_numeric_grad():
    x = numpy.array([[ 1.0, 2.0 ], [ 3.0, 4.0 ]])
    g = numeric_grad( lambda: float(( x ** 2 ).sum() ), x, 1e-6 )
    assert numpy.allclose( g, 2 * x, atol=1e-6 )
    assert x.tolist() == [[ 1.0, 2.0 ], [ 3.0, 4.0 ]]		# restored
    s = numpy.array([[ 2.0, 1.0 ], [ 1.0, 3.0 ]])
    # d/dS of <A, S> along symmetric perturbations is sym( A )
    a = numpy.array([[ 1.0, 4.0 ], [ 0.0, 2.0 ]])
    assert numpy.allclose( numeric_sym_grad( lambda v: float(( a * v ).sum() ), s, 1e-6 ), ( a + a.T ) / 2 )


def test_selected():
    assert selected( None ) == SUITES
    assert selected( 'model' ) == [ 'scnn', 'rcnet', 'srcnet', 'resnet' ]
    assert selected( 'layer' )[:4] == [ 'covpool', 'bimap', 'reeig', 'logeig' ]
    assert selected( 'BiMap, fc' ) == [ 'bimap', 'fc' ]
    assert selected( 'stem,block' ) == [ 'stem', 'block' ]
    with pytest.raises( ValueError ):
        selected( 'bimap,softmax' )


def test_layer_suites():
    results = gradcheck( 'layer', trials=3, tol=1e-5 )
    assert [ r.suite for r in results ] == list( LAYER_SUITES )
    failed = [ r for r in results if not r.passed ]
    assert not failed, report( failed )
    assert not checked()


def test_model_suites():
    results = gradcheck( 'model', trials=8, tol=1e-5 )
    assert all( r.tolerance == 1e-4 for r in results )
    failed = [ r for r in results if not r.passed ]
    assert not failed, report( failed )


def test_detects_bimap_sign_error( monkeypatch ):
    real = spd_layers.bimap_backward

    def flipped( x, w, grad_out ):
        grad = real( x, w, grad_out )
        return grad._replace( wrt_params=-grad.wrt_params )
    monkeypatch.setattr( spd_layers, 'bimap_backward', flipped )
    results = { r.suite: r for r in gradcheck( 'bimap,rcnet,logeig', trials=2 ) }
    assert not results['bimap'].passed and results['bimap'].worst > 1
    assert not results['rcnet'].passed
    assert results['logeig'].passed
    assert "FAIL" in report( results.values() )


def test_frontend_suites( monkeypatch ):
    results = gradcheck( 'stem,block', trials=3 )
    assert [ r.suite for r in results ] == [ 'stem', 'block' ]
    assert all( r.passed for r in results ), report( results )

    # A backward pass that ignores the ReLU masks is caught by both, but not by the bare convolution
    monkeypatch.setattr( frontend, 'relu_backward', lambda dout, cache: dout )
    results = { r.suite: r for r in gradcheck( 'stem,block,conv', trials=2 ) }
    assert not results['stem'].passed and not results['block'].passed
    assert results['conv'].passed
