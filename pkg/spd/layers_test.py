from __future__ import absolute_import, print_function, division

import math

import numpy
import pytest

from ..misc import near, relative_error
from ..linalg import sym_eig, sym_part, frobenius_inner, DimensionError, NumericError
from . import layers
from .layers import ( SpdMatrix, CenteringMatrix, DegenerateInputError, DomainError, RIDGE_FLOOR,
                      covpool_forward, covpool_backward, bimap_forward, bimap_backward,
                      reeig_forward, reeig_backward, logeig_forward, logeig_backward,
                      expeig_forward, spd_vectorize, spd_vectorize_backward, vectorized_length )

EPS				= 1.0e-4
STEP				= 1.0e-5


def random_stiefel( rng, rows, cols ):
    q, r			= numpy.linalg.qr( rng.standard_normal(( cols, cols )))
    return ( q * numpy.sign( numpy.diag( r )))[:rows]


def spectral( rng, values ):
    """A symmetric matrix with the given eigenvalues, in a random orthogonal basis."""
    q				= random_stiefel( rng, len( values ), len( values ))
    return sym_part(( q.T * numpy.asarray( values, dtype=float )) @ q )


def random_spd( rng, d, gap=0.05, low=0.5 ):
    """Random SPD matrix with eigenvalues >= low, separated by >= gap."""
    values			= low + numpy.cumsum( gap + rng.random( d ))
    return spectral( rng, values )


def numeric_sym_grad( f, x, h=STEP ):
    """Central-difference gradient of scalar f at symmetric x, along symmetric perturbations,
    expressed as a symmetric matrix (comparable with the analytic symmetric gradient)."""
    d				= x.shape[0]
    g				= numpy.zeros(( d, d ))
    for i in range( d ):
        for j in range( i, d ):
            e			= numpy.zeros(( d, d ))
            e[i, j]		= e[j, i] = 1
            num			= ( f( x + h * e ) - f( x - h * e )) / ( 2 * h )
            if i == j:
                g[i, i]		= num
            else:
                g[i, j]		= g[j, i] = num / 2
    return g


def numeric_grad( f, x, h=STEP ):
    """Central-difference gradient of scalar f w.r.t. every entry of x independently."""
    g				= numpy.zeros_like( x )
    for idx in numpy.ndindex( *x.shape ):
        e			= numpy.zeros_like( x )
        e[idx]			= h
        g[idx]			= ( f( x + e ) - f( x - e )) / ( 2 * h )
    return g


def brute_covariance( t, unbiased=False ):
    d, m			= t.shape
    mean			= [ sum( t[i, k] for k in range( m )) / m for i in range( d ) ]
    c				= numpy.zeros(( d, d ))
    for i in range( d ):
        for j in range( d ):
            c[i, j]		= sum(( t[i, k] - mean[i] ) * ( t[j, k] - mean[j] ) for k in range( m ))
    return c / ( m - 1 if unbiased else m )


def test_centering_matrix():
    cen = CenteringMatrix( 5 )
    dense = cen.dense()
    assert numpy.allclose( dense, dense.T )
    assert numpy.allclose( dense @ dense, dense / 5 )		# idempotent up to the 1/M scale
    t = numpy.random.default_rng( 0 ).standard_normal(( 3, 5 ))
    assert numpy.allclose( cen.apply( t ), t @ dense )


def test_covpool_forward():
    # Centering annihilates constant rows; only the (absolute) ridge remains
    c = covpool_forward( numpy.array([[ 2., 2., 2. ], [ -1., -1., -1. ]]))
    assert numpy.array_equal( c.values, RIDGE_FLOOR * numpy.eye( 2 ))

    # Biased sample covariance of the observations (1,1) and (-1,1)
    c = covpool_forward( numpy.array([[ 1., -1. ], [ 1., 1. ]]))
    ridge = 1e-6 * 1.0 / 2
    assert numpy.allclose( c.values, [[ 1 + ridge, 0 ], [ 0, ridge ]], rtol=0, atol=1e-15 )
    assert numpy.allclose( c.values - ridge * numpy.eye( 2 ),
                           brute_covariance( numpy.array([[ 1., -1. ], [ 1., 1. ]])), atol=1e-15 )

    rng = numpy.random.default_rng( 11 )
    t = rng.standard_normal(( 4, 50 ))
    c = covpool_forward( t )
    ridge = 1e-6 * numpy.trace( brute_covariance( t )) / 4
    assert numpy.allclose( c.values - ridge * numpy.eye( 4 ), brute_covariance( t ), rtol=0, atol=1e-10 )
    assert sym_eig( c.values ).values.min() > 0

    c = covpool_forward( t, unbiased=True )
    ridge = 1e-6 * numpy.trace( brute_covariance( t, unbiased=True )) / 4
    assert numpy.allclose( c.values - ridge * numpy.eye( 4 ), numpy.cov( t ), rtol=0, atol=1e-10 )


def test_covpool_errors():
    with pytest.raises( DegenerateInputError ):
        covpool_forward( numpy.ones(( 4, 1 )))
    with pytest.raises( DimensionError ):
        covpool_forward( numpy.ones(( 1, 4 )))
    with pytest.raises( DimensionError ):
        covpool_backward( numpy.ones(( 2, 4 )), numpy.zeros(( 3, 3 )))


def test_covpool_backward():
    rng = numpy.random.default_rng( 12 )
    t = rng.standard_normal(( 2, 3 ))
    assert not covpool_backward( t, numpy.zeros(( 2, 2 ))).wrt_input.any()

    # Finite differences of trace( C )
    analytic = covpool_backward( t, numpy.eye( 2 )).wrt_input
    numeric = numeric_grad( lambda x: numpy.trace( covpool_forward( x ).values ), t )
    assert relative_error( analytic, numeric ) < 1e-6

    # ... and of a general <G, C>; only sym( G ) matters, bitwise
    for trial in range( 20 ):
        t = rng.standard_normal(( 4, 7 ))
        g = rng.standard_normal(( 4, 4 ))
        analytic = covpool_backward( t, g ).wrt_input
        numeric = numeric_grad( lambda x: frobenius_inner( g, covpool_forward( x ).values ), t )
        assert relative_error( analytic, numeric ) < 1e-6
        assert analytic.tobytes() == covpool_backward( t, sym_part( g )).wrt_input.tobytes()


def test_bimap_forward():
    rng = numpy.random.default_rng( 13 )
    x = random_spd( rng, 6 )
    w = numpy.eye( 6 )[:4]
    assert numpy.allclose( bimap_forward( SpdMatrix( x ), w ).values, x[:4, :4] )

    w = random_stiefel( rng, 3, 6 )
    assert numpy.allclose( bimap_forward( numpy.eye( 6 ), w ).values, numpy.eye( 3 ))

    x = random_spd( rng, 8 )
    lo, hi = sym_eig( x ).values[[ -1, 0 ]]
    y = bimap_forward( x, random_stiefel( rng, 4, 8 ))
    values = sym_eig( y.values ).values
    assert values.min() > 0
    assert numpy.all( values >= lo - 1e-10 ) and numpy.all( values <= hi + 1e-10 )

    with pytest.raises( DimensionError ):
        bimap_forward( x, numpy.eye( 8 ))
    with pytest.raises( DimensionError ):
        bimap_forward( x, numpy.eye( 6 )[:4] )


def test_bimap_backward():
    rng = numpy.random.default_rng( 14 )
    x = random_spd( rng, 8 )
    w = random_stiefel( rng, 4, 8 )
    zero = bimap_backward( x, w, numpy.zeros(( 4, 4 )))
    assert not zero.wrt_input.any() and not zero.wrt_params.any()

    # The 1 x 1 output case
    x2 = random_spd( rng, 2 )
    w2 = random_stiefel( rng, 1, 2 )
    grad = bimap_backward( x2, w2, numpy.ones(( 1, 1 )))
    total = lambda xx, ww: float( numpy.sum( bimap_forward( xx, ww ).values ))
    assert relative_error( grad.wrt_input, numeric_sym_grad( lambda xx: total( xx, w2 ), x2 )) < 1e-6
    assert relative_error( grad.wrt_params, numeric_grad( lambda ww: total( x2, ww ), w2 )) < 1e-6

    for trial in range( 20 ):
        x = random_spd( rng, 8 )
        w = random_stiefel( rng, 4, 8 )
        grad = bimap_backward( x, w, numpy.ones(( 4, 4 )))
        assert relative_error( grad.wrt_input, numeric_sym_grad( lambda xx: total( xx, w ), x )) < 1e-5
        assert relative_error( grad.wrt_params, numeric_grad( lambda ww: total( x, ww ), w )) < 1e-5
        assert numpy.array_equal( grad.wrt_input, grad.wrt_input.T )


def test_reeig_forward():
    rng = numpy.random.default_rng( 15 )
    x = random_spd( rng, 5 )
    assert numpy.allclose( reeig_forward( x, EPS ).values, x, atol=1e-12 )

    y = reeig_forward( numpy.diag([ 2 * EPS, EPS / 2 ]), EPS )
    assert numpy.allclose( y.values, numpy.diag([ 2 * EPS, EPS ]), rtol=0, atol=1e-18 )

    for trial in range( 10 ):
        a = rng.standard_normal(( 6, 6 ))
        y = reeig_forward( ( a + a.T ) / 2, EPS )
        assert near( sym_eig( y.values ).values.min(), EPS, 1e-8 )

    for eps in ( 0, -1e-3 ):
        with pytest.raises( ValueError ):
            reeig_forward( x, eps )


def test_reeig_backward():
    rng = numpy.random.default_rng( 16 )
    g = sym_part( rng.standard_normal(( 5, 5 )))

    # Identity region: the gradient passes straight through
    x = random_spd( rng, 5 )
    assert numpy.allclose( reeig_backward( x, EPS, g ).wrt_input, g, atol=1e-10 )
    assert not reeig_backward( x, EPS, numpy.zeros(( 5, 5 ))).wrt_input.any()

    # Degenerate input c*I in the identity region; no rotational component
    assert numpy.allclose( reeig_backward( 2 * numpy.eye( 5 ), EPS, g ).wrt_input, g, atol=1e-12 )

    # Entirely clamped: constant output, zero gradient
    x = spectral( rng, [ -0.1, -0.5, -0.9, -1.3, -2.0 ] )
    assert numpy.allclose( reeig_backward( x, EPS, g ).wrt_input, 0, atol=1e-12 )

    # Mixed, eigenvalues > 1e-2 apart and away from the clamp
    for trial in range( 20 ):
        values = rng.permutation([ 1.5, 0.8, 0.3, -0.2, -0.6, -1.1 ] ) + rng.uniform( -0.01, 0.01, 6 )
        x = spectral( rng, values )
        g = rng.standard_normal(( 6, 6 ))
        analytic = reeig_backward( x, EPS, g ).wrt_input
        numeric = numeric_sym_grad( lambda xx: frobenius_inner( g, reeig_forward( xx, EPS ).values ), x )
        assert relative_error( analytic, numeric ) < 1e-5
        assert numpy.allclose( analytic, analytic.T, atol=1e-10 )


def test_logeig_forward():
    assert numpy.allclose( logeig_forward( numpy.eye( 4 )), 0 )
    assert numpy.allclose( logeig_forward( math.e * numpy.eye( 3 )), numpy.eye( 3 ))
    rng = numpy.random.default_rng( 17 )
    for trial in range( 10 ):
        x = random_spd( rng, 5 )
        assert numpy.allclose( expeig_forward( logeig_forward( x )), x, rtol=0, atol=1e-8 )

    with pytest.raises( DomainError ):
        logeig_forward( numpy.diag([ 1., 1e-11 ]))
    with pytest.raises( DomainError ):
        logeig_backward( numpy.diag([ 1., -1. ]), numpy.eye( 2 ))


def test_logeig_backward():
    rng = numpy.random.default_rng( 18 )
    g = sym_part( rng.standard_normal(( 4, 4 )))
    assert numpy.allclose( logeig_backward( numpy.eye( 4 ), g ).wrt_input, g, atol=1e-12 )
    assert not logeig_backward( numpy.eye( 4 ), numpy.zeros(( 4, 4 ))).wrt_input.any()

    for trial in range( 20 ):
        x = random_spd( rng, 6, gap=0.02, low=0.2 )
        g = rng.standard_normal(( 6, 6 ))
        analytic = logeig_backward( x, g ).wrt_input
        numeric = numeric_sym_grad( lambda xx: frobenius_inner( g, logeig_forward( xx )), x )
        assert relative_error( analytic, numeric ) < 1e-5


def test_spd_vectorize():
    assert numpy.array_equal( spd_vectorize( numpy.eye( 2 )), [ 1, 0, 1 ] )
    assert numpy.allclose( spd_vectorize( numpy.array([[ 0., 1. ], [ 1., 0. ]])), [ 0, math.sqrt( 2 ), 0 ] )
    assert vectorized_length( 32 ) == 528 and vectorized_length( 128 ) == 8256

    rng = numpy.random.default_rng( 19 )
    for trial in range( 10 ):
        a = sym_part( rng.standard_normal(( 7, 7 )))
        b = sym_part( rng.standard_normal(( 7, 7 )))
        assert abs( spd_vectorize( a ) @ spd_vectorize( b ) - frobenius_inner( a, b )) < 1e-12

        # The backward pairs with the forward under the Frobenius inner product
        gvec = rng.standard_normal( vectorized_length( 7 ))
        gmat = spd_vectorize_backward( gvec, 7 ).wrt_input
        assert numpy.array_equal( gmat, gmat.T )
        assert abs( frobenius_inner( gmat, a ) - gvec @ spd_vectorize( a )) < 1e-12
        numeric = numeric_sym_grad( lambda xx: gvec @ spd_vectorize( xx ), a )
        assert relative_error( gmat, numeric ) < 1e-8

    with pytest.raises( DimensionError ):
        spd_vectorize( numpy.zeros(( 2, 3 )))
    with pytest.raises( DimensionError ):
        spd_vectorize_backward( numpy.zeros( 4 ), 2 )


def test_spd_closure():
    """Every post-CovPool matrix is PSD (+ridge); every post-ReEig matrix has min eigenvalue >= eps."""
    rng = numpy.random.default_rng( 20 )
    dims = [ 10, 8, 6, 5, 4 ]
    weights = [ random_stiefel( rng, dims[k+1], dims[k] ) for k in range( 4 ) ]
    for trial in range( 100 ):
        t = rng.standard_normal(( 10, 12 ))
        x = covpool_forward( t )
        assert x.eig.values.min() > 0
        for w in weights:
            x = reeig_forward( bimap_forward( x, w ), EPS )
            assert sym_eig( x.values ).values.min() >= EPS - 1e-12
        assert numpy.all( numpy.isfinite( logeig_forward( x )))


def test_checked_mode():
    previous = layers.checked()
    from ..linalg import set_checked
    set_checked( True )
    try:
        rng = numpy.random.default_rng( 21 )
        x = random_spd( rng, 6 )
        bimap_forward( x, random_stiefel( rng, 3, 6 ))
        with pytest.raises( NumericError ) as exc:
            bimap_forward( x, 2 * random_stiefel( rng, 3, 6 ))
        assert "not orthonormal" in str( exc.value )
    finally:
        set_checked( previous )
