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
spdgpr.spd.layers -- Forward and backward passes of the SPD layers

    covpool	T (d x M)  -> C = T I' Tt + ridge I		(second-order pooling)
    bimap	X (d x d)  -> W X Wt				(W row-orthonormal, d' x d, d' < d)
    reeig	X          -> U max( eps I, S ) Ut		(eigenvalue rectification)
    logeig	X          -> U log( S ) Ut			(tangent space at the identity)
    vectorize	X          -> upper triangle, off-diagonals scaled by sqrt(2)

Every backward takes the upstream gradient dL/dY and returns a LayerGrad.  Upstream gradients are
symmetrized first, since every output here is symmetric.  The eigenvalue layers share one
eigen-backward, in the divided-difference form:

    dL/dX = U ( L o ( Ut sym( dL/dY ) U )) Ut,  L_ij = ( f(s_i) - f(s_j) ) / ( s_i - s_j ),  L_ii = f'(s_i)

which is the P-weighted composite sym( Pt o ( Ut dL/dU )) + diag( dL/dS ) with P_ij = 1/(s_i - s_j).
Pairs closer than 1e-12 max( 1, |s_i| ) have P_ij = 0, and take the limit ( f'(s_i) + f'(s_j) )/2.
"""

__all__				= [ 'SpdMatrix', 'CenteringMatrix', 'LayerGrad',
                                    'DegenerateInputError', 'DomainError',
                                    'covpool_forward', 'covpool_backward',
                                    'bimap_forward', 'bimap_backward',
                                    'reeig_forward', 'reeig_backward',
                                    'logeig_forward', 'logeig_backward', 'expeig_forward',
                                    'spd_vectorize', 'spd_vectorize_backward', 'vectorized_length' ]

import collections
import logging
import math

import numpy

from .. import defaults, misc
from ..linalg import ( sym_eig, sym_part, eig_apply, check_finite, checked, orthogonality_drift,
                       DimensionError, NumericError )

log				= logging.getLogger( __package__ )

RIDGE_FLOOR			= 1.0e-12	# absolute ridge when the relative ridge vanishes (constant input)
DEGENERATE			= 1.0e-12	# relative eigengap below which a pair is treated as equal


class DegenerateInputError( NumericError ):
    """The input cannot define the statistic (eg. a covariance of fewer than 2 observations)."""


class DomainError( NumericError ):
    """An eigenvalue lies outside the matrix function's domain."""


LayerGrad			= collections.namedtuple( 'LayerGrad', ( 'wrt_input', 'wrt_params' ))
LayerGrad.__new__.__defaults__	= ( None, )


class SpdMatrix( object ):
    """A symmetric (positive-definite) matrix, and its lazily computed canonical eigendecomposition.
    The forward pass caches the EVD here, for use by the corresponding backward."""
    __slots__			= ( 'values', '_eig' )

    def __init__( self, values ):
        values			= numpy.array( values, copy=True )
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionError( "SPD matrix must be square, not %r" % ( values.shape, ))
        values.setflags( write=False )
        self.values		= values
        self._eig		= None

    @property
    def dim( self ):
        return self.values.shape[0]

    @property
    def eig( self ):
        if self._eig is None:
            self._eig		= sym_eig( self.values )
        return self._eig

    def __repr__( self ):
        return "<SpdMatrix %d x %d>" % ( self.dim, self.dim )


def spd( x ):
    return x if isinstance( x, SpdMatrix ) else SpdMatrix( x )


def matrix( x ):
    return x.values if isinstance( x, SpdMatrix ) else numpy.asarray( x )


def verified( x, what ):
    """In checked mode, reject non-finite layer outputs."""
    if checked():
        check_finite( x, what )
    return x


class CenteringMatrix( object ):
    """The implicit column-centering operator I' = (1/M) ( I - (1/M) 1 1t ), or its unbiased
    1/(M-1) variant.  Symmetric, and idempotent up to the scale; never materialized by the layers."""
    __slots__			= ( 'n', 'scale' )

    def __init__( self, n, unbiased=False ):
        self.n			= n
        self.scale		= 1.0 / (( n - 1 ) if unbiased else n )

    def center( self, t ):
        """T ( I - (1/M) 1 1t ): subtract each row's mean."""
        return t - t.mean( axis=1, keepdims=True )

    def apply( self, t ):
        """T I'"""
        return self.center( t ) * self.scale

    def dense( self ):
        return self.scale * ( numpy.eye( self.n ) - numpy.ones(( self.n, self.n )) / self.n )


def covpool_shape( t ):
    t				= numpy.asarray( t )
    if t.ndim != 2:
        raise DimensionError( "CovPool input must be d x M, not %r" % ( t.shape, ))
    d, m			= t.shape
    if d < 2:
        raise DimensionError( "CovPool requires d >= 2 features, not %d" % d )
    if m < 2:
        raise DegenerateInputError( "CovPool requires M >= 2 observations, not %d" % m )
    return t, d, m


def covpool_ridge( trace, d, ridge ):
    """Returns the ridge added to C, and whether it varies with C (the relative ridge)."""
    relative			= ridge * trace / d
    if relative >= RIDGE_FLOOR:
        return relative, True
    return RIDGE_FLOOR, False


def covpool_forward( t, ridge=defaults.ridge, unbiased=defaults.unbiased ):
    t, d, m			= covpool_shape( t )
    centering			= CenteringMatrix( m, unbiased=unbiased )
    tc				= centering.center( t )
    c				= sym_part( centering.scale * ( tc @ tc.T ))
    added, _			= covpool_ridge( float( numpy.trace( c )), d, ridge )
    c				= c + added * numpy.eye( d, dtype=c.dtype )
    log.trace( "CovPool %d x %d -> %d x %d, ridge %.3e", d, m, d, d, added )
    return SpdMatrix( verified( c, "CovPool output" ))


def covpool_backward( t, grad_c, ridge=defaults.ridge, unbiased=defaults.unbiased ):
    """dL/dT = 2 sym( dL/dC ) T I', plus the ridge's own dependence on trace( C )."""
    t, d, m			= covpool_shape( t )
    grad_c			= numpy.asarray( grad_c )
    if grad_c.shape != ( d, d ):
        raise DimensionError( "CovPool gradient must be %d x %d, not %r" % ( d, d, grad_c.shape ))
    centering			= CenteringMatrix( m, unbiased=unbiased )
    tc				= centering.center( t )
    g				= sym_part( grad_c )
    trace			= centering.scale * float( numpy.sum( tc * tc ))
    _, relative			= covpool_ridge( trace, d, ridge )
    if relative:
        g			= g + ( ridge / d ) * numpy.trace( g ) * numpy.eye( d, dtype=g.dtype )
    return LayerGrad( verified( 2 * centering.scale * ( g @ tc ), "CovPool gradient" ))


def bimap_forward( x, w ):
    """W X Wt, reducing dimension from the columns to the rows of W."""
    xv, w			= matrix( x ), matrix( w )
    rows, cols			= w.shape
    if cols != xv.shape[0]:
        raise DimensionError( "BiMap weight %r does not fit a %d x %d input" % ( w.shape, xv.shape[0], xv.shape[1] ))
    if rows >= cols:
        raise DimensionError( "BiMap must reduce dimension; weight is %d x %d" % ( rows, cols ))
    if checked():
        drift			= orthogonality_drift( w.T )
        if not drift <= ( 1e-8 if w.dtype == numpy.float64 else 1e-4 ):
            raise NumericError( "BiMap weight rows not orthonormal; ||WWt - I||_F = %.3e" % drift )
    return SpdMatrix( verified( sym_part( w @ xv @ w.T ), "BiMap output" ))


def bimap_backward( x, w, grad_out ):
    """dL/dX = Wt sym( G ) W; Euclidean dL/dW = 2 sym( G ) W X.  Projection onto the Stiefel
    manifold's tangent space is the optimizer's business."""
    xv, w			= matrix( x ), matrix( w )
    rows, cols			= w.shape
    grad_out			= numpy.asarray( grad_out )
    if grad_out.shape != ( rows, rows ) or xv.shape != ( cols, cols ):
        raise DimensionError( "BiMap gradient %r, weight %r and input %r are inconsistent" % (
            grad_out.shape, w.shape, xv.shape ))
    g				= sym_part( grad_out )
    return LayerGrad( sym_part( w.T @ g @ w ), 2 * ( g @ w @ xv ))


def eig_backward( eig, grad_out, fn, derivative ):
    """The shared eigen-backward of a spectral function X -> U fn( S ) Ut."""
    u, s			= eig.vectors, eig.values
    if grad_out.shape != u.shape:
        raise DimensionError( "Gradient %r does not match a %d x %d input" % ( grad_out.shape, s.size, s.size ))
    h				= u.T @ sym_part( grad_out ) @ u
    fs, fp			= fn( s ), derivative( s )

    diff			= s[:, None] - s[None, :]
    degenerate			= numpy.abs( diff ) < DEGENERATE * numpy.maximum( 1, numpy.abs( s ))[:, None]
    p				= numpy.zeros_like( diff )
    numpy.divide( 1, diff, out=p, where=~degenerate )

    dldu			= 2 * h * fs[None, :]			# Ut dL/dU
    core			= sym_part( p.T * dldu )
    limit			= degenerate & ~numpy.eye( s.size, dtype=bool )
    if limit.any():
        core		       += numpy.where( limit, h * ( fp[:, None] + fp[None, :] ) / 2, 0 )
    core[numpy.diag_indices( s.size )] += fp * numpy.diag( h )	# dL/dS
    return sym_part( u @ core @ u.T )


def reeig_forward( x, eps=defaults.reeig_eps ):
    """U max( eps I, S ) Ut"""
    if not eps > 0:
        raise ValueError( "ReEig threshold must be positive, not %r" % ( eps, ))
    x				= spd( x )
    eig				= x.eig
    log.trace( misc.lazystr( lambda: "ReEig %d x %d: %d of %d eigenvalues clamped to %g" % (
        x.dim, x.dim, int( numpy.sum( eig.values < eps )), x.dim, eps )))
    return SpdMatrix( verified( eig_apply( eig, lambda v: numpy.maximum( v, eps )), "ReEig output" ))


def reeig_backward( x, eps, grad_out ):
    """Eigen-backward with f = max( eps, s ) and the mask Q_ii = 1 where s_i >= eps."""
    x				= spd( x )
    return LayerGrad( verified( eig_backward(
        x.eig, numpy.asarray( grad_out ),
        lambda v: numpy.maximum( v, eps ),
        lambda v: ( v >= eps ).astype( v.dtype )), "ReEig gradient" ))


def logeig_domain( x, floor ):
    eig				= x.eig
    if eig.values[-1] <= floor:
        raise DomainError( "LogEig requires eigenvalues > %g; smallest is %g" % ( floor, eig.values[-1] ))
    return eig


def logeig_forward( x, floor=defaults.logeig_floor ):
    """U log( S ) Ut; the result is symmetric, but not SPD."""
    x				= spd( x )
    eig				= logeig_domain( x, floor )
    return verified( eig_apply( eig, numpy.log ), "LogEig output" )


def logeig_backward( x, grad_out, floor=defaults.logeig_floor ):
    """Eigen-backward with f = log, f' = 1/s."""
    x				= spd( x )
    eig				= logeig_domain( x, floor )
    return LayerGrad( verified( eig_backward(
        eig, numpy.asarray( grad_out ), numpy.log, lambda v: 1 / v ), "LogEig gradient" ))


def expeig_forward( x ):
    """U exp( S ) Ut; the inverse of LogEig."""
    return eig_apply( sym_eig( matrix( x )), numpy.exp )


def vectorized_length( d ):
    return d * ( d + 1 ) // 2


def vectorize_weights( d, dtype=numpy.float64 ):
    rows, cols			= numpy.triu_indices( d )
    return rows, cols, numpy.where( rows == cols, 1, math.sqrt( 2 )).astype( dtype )


def spd_vectorize( x ):
    """Row-major upper triangle (diagonal included), off-diagonals scaled by sqrt(2), so that
    vec( a ) . vec( b ) == <a, b>_F for symmetric a, b."""
    x				= matrix( x )
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError( "Cannot vectorize a non-square %r matrix" % ( x.shape, ))
    rows, cols, weights		= vectorize_weights( x.shape[0], x.dtype )
    return x[rows, cols] * weights


def spd_vectorize_backward( grad_vec, d ):
    """The symmetric matrix gradient: g_ii on the diagonal, g_ij/sqrt(2) in both triangles."""
    grad_vec			= numpy.asarray( grad_vec )
    if grad_vec.shape != ( vectorized_length( d ), ):
        raise DimensionError( "Vectorized gradient %r does not fit a %d x %d matrix" % ( grad_vec.shape, d, d ))
    rows, cols, weights		= vectorize_weights( d, grad_vec.dtype )
    g				= numpy.zeros(( d, d ), dtype=grad_vec.dtype )
    g[rows, cols]		= grad_vec / weights
    return LayerGrad( g + numpy.triu( g, 1 ).T )
