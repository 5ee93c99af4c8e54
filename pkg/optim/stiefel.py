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
spdgpr.optim.stiefel -- SGD with momentum, Riemannian on the Stiefel manifold

BiMap weights W (d' x d, d' < d) have orthonormal rows: W Wt = I.  Their Euclidean gradient G is
projected onto the tangent space at W,

    P( G ) = G - sym( G Wt ) W

the step is taken in the tangent space, and the result retracted back onto the manifold by a QR
orthonormalization of the rows of W + step (positive-diagonal convention).  All other parameters
are Euclidean and use classic momentum.
"""

__all__				= [ 'StiefelParam', 'EuclideanParam', 'OptimizerConfig', 'StiefelSGD',
                                    'stiefel_project', 'stiefel_retract', 'stiefel_orthonormalize',
                                    'stiefel_init', 'step', 'optimizer_config' ]

import collections
import logging

import numpy

from .. import defaults, misc
from ..linalg import sym_part, orthogonality_drift, DimensionError, NumericError

log				= logging.getLogger( __package__ )

RANK_TOLERANCE			= 1.0e-10	# |R_ii| below this (relative to ||W + step||) is rank deficient


class EuclideanParam( object ):
    """An unconstrained parameter (conv/FC weights, biases, batch-norm affine), and its momentum."""
    __slots__			= ( 'values', 'momentum_buf' )

    def __init__( self, values ):
        self.values		= numpy.array( values, copy=True )
        self.momentum_buf	= numpy.zeros_like( self.values )

    @property
    def shape( self ):
        return self.values.shape

    def __repr__( self ):
        return "<%s %s>" % ( self.__class__.__name__, "x".join( map( str, self.shape )))


class StiefelParam( EuclideanParam ):
    """A d' x d matrix with orthonormal rows (d' < d); its momentum lives in the tangent space."""
    __slots__			= ()

    def __init__( self, values ):
        super( StiefelParam, self ).__init__( values )
        if self.values.ndim != 2 or self.rows >= self.cols:
            raise DimensionError( "Stiefel parameter must be d' x d with d' < d, not %r" % ( self.shape, ))

    @property
    def rows( self ):
        return self.values.shape[0]

    @property
    def cols( self ):
        return self.values.shape[1]

    def drift( self ):
        """||W Wt - I||_F"""
        return orthogonality_drift( self.values.T )

    def project( self, euclid_grad ):
        return stiefel_project( self.values, euclid_grad )

    def retract( self, step ):
        return stiefel_retract( self.values, step )


OptimizerConfig			= collections.namedtuple( 'OptimizerConfig', (
    'learning_rate', 'momentum', 'batch_size', 'stiefel_momentum' ))
OptimizerConfig.__new__.__defaults__ = ( defaults.learning_rate, defaults.momentum,
                                         defaults.batch_size, defaults.stiefel_momentum )

def optimizer_config( cfg=None ):
    """An OptimizerConfig from a (dot)dict of any subset of its fields, validated."""
    result			= OptimizerConfig( **dict( cfg or {} )) if not isinstance( cfg, OptimizerConfig ) else cfg
    if not result.learning_rate > 0:
        raise ValueError( "Learning rate must be positive, not %r" % ( result.learning_rate, ))
    if not 0 <= result.momentum < 1:
        raise ValueError( "Momentum must be in [0,1), not %r" % ( result.momentum, ))
    if not ( isinstance( result.batch_size, int ) and result.batch_size > 0 ):
        raise ValueError( "Batch size must be a positive integer, not %r" % ( result.batch_size, ))
    return result


def stiefel_shapes( w, other, what ):
    w, other			= numpy.asarray( w ), numpy.asarray( other )
    if w.shape != other.shape:
        raise DimensionError( "Stiefel %s %r does not match the parameter %r" % ( what, other.shape, w.shape ))
    return w, other


def stiefel_project( w, euclid_grad ):
    """Tangent-space projection G - sym( G Wt ) W; satisfies P Wt + W Pt = 0."""
    w, g			= stiefel_shapes( getattr( w, 'values', w ), euclid_grad, "gradient" )
    return g - sym_part( g @ w.T ) @ w


def stiefel_orthonormalize( moved ):
    """The row-orthonormal Q of a QR factorization of the rows (positive-diagonal convention)."""
    moved			= numpy.asarray( moved )
    q, r			= numpy.linalg.qr( moved.T )
    diag			= numpy.diag( r )
    if numpy.min( numpy.abs( diag )) <= RANK_TOLERANCE * max( numpy.linalg.norm( moved ), 1.0 ):
        raise NumericError( "Stiefel retraction of a rank deficient %d x %d matrix; |R_ii| min %.3e" % (
            moved.shape[0], moved.shape[1], numpy.min( numpy.abs( diag ))))
    return numpy.ascontiguousarray(( q * numpy.sign( diag )).T )


def stiefel_retract( w, step ):
    """Orthonormalize the rows of W + step by QR (positive diagonal).  A zero step returns W itself."""
    w, step			= stiefel_shapes( getattr( w, 'values', w ), step, "step" )
    if not step.any():
        return w
    return stiefel_orthonormalize( w + step )


def stiefel_init( rows, cols, rng, dtype=numpy.float64 ):
    """The top rows of the Q factor of a seeded Gaussian matrix (positive-diagonal convention)."""
    q, r			= numpy.linalg.qr( rng.standard_normal(( cols, cols )))
    q			       *= numpy.where( numpy.diag( r ) < 0, -1, 1 )
    return StiefelParam( q[:rows].astype( dtype ))


def step( params, grads, cfg ):
    """One optimizer step over an ordered mapping of name -> parameter, updating them in place.

    Euclidean:	buf <- m buf + g;			p <- p - lr buf
    Stiefel:	buf <- P( m buf + P( g ));		W <- retract( W, -lr buf );	buf <- P_W'( buf )
    """
    missing			= [ name for name in params if name not in grads ]
    extra			= [ name for name in grads if name not in params ]
    if missing or extra:
        raise KeyError( "Gradients do not match parameters; missing: %s, extra: %s" % (
            ", ".join( missing ) or "none", ", ".join( extra ) or "none" ))
    lr, m			= cfg.learning_rate, cfg.momentum
    for name, param in params.items():
        grad			= numpy.asarray( grads[name], dtype=param.values.dtype )
        if grad.shape != param.shape:
            raise DimensionError( "Gradient of %s is %r, not %r" % ( name, grad.shape, param.shape ))
        if isinstance( param, StiefelParam ):
            rgrad		= param.project( grad )
            if cfg.stiefel_momentum:
                param.momentum_buf = param.project( m * param.momentum_buf + rgrad )
            else:
                param.momentum_buf = rgrad
            param.values	= param.retract( -lr * param.momentum_buf )
            param.momentum_buf	= param.project( param.momentum_buf )
            log.trace( misc.lazystr( lambda: "Stiefel %s drift %.3e" % ( name, param.drift() )))
        else:
            param.momentum_buf	= m * param.momentum_buf + grad
            param.values	= param.values - lr * param.momentum_buf
    return params


class StiefelSGD( object ):
    """Owns an ordered name -> parameter mapping, and steps it with a fixed configuration."""
    def __init__( self, params, cfg=None ):
        self.params		= params
        self.cfg		= optimizer_config( cfg )
        self.steps		= 0

    def step( self, grads ):
        step( self.params, grads, self.cfg )
        self.steps	       += 1
        return self.params
