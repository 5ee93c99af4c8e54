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
spdgpr.nn.layers -- Conventional (first-order) layers, on NCHW numpy arrays

Each layer is a <name>_forward returning ( output, cache ), and a <name>_backward taking the
upstream gradient and that cache.  Gradients wrt parameters are returned alongside the gradient wrt
the input; nothing is accumulated in place.
"""

__all__				= [ 'conv2d_forward', 'conv2d_backward', 'conv_output_size',
                                    'batchnorm2d_forward', 'batchnorm2d_backward',
                                    'relu_forward', 'relu_backward',
                                    'maxpool2d_forward', 'maxpool2d_backward',
                                    'affine_forward', 'affine_backward',
                                    'dropout_forward', 'dropout_backward',
                                    'global_avgpool_forward', 'global_avgpool_backward',
                                    'kaiming_normal', 'uniform_fan_in' ]

import logging
import math

import numpy
from numpy.lib.stride_tricks import sliding_window_view

from .. import defaults, misc
from ..linalg import DimensionError

log				= logging.getLogger( __package__ )


def conv_output_size( size, kernel, stride=1, pad=0 ):
    out				= ( size + 2 * pad - kernel ) // stride + 1
    if out < 1:
        raise DimensionError( "A %d kernel (stride %d, pad %d) does not fit input size %d" % (
            kernel, stride, pad, size ))
    return out


def windows( x, kh, kw, stride ):
    """N x C x Ho x Wo x kh x kw strided view of the (already padded) x."""
    return sliding_window_view( x, ( kh, kw ), axis=( 2, 3 ))[:, :, ::stride, ::stride]


def conv2d_forward( x, w, b=None, stride=1, pad=0 ):
    """x: N x C x H x W, w: F x C x kh x kw, b: F or None."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise DimensionError( "Convolution of %r input by %r weights" % ( x.shape, w.shape ))
    kh, kw			= w.shape[2:]
    ho				= conv_output_size( x.shape[2], kh, stride, pad )
    wo				= conv_output_size( x.shape[3], kw, stride, pad )
    xp				= numpy.pad( x, (( 0, 0 ), ( 0, 0 ), ( pad, pad ), ( pad, pad ))) if pad else x
    cols			= windows( xp, kh, kw, stride )[:, :, :ho, :wo]
    out				= numpy.tensordot( cols, w, axes=( [ 1, 4, 5 ], [ 1, 2, 3 ] ))
    out				= numpy.ascontiguousarray( out.transpose( 0, 3, 1, 2 ))
    if b is not None:
        out		       += b.reshape( 1, -1, 1, 1 )
    return out, ( x.shape, xp, cols, w, b is not None, stride, pad )


def conv2d_backward( dout, cache ):
    """Returns dx, dw, db (db is None for a bias-free convolution)."""
    shape, xp, cols, w, biased, stride, pad = cache
    kh, kw			= w.shape[2:]
    ho, wo			= dout.shape[2:]
    dw				= numpy.tensordot( dout, cols, axes=( [ 0, 2, 3 ], [ 0, 2, 3 ] ))
    db				= dout.sum( axis=( 0, 2, 3 )) if biased else None
    dxp				= numpy.zeros_like( xp )
    for i in range( kh ):
        for j in range( kw ):
            dxp[:, :, i:i + stride * ( ho - 1 ) + 1:stride, j:j + stride * ( wo - 1 ) + 1:stride] \
				       += numpy.tensordot( dout, w[:, :, i, j], axes=( [ 1 ], [ 0 ] )).transpose( 0, 3, 1, 2 )
    dx				= dxp[:, :, pad:pad + shape[2], pad:pad + shape[3]] if pad else dxp
    return numpy.ascontiguousarray( dx ), dw, db


def batchnorm2d_forward( x, gamma, beta, running_mean, running_var, train,
                         momentum=defaults.bn_momentum, eps=defaults.bn_eps ):
    """Per-channel normalization.  Training mode normalizes by the batch statistics (reduced over
    N, H and W in a fixed order) and returns the updated running statistics; eval mode uses the
    running statistics, which are returned unchanged.  The batch is normalized by its biased
    variance; the running variance tracks the unbiased m/(m-1) estimate, m = N*H*W."""
    if train:
        mean			= x.mean( axis=( 0, 2, 3 ))
        var			= x.var( axis=( 0, 2, 3 ))
        m			= x.shape[0] * x.shape[2] * x.shape[3]
        unbiased		= var * ( m / ( m - 1 )) if m > 1 else var
        running_mean		= misc.exponential_moving_average( running_mean, mean, momentum )
        running_var		= misc.exponential_moving_average( running_var, unbiased, momentum )
    else:
        mean, var		= running_mean, running_var
    invstd			= 1 / numpy.sqrt( var + eps )
    xhat			= ( x - mean.reshape( 1, -1, 1, 1 )) * invstd.reshape( 1, -1, 1, 1 )
    out				= gamma.reshape( 1, -1, 1, 1 ) * xhat + beta.reshape( 1, -1, 1, 1 )
    return out, ( xhat, invstd, gamma, train ), ( running_mean, running_var )


def batchnorm2d_backward( dout, cache ):
    """Returns dx, dgamma, dbeta."""
    xhat, invstd, gamma, train	= cache
    dgamma			= ( dout * xhat ).sum( axis=( 0, 2, 3 ))
    dbeta			= dout.sum( axis=( 0, 2, 3 ))
    dxhat			= dout * gamma.reshape( 1, -1, 1, 1 )
    if not train:
        return dxhat * invstd.reshape( 1, -1, 1, 1 ), dgamma, dbeta
    m				= xhat.shape[0] * xhat.shape[2] * xhat.shape[3]
    dx				= ( invstd.reshape( 1, -1, 1, 1 ) / m ) * (
        m * dxhat
        - dxhat.sum( axis=( 0, 2, 3 ), keepdims=True )
        - xhat * ( dxhat * xhat ).sum( axis=( 0, 2, 3 ), keepdims=True ))
    return dx, dgamma, dbeta


def relu_forward( x ):
    return numpy.maximum( x, 0 ), x > 0


def relu_backward( dout, cache ):
    return dout * cache


def maxpool2d_forward( x, kernel=3, stride=None ):
    """Max over kernel x kernel windows (floor mode: partial windows are dropped)."""
    stride			= stride or kernel
    ho				= conv_output_size( x.shape[2], kernel, stride )
    wo				= conv_output_size( x.shape[3], kernel, stride )
    cols			= windows( x, kernel, kernel, stride )[:, :, :ho, :wo]
    cols			= cols.reshape( cols.shape[:4] + ( kernel * kernel, ))
    argmax			= cols.argmax( axis=-1 )
    out				= numpy.take_along_axis( cols, argmax[..., None], axis=-1 )[..., 0]
    return out, ( x.shape, argmax, kernel, stride )


def maxpool2d_backward( dout, cache ):
    """Routes each output's gradient to the (first) maximal element of its window."""
    shape, argmax, kernel, stride = cache
    ho, wo			= dout.shape[2:]
    dx				= numpy.zeros( shape, dtype=dout.dtype )
    for i in range( kernel ):
        for j in range( kernel ):
            dx[:, :, i:i + stride * ( ho - 1 ) + 1:stride, j:j + stride * ( wo - 1 ) + 1:stride] \
				       += numpy.where( argmax == i * kernel + j, dout, 0 )
    return dx


def affine_forward( x, w, b ):
    """x: N x D, w: K x D, b: K"""
    if x.ndim != 2 or w.shape[1] != x.shape[1]:
        raise DimensionError( "Fully connected %r weights do not fit %r input" % ( w.shape, x.shape ))
    return x @ w.T + b, ( x, w )


def affine_backward( dout, cache ):
    """Returns dx, dw, db."""
    x, w			= cache
    return dout @ w, dout.T @ x, dout.sum( axis=0 )


def dropout_forward( x, rate, train, rng ):
    """Inverted dropout: in training, zero each entry with probability rate and scale survivors by
    1/(1 - rate).  Identity in evaluation (the cache is then None)."""
    if not 0 <= rate < 1:
        raise ValueError( "Dropout rate must be in [0,1), not %r" % ( rate, ))
    if not train or rate == 0:
        return x, None
    mask			= ( rng.random( x.shape ) >= rate ).astype( x.dtype ) / ( 1 - rate )
    return x * mask, mask


def dropout_backward( dout, cache ):
    return dout if cache is None else dout * cache


def global_avgpool_forward( x ):
    """N x C x H x W -> N x C"""
    return x.mean( axis=( 2, 3 )), x.shape


def global_avgpool_backward( dout, cache ):
    n, c, h, w			= cache
    return numpy.broadcast_to(( dout / ( h * w )).reshape( n, c, 1, 1 ), cache ).copy()


def kaiming_normal( rng, shape, dtype=numpy.float64 ):
    """Seeded He-normal weights, std sqrt( 2 / fan_in ), for layers followed by a ReLU."""
    fan_in			= int( numpy.prod( shape[1:] ))
    return ( rng.standard_normal( shape ) * math.sqrt( 2.0 / fan_in )).astype( dtype )


def uniform_fan_in( rng, shape, dtype=numpy.float64 ):
    """Seeded uniform weights in +/- 1/sqrt( fan_in )."""
    bound			= 1 / math.sqrt( int( numpy.prod( shape[1:] )) or 1 )
    return rng.uniform( -bound, bound, size=shape ).astype( dtype )
