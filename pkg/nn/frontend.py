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
spdgpr.nn.frontend -- The convolutional feature extractor, and the tensors it hands to CovPool

The stack is a ResNet-34 style stem followed by basic blocks, all of the same width:

    layer 1	7x7/2 conv, BN, ReLU				112 x 60 -> 56 x 30
    layer k	3x3 conv, BN, ReLU, 3x3 conv, BN, + skip, ReLU
		the transition layer strides by 2, and its skip is a 1x1/2 conv + BN	56 x 30 -> 28 x 15

Every layer's output is kept (the FeatureMaps), since SRCNet assembles from all of them and RCNet
from the last.  Gradients may arrive at any layer's output; they are summed with those flowing back
from later layers.
"""

__all__				= [ 'ConvStackConfig', 'conv_stack_config', 'conv_plan', 'conv_stack_init',
                                    'stem_forward', 'stem_backward', 'block_forward', 'block_backward',
                                    'conv_stack_forward', 'conv_stack_backward',
                                    'resize_matrix', 'bilinear_resize', 'bilinear_resize_backward',
                                    'srcnet_size', 'assemble_srcnet', 'assemble_srcnet_backward',
                                    'assemble_rcnet', 'assemble_rcnet_backward' ]

import collections
import logging

import numpy

from .. import defaults
from ..linalg import DimensionError
from .layers import ( conv2d_forward, conv2d_backward, conv_output_size,
                      batchnorm2d_forward, batchnorm2d_backward, relu_forward, relu_backward,
                      kaiming_normal )

log				= logging.getLogger( __package__ )


ConvStackConfig			= collections.namedtuple( 'ConvStackConfig', (
    'num_layers', 'channels', 'srcnet_keep', 'input_h', 'input_w',
    'stem_kernel', 'transition_layer', 'bn_momentum', 'bn_eps' ))
ConvStackConfig.__new__.__defaults__ = (
    defaults.conv_layers, defaults.conv_channels, defaults.srcnet_keep,
    defaults.input_h, defaults.input_w, defaults.stem_kernel, defaults.transition_layer,
    defaults.bn_momentum, defaults.bn_eps )


def conv_stack_config( cfg=None ):
    """A validated ConvStackConfig from a (dot)dict of any subset of its fields."""
    result			= cfg if isinstance( cfg, ConvStackConfig ) else ConvStackConfig( **dict( cfg or {} ))
    if result.num_layers < 1:
        raise ValueError( "The convolutional stack needs at least 1 layer, not %r" % ( result.num_layers, ))
    if not 1 <= result.srcnet_keep <= result.channels:
        raise ValueError( "SRCNet keeps %r of %r channels" % ( result.srcnet_keep, result.channels ))
    return result


# One entry per layer: its kind, its stride, and its output spatial size
LayerPlan			= collections.namedtuple( 'LayerPlan', ( 'name', 'stride', 'h', 'w' ))


def conv_plan( cfg ):
    cfg				= conv_stack_config( cfg )
    pad				= cfg.stem_kernel // 2
    h				= conv_output_size( cfg.input_h, cfg.stem_kernel, 2, pad )
    w				= conv_output_size( cfg.input_w, cfg.stem_kernel, 2, pad )
    plan			= [ LayerPlan( 'stem', 2, h, w ) ]
    for layer in range( 2, cfg.num_layers + 1 ):
        stride			= 2 if layer == cfg.transition_layer else 1
        h			= conv_output_size( h, 3, stride, 1 )
        w			= conv_output_size( w, 3, stride, 1 )
        plan.append( LayerPlan( 'block%d' % layer, stride, h, w ))
    return plan


def conv_stack_init( cfg, rng, dtype=numpy.float64 ):
    """Seeded Kaiming-normal convolutions, unit/zero BN affine; returns ( params, buffers ) as
    ordered name -> array mappings.  Buffers hold the BN running statistics."""
    cfg				= conv_stack_config( cfg )
    params			= collections.OrderedDict()
    buffers			= collections.OrderedDict()
    ch				= cfg.channels

    def bn( prefix ):
        params[prefix+'.gamma']	= numpy.ones( ch, dtype=dtype )
        params[prefix+'.beta']	= numpy.zeros( ch, dtype=dtype )
        buffers[prefix+'.mean']	= numpy.zeros( ch, dtype=dtype )
        buffers[prefix+'.var']	= numpy.ones( ch, dtype=dtype )

    for layer in conv_plan( cfg ):
        if layer.name == 'stem':
            params['stem.conv']	= kaiming_normal( rng, ( ch, 1, cfg.stem_kernel, cfg.stem_kernel ), dtype )
            bn( 'stem.bn' )
            continue
        params[layer.name+'.conv1'] = kaiming_normal( rng, ( ch, ch, 3, 3 ), dtype )
        bn( layer.name+'.bn1' )
        params[layer.name+'.conv2'] = kaiming_normal( rng, ( ch, ch, 3, 3 ), dtype )
        bn( layer.name+'.bn2' )
        if layer.stride != 1:
            params[layer.name+'.skip'] = kaiming_normal( rng, ( ch, ch, 1, 1 ), dtype )
            bn( layer.name+'.skipbn' )
    return params, buffers


class ConvStackCache( object ):
    """Per-layer caches of one forward pass, replayed in reverse by conv_stack_backward."""
    def __init__( self, cfg ):
        self.cfg		= cfg
        self.layers		= []


def conv_bn( x, params, buffers, conv, bn, stride, pad, train, cfg ):
    """Convolution followed by batch-norm; updates the running statistics in training."""
    out, conv_cache		= conv2d_forward( x, params[conv], None, stride, pad )
    out, bn_cache, running	= batchnorm2d_forward(
        out, params[bn+'.gamma'], params[bn+'.beta'], buffers[bn+'.mean'], buffers[bn+'.var'],
        train, momentum=cfg.bn_momentum, eps=cfg.bn_eps )
    if train:
        buffers[bn+'.mean'], buffers[bn+'.var'] = running
    return out, ( conv, bn, conv_cache, bn_cache )


def conv_bn_backward( dout, cache, grads ):
    conv, bn, conv_cache, bn_cache = cache
    dout, grads[bn+'.gamma'], grads[bn+'.beta'] = batchnorm2d_backward( dout, bn_cache )
    dx, grads[conv], _		= conv2d_backward( dout, conv_cache )
    return dx


def stem_forward( x, params, buffers, train, cfg ):
    """Layer 1: the strided stem convolution, BN and ReLU."""
    out, stem			= conv_bn( x, params, buffers, 'stem.conv', 'stem.bn', 2, cfg.stem_kernel // 2, train, cfg )
    x, relu			= relu_forward( out )
    return x, ( stem, relu )


def stem_backward( dout, cache, grads ):
    stem, relu			= cache
    return conv_bn_backward( relu_backward( dout, relu ), stem, grads )


def block_forward( x, params, buffers, name, stride, train, cfg ):
    """A basic block; a strided block's skip is projected by its 1x1 conv + BN."""
    out, first			= conv_bn( x, params, buffers, name+'.conv1', name+'.bn1', stride, 1, train, cfg )
    out, relu1			= relu_forward( out )
    out, second			= conv_bn( out, params, buffers, name+'.conv2', name+'.bn2', 1, 1, train, cfg )
    if stride != 1:
        skip, projection	= conv_bn( x, params, buffers, name+'.skip', name+'.skipbn', stride, 0, train, cfg )
    else:
        skip, projection	= x, None
    x, relu2			= relu_forward( out + skip )
    return x, ( first, relu1, second, projection, relu2 )


def block_backward( dout, cache, grads ):
    first, relu1, second, projection, relu2 = cache
    dsum			= relu_backward( dout, relu2 )
    dx				= conv_bn_backward( relu_backward( conv_bn_backward( dsum, second, grads ), relu1 ),
                                            first, grads )
    dx			       += dsum if projection is None else conv_bn_backward( dsum, projection, grads )
    return dx


def conv_stack_forward( images, cfg, params, buffers, train=False ):
    """images: N x 1 x H x W.  Returns the per-layer FeatureMaps (each N x channels x h_i x w_i) and
    the cache for conv_stack_backward."""
    cfg				= conv_stack_config( cfg )
    images			= numpy.asarray( images )
    if images.ndim != 4 or images.shape[1:] != ( 1, cfg.input_h, cfg.input_w ):
        raise DimensionError( "Frontend expects N x 1 x %d x %d images, not %r" % (
            cfg.input_h, cfg.input_w, images.shape ))
    cache			= ConvStackCache( cfg )
    maps			= []
    x				= images
    for layer in conv_plan( cfg ):
        if layer.name == 'stem':
            x, layer_cache	= stem_forward( x, params, buffers, train, cfg )
        else:
            x, layer_cache	= block_forward( x, params, buffers, layer.name, layer.stride, train, cfg )
        cache.layers.append(( layer.name, layer_cache ))
        assert x.shape[2:] == ( layer.h, layer.w ), \
            "Layer %s produced %r, planned %r" % ( layer.name, x.shape[2:], ( layer.h, layer.w ))
        maps.append( x )
    return maps, cache


def conv_stack_backward( dmaps, cache ):
    """dmaps: per-layer upstream gradients (None where a layer's output is unused).  Returns the
    gradient wrt the images, and a name -> gradient mapping for every parameter."""
    if len( dmaps ) != len( cache.layers ):
        raise DimensionError( "%d layer gradients supplied for a %d layer stack" % (
            len( dmaps ), len( cache.layers )))
    grads			= collections.OrderedDict()
    carry			= None
    for dmap, ( name, layer_cache ) in reversed( list( zip( dmaps, cache.layers ))):
        dout			= carry if dmap is None else dmap if carry is None else dmap + carry
        assert dout is not None, "No gradient reaches the last frontend layer"
        backward		= stem_backward if name == 'stem' else block_backward
        carry			= backward( dout, layer_cache, grads )
    return carry, grads


def resize_matrix( n_in, n_out, dtype=numpy.float64 ):
    """The n_out x n_in corner-aligned linear interpolation operator along one axis."""
    if n_in < 1 or n_out < 1:
        raise DimensionError( "Cannot resize %d samples to %d" % ( n_in, n_out ))
    if n_in == n_out:
        return numpy.eye( n_in, dtype=dtype )
    r				= numpy.zeros(( n_out, n_in ), dtype=dtype )
    if n_in == 1:
        r[:, 0]			= 1
        return r
    pos				= numpy.arange( n_out ) * (( n_in - 1 ) / max( n_out - 1, 1 ))
    lo				= numpy.minimum( numpy.floor( pos ).astype( int ), n_in - 2 )
    frac			= pos - lo
    rows			= numpy.arange( n_out )
    r[rows, lo]			= 1 - frac
    r[rows, lo + 1]	       += frac
    return r


def bilinear_resize( x, out_h, out_w ):
    """Resizes the last two axes of x to out_h x out_w: Ry X Rxt."""
    x				= numpy.asarray( x )
    ry				= resize_matrix( x.shape[-2], out_h, x.dtype )
    rx				= resize_matrix( x.shape[-1], out_w, x.dtype )
    return ry @ x @ rx.T


def bilinear_resize_backward( grad, in_h, in_w ):
    """Distributes the gradient by the same weights: Ryt G Rx."""
    grad			= numpy.asarray( grad )
    ry				= resize_matrix( in_h, grad.shape[-2], grad.dtype )
    rx				= resize_matrix( in_w, grad.shape[-1], grad.dtype )
    return ry.T @ grad @ rx


def srcnet_size( sizes ):
    """The common size of the resized maps: the rounded (half to even) mean of each dimension."""
    sizes			= list( sizes )
    return ( max( 1, round( sum( h for h, _ in sizes ) / len( sizes ))),
             max( 1, round( sum( w for _, w in sizes ) / len( sizes ))))


def assemble_srcnet( maps, keep=defaults.srcnet_keep ):
    """Keeps the first 'keep' channels of every layer, resizes each to the common size, and stacks
    them into N x ( keep l ) x ( M_h M_w ) observation matrices."""
    if not maps:
        raise DimensionError( "SRCNet assembly requires at least one layer" )
    if keep > maps[0].shape[1]:
        raise DimensionError( "Cannot keep %d of %d channels" % ( keep, maps[0].shape[1] ))
    mh, mw			= srcnet_size( m.shape[2:] for m in maps )
    resized			= [ m[:, :keep] if m.shape[2:] == ( mh, mw )
                                    else bilinear_resize( m[:, :keep], mh, mw ) for m in maps ]
    stacked			= numpy.concatenate( resized, axis=1 )
    n				= stacked.shape[0]
    return stacked.reshape( n, stacked.shape[1], mh * mw ), ( [ m.shape for m in maps ], keep, mh, mw )


def assemble_srcnet_backward( grad, cache ):
    shapes, keep, mh, mw	= cache
    grad			= grad.reshape( grad.shape[0], len( shapes ) * keep, mh, mw )
    dmaps			= []
    for i, shape in enumerate( shapes ):
        part			= grad[:, i * keep:( i + 1 ) * keep]
        dmap			= numpy.zeros( shape, dtype=grad.dtype )
        dmap[:, :keep]		= part if shape[2:] == ( mh, mw ) else bilinear_resize_backward( part, *shape[2:] )
        dmaps.append( dmap )
    return dmaps


def assemble_rcnet( maps ):
    """The last layer, all channels: N x channels x ( h_l w_l ); (c, y, x) lands at column y w_l + x."""
    if not maps:
        raise DimensionError( "RCNet assembly requires the last layer" )
    last			= maps[-1]
    return last.reshape( last.shape[0], last.shape[1], -1 ), ( len( maps ), last.shape )


def assemble_rcnet_backward( grad, cache ):
    layers, shape		= cache
    return [ None ] * ( layers - 1 ) + [ grad.reshape( shape ) ]
