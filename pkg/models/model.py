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
spdgpr.models.model -- Complete classifiers, and their shared forward/backward contract

    SCNN	(3x3 conv, BN, ReLU, 3x3 max-pool) x n-1, 3x3 conv, BN, ReLU, FC
    RCNET	frontend, last layer's channels as observations, SPD head, FC
    SRCNET	frontend, first 'keep' channels of every layer resized to a common size, SPD head, FC
    RESNET	frontend, global average pooling, dropout, FC

The SPD head is CovPool, then ( BiMap, ReEig ) once per reduction in spd_dims, then LogEig, vectorize
and dropout.  Every model owns an ordered name -> parameter mapping (StiefelParam for the BiMap
weights, EuclideanParam for all else) ready for optim.StiefelSGD, and the batch-norm running
statistics as buffers.  forward keeps the cache that the following backward consumes; infer and
predict keep nothing, and may be used concurrently.

A numeric failure anywhere in a pass is re-raised as a LayerFailure naming the layer.
"""

__all__				= [ 'ModelConfig', 'model_config', 'model_config_plain', 'miniature',
                                    'Prediction', 'prediction', 'cross_entropy', 'LayerFailure', 'layer_guard',
                                    'Model', 'SpdModel', 'SCNN', 'RCNET', 'SRCNET', 'RESNET', 'MODELS', 'build_model' ]

import collections
import contextlib
import logging

import numpy
from scipy.special import softmax, log_softmax

from .. import defaults, misc
from ..dotdict import dotdict
from ..linalg import DimensionError, NumericError
from ..nn import layers as nn_layers
from ..nn import frontend
from ..optim import EuclideanParam, StiefelParam, stiefel_init
from ..spd import layers as spd_layers

log				= logging.getLogger( __package__ )


ModelConfig			= collections.namedtuple( 'ModelConfig', (
    'variant', 'num_classes', 'spd_dims', 'reeig_eps', 'logeig_floor', 'dropout_rate',
    'ridge', 'unbiased', 'scnn_channels', 'frontend' ))
ModelConfig.__new__.__defaults__ = (
    defaults.variant, defaults.num_classes, None, defaults.reeig_eps, defaults.logeig_floor,
    defaults.dropout_rate, defaults.ridge, defaults.unbiased, tuple( defaults.scnn_channels ), None )


def model_config( cfg=None ):
    """A validated ModelConfig from a (dot)dict of any subset of its fields; the frontend may be a
    dict of ConvStackConfig fields.  spd_dims default to the variant's published chain."""
    if isinstance( cfg, ModelConfig ):
        fields			= cfg._asdict()
    else:
        fields			= ( cfg.plain() if isinstance( cfg, dotdict ) else dict( cfg or {} ))
    unknown			= set( fields ) - set( ModelConfig._fields )
    if unknown:
        raise ValueError( "Unknown model configuration %s" % ", ".join( sorted( unknown )))
    result			= ModelConfig( **fields )
    if result.variant not in defaults.variants:
        raise ValueError( "Unknown model variant %r; one of %s" % ( result.variant, ", ".join( defaults.variants )))
    front			= result.frontend
    front			= frontend.conv_stack_config( front._asdict() if hasattr( front, '_asdict' ) else front )
    dims			= result.spd_dims
    if dims is None and result.variant in defaults.spd_dims:
        dims			= defaults.spd_dims[result.variant]
    result			= result._replace(
        frontend=front, spd_dims=tuple( int( d ) for d in dims ) if dims is not None else None,
        scnn_channels=tuple( int( c ) for c in result.scnn_channels ))

    if not ( isinstance( result.num_classes, int ) and result.num_classes >= 2 ):
        raise ValueError( "A classifier needs at least 2 classes, not %r" % ( result.num_classes, ))
    if not 0 <= result.dropout_rate < 1:
        raise ValueError( "Dropout rate must be in [0,1), not %r" % ( result.dropout_rate, ))
    if not result.reeig_eps > 0:
        raise ValueError( "ReEig threshold must be positive, not %r" % ( result.reeig_eps, ))
    if result.variant == 'SCNN' and ( not result.scnn_channels or min( result.scnn_channels ) < 1 ):
        raise ValueError( "S-CNN channels must be positive, not %r" % ( result.scnn_channels, ))
    if result.variant in ( 'RCNET', 'SRCNET' ):
        if len( dims ) < 2 or any( a <= b for a, b in zip( dims, dims[1:] )) or dims[-1] < 1:
            raise ValueError( "SPD dimensions must be strictly decreasing and positive, not %r" % ( dims, ))
        features		= front.channels if result.variant == 'RCNET' else front.srcnet_keep * front.num_layers
        if dims[0] != features:
            raise ValueError( "%s assembles %d features, but spd_dims begin at %d" % (
                result.variant, features, dims[0] ))
    return result


def model_config_plain( cfg ):
    """A JSON-ready dict of a ModelConfig."""
    plain			= dict( cfg._asdict() )
    plain['frontend']		= dict( cfg.frontend._asdict() )
    plain['spd_dims']		= list( cfg.spd_dims ) if cfg.spd_dims is not None else None
    plain['scnn_channels']	= list( cfg.scnn_channels )
    return plain


def miniature( variant ):
    """Small configurations of every variant on 16 x 12 inputs, for gradient checks."""
    tiny			= dict( input_h=16, input_w=12 )
    if variant == 'SCNN':
        return model_config( dict( variant=variant, scnn_channels=( 2, 3, 4 ), frontend=tiny ))
    if variant == 'RCNET':
        return model_config( dict( variant=variant, spd_dims=( 8, 6, 4 ),
                                   frontend=dict( tiny, num_layers=2, channels=8, srcnet_keep=4 )))
    if variant == 'SRCNET':
        return model_config( dict( variant=variant, spd_dims=( 8, 6, 4 ),
                                   frontend=dict( tiny, num_layers=2, channels=4, srcnet_keep=4 )))
    if variant == 'RESNET':
        return model_config( dict( variant=variant, frontend=dict( tiny, num_layers=2, channels=4, srcnet_keep=4 )))
    raise ValueError( "Unknown model variant %r" % ( variant, ))


Prediction			= collections.namedtuple( 'Prediction', ( 'logits', 'probabilities' ))


def prediction( logits ):
    return Prediction( logits, softmax( logits, axis=-1 ))


def cross_entropy( pred, labels ):
    """Mean of -log p_label over the batch, and its gradient wrt the logits: ( p - onehot ) / N."""
    logits			= numpy.atleast_2d( getattr( pred, 'logits', pred ))
    labels			= numpy.atleast_1d( numpy.asarray( labels ))
    n, k			= logits.shape
    if labels.shape != ( n, ) or not numpy.issubdtype( labels.dtype, numpy.integer ):
        raise ValueError( "Expected %d integer labels, not %r" % ( n, labels ))
    if numpy.any( labels < 0 ) or numpy.any( labels >= k ):
        raise ValueError( "Labels must be class indices in [0,%d), not %r" % ( k, labels ))
    rows			= numpy.arange( n )
    logp			= log_softmax( logits, axis=1 )
    loss			= -float( numpy.mean( logp[rows, labels] ))
    dlogits			= numpy.exp( logp )
    dlogits[rows, labels]      -= 1
    return loss, dlogits / n


class LayerFailure( NumericError ):
    """A numeric failure inside a named layer of a model's forward or backward pass."""
    def __init__( self, message, layer=None ):
        super( LayerFailure, self ).__init__( message )
        self.layer		= layer


@contextlib.contextmanager
def layer_guard( layer ):
    try:
        yield
    except LayerFailure:
        raise
    except ( ArithmeticError, numpy.linalg.LinAlgError ) as exc:
        raise LayerFailure( "Layer %s failed: %s" % ( layer, exc ), layer=layer ) from exc


def spd_head_forward( features, weights, cfg ):
    """features: N x d0 x M.  Returns the N x L vectorized LogEig outputs, and the per-sample caches."""
    vectors, samples		= [], []
    for t in features:
        with layer_guard( 'covpool' ):
            x			= spd_layers.covpool_forward( t, cfg.ridge, cfg.unbiased )
        pairs			= []
        for i, w in enumerate( weights, 1 ):
            with layer_guard( 'bimap%d' % i ):
                y		= spd_layers.bimap_forward( x, w )
            with layer_guard( 'reeig%d' % i ):
                z		= spd_layers.reeig_forward( y, cfg.reeig_eps )
            pairs.append(( x, y ))
            x			= z
        with layer_guard( 'logeig' ):
            vectors.append( spd_layers.spd_vectorize( spd_layers.logeig_forward( x, cfg.logeig_floor )))
        samples.append(( t, pairs, x ))
    return numpy.stack( vectors ), samples


def spd_head_backward( dvectors, samples, weights, cfg ):
    """Returns dL/dfeatures, and dL/dW for each BiMap weight (summed over the batch)."""
    dfeatures			= []
    dweights			= [ numpy.zeros_like( w ) for w in weights ]
    for dv, ( t, pairs, x ) in zip( dvectors, samples ):
        with layer_guard( 'vectorize' ):
            g			= spd_layers.spd_vectorize_backward( dv, x.dim ).wrt_input
        with layer_guard( 'logeig' ):
            g			= spd_layers.logeig_backward( x, g, cfg.logeig_floor ).wrt_input
        for i in reversed( range( len( pairs ))):
            xin, y		= pairs[i]
            with layer_guard( 'reeig%d' % ( i + 1 )):
                g		= spd_layers.reeig_backward( y, cfg.reeig_eps, g ).wrt_input
            with layer_guard( 'bimap%d' % ( i + 1 )):
                grad		= spd_layers.bimap_backward( xin, weights[i], g )
            dweights[i]	       += grad.wrt_params
            g			= grad.wrt_input
        with layer_guard( 'covpool' ):
            dfeatures.append( spd_layers.covpool_backward( t, g, cfg.ridge, cfg.unbiased ).wrt_input )
    return numpy.stack( dfeatures ), dweights


class Model( object ):
    """The forward/backward contract shared by every variant.  Subclasses implement build( rng ),
    logits( images, train, rng ) -> ( logits, cache ) and gradients( dlogits, cache ) -> grads."""
    variant			= None

    def __init__( self, cfg=None, seed=0, precision=defaults.precision ):
        cfg			= model_config( cfg if cfg is not None else { 'variant': self.variant } )
        assert cfg.variant == self.variant, \
            "A %s model cannot be built from a %s configuration" % ( self.variant, cfg.variant )
        self.cfg		= cfg
        self.seed		= seed
        self.precision		= precision
        self.dtype		= numpy.dtype( precision )
        self.params		= collections.OrderedDict()
        self.buffers		= collections.OrderedDict()
        self._cache		= None
        self.build( numpy.random.default_rng( seed ))
        log.detail( "Built %s (seed %s, %s): %d parameters in %d tensors", self.variant, seed, precision,
                    sum( p.values.size for p in self.params.values() ), len( self.params ))

    def __repr__( self ):
        return "<%s %s seed %s>" % ( self.variant, self.precision, self.seed )

    def add( self, name, values, stiefel=False ):
        assert name not in self.params, "Duplicate parameter %s" % name
        if isinstance( values, EuclideanParam ):
            self.params[name]	= values
        else:
            self.params[name]	= ( StiefelParam if stiefel else EuclideanParam )( values )

    def add_fc( self, rng, features ):
        """Seeded uniform weights and bias in +/- 1/sqrt( fan_in )."""
        k			= self.cfg.num_classes
        self.add( 'fc.w', nn_layers.uniform_fan_in( rng, ( k, features ), self.dtype ))
        bound			= 1 / numpy.sqrt( features )
        self.add( 'fc.b', rng.uniform( -bound, bound, size=k ).astype( self.dtype ))

    def values( self ):
        return collections.OrderedDict( ( name, p.values ) for name, p in self.params.items() )

    def images( self, images ):
        """N x 1 x H x W (or N x H x W) images, in the model's precision."""
        images			= numpy.asarray( images, dtype=self.dtype )
        if images.ndim == 3:
            images		= images[:, None]
        front			= self.cfg.frontend
        if images.ndim != 4 or images.shape[1:] != ( 1, front.input_h, front.input_w ):
            raise DimensionError( "%s expects N x 1 x %d x %d images, not %r" % (
                self.variant, front.input_h, front.input_w, images.shape ))
        return images

    def infer( self, images, train=False, rng=None ):
        """A Prediction for a batch of images, keeping no cache."""
        if train and rng is None and self.cfg.dropout_rate > 0:
            raise ValueError( "A training forward pass needs an rng for dropout" )
        logits, _		= self.logits( self.images( images ), train, rng )
        return prediction( logits )

    def forward( self, images, train=False, rng=None ):
        """A Prediction for a batch of images; the cache is kept for backward."""
        if train and rng is None and self.cfg.dropout_rate > 0:
            raise ValueError( "A training forward pass needs an rng for dropout" )
        logits, self._cache	= self.logits( self.images( images ), train, rng )
        return prediction( logits )

    def backward( self, dlogits ):
        """Gradients of every parameter, given dL/dlogits of the preceding forward."""
        if self._cache is None:
            raise RuntimeError( "%s backward requires a preceding forward" % self.variant )
        dlogits			= numpy.asarray( dlogits, dtype=self.dtype )
        grads			= self.gradients( dlogits, self._cache )
        assert list( grads ) == list( self.params ), \
            "Gradients %s do not match parameters %s" % ( list( grads ), list( self.params ))
        return grads

    def loss_and_grads( self, images, labels, rng=None, train=True ):
        """Mean cross-entropy of the batch, the gradients averaged over it, and the Prediction."""
        pred			= self.forward( images, train=train, rng=rng )
        loss, dlogits		= cross_entropy( pred, labels )
        return loss, self.backward( dlogits ), pred

    def predict( self, images ):
        return numpy.argmax( self.infer( images ).probabilities, axis=1 )

    def ordered( self, grads ):
        return collections.OrderedDict( ( name, grads[name] ) for name in self.params )

    def state( self ):
        """Every parameter and buffer, by name (the checkpoint's records)."""
        state			= self.values()
        state.update( self.buffers )
        return state

    def load_state( self, state ):
        """Replace parameters and buffers by name; names and shapes must match exactly."""
        expected		= list( self.params ) + list( self.buffers )
        if sorted( state ) != sorted( expected ):
            raise KeyError( "State does not match the %s model; missing: %s, extra: %s" % (
                self.variant, ", ".join( n for n in expected if n not in state ) or "none",
                ", ".join( n for n in state if n not in expected ) or "none" ))
        for name, values in state.items():
            target		= self.params[name].values if name in self.params else self.buffers[name]
            values		= numpy.asarray( values, dtype=self.dtype )
            if values.shape != target.shape:
                raise DimensionError( "State %s is %r, not %r" % ( name, values.shape, target.shape ))
            if name in self.params:
                self.params[name].values = values.copy()
            else:
                self.buffers[name] = values.copy()
        self._cache		= None
        return self


class SCNN( Model ):
    """The shallow first-order baseline."""
    variant			= 'SCNN'

    def build( self, rng ):
        c_in			= 1
        h, w			= self.cfg.frontend.input_h, self.cfg.frontend.input_w
        channels		= self.cfg.scnn_channels
        for i, ch in enumerate( channels, 1 ):
            self.add( 'conv%d.w' % i, nn_layers.kaiming_normal( rng, ( ch, c_in, 3, 3 ), self.dtype ))
            self.add( 'conv%d.b' % i, numpy.zeros( ch, dtype=self.dtype ))
            self.add( 'bn%d.gamma' % i, numpy.ones( ch, dtype=self.dtype ))
            self.add( 'bn%d.beta' % i, numpy.zeros( ch, dtype=self.dtype ))
            self.buffers['bn%d.mean' % i] = numpy.zeros( ch, dtype=self.dtype )
            self.buffers['bn%d.var' % i] = numpy.ones( ch, dtype=self.dtype )
            if i < len( channels ):
                h, w		= nn_layers.conv_output_size( h, 3, 3 ), nn_layers.conv_output_size( w, 3, 3 )
            c_in		= ch
        self.features		= c_in * h * w
        self.add_fc( rng, self.features )

    def logits( self, images, train, rng ):
        v			= self.values()
        front			= self.cfg.frontend
        x			= images
        caches			= []
        last			= len( self.cfg.scnn_channels )
        for i in range( 1, last + 1 ):
            with layer_guard( 'conv%d' % i ):
                out, conv	= nn_layers.conv2d_forward( x, v['conv%d.w' % i], v['conv%d.b' % i], 1, 1 )
                out, bn, running = nn_layers.batchnorm2d_forward(
                    out, v['bn%d.gamma' % i], v['bn%d.beta' % i],
                    self.buffers['bn%d.mean' % i], self.buffers['bn%d.var' % i], train,
                    momentum=front.bn_momentum, eps=front.bn_eps )
                if train:
                    self.buffers['bn%d.mean' % i], self.buffers['bn%d.var' % i] = running
                x, relu		= nn_layers.relu_forward( out )
                pool		= None
                if i < last:
                    x, pool	= nn_layers.maxpool2d_forward( x, 3 )
            caches.append(( conv, bn, relu, pool ))
        assert x[0].size == self.features, "S-CNN produced %d features, planned %d" % ( x[0].size, self.features )
        with layer_guard( 'fc' ):
            logits, fc		= nn_layers.affine_forward( x.reshape( x.shape[0], -1 ), v['fc.w'], v['fc.b'] )
        return logits, ( caches, x.shape, fc )

    def gradients( self, dlogits, cache ):
        caches, shape, fc	= cache
        grads			= {}
        with layer_guard( 'fc' ):
            dx, grads['fc.w'], grads['fc.b'] = nn_layers.affine_backward( dlogits, fc )
        dx			= dx.reshape( shape )
        for i in reversed( range( 1, len( caches ) + 1 )):
            conv, bn, relu, pool = caches[i - 1]
            with layer_guard( 'conv%d' % i ):
                if pool is not None:
                    dx		= nn_layers.maxpool2d_backward( dx, pool )
                dx		= nn_layers.relu_backward( dx, relu )
                dx, grads['bn%d.gamma' % i], grads['bn%d.beta' % i] = nn_layers.batchnorm2d_backward( dx, bn )
                dx, grads['conv%d.w' % i], grads['conv%d.b' % i] = nn_layers.conv2d_backward( dx, conv )
        return self.ordered( grads )


class FrontendModel( Model ):
    """A model on the convolutional frontend; its parameters come first, in stack order."""
    def build_frontend( self, rng ):
        params, buffers		= frontend.conv_stack_init( self.cfg.frontend, rng, self.dtype )
        for name, values in params.items():
            self.add( name, values )
        self.buffers.update( buffers )

    def frontend_forward( self, images, train ):
        with layer_guard( 'frontend' ):
            return frontend.conv_stack_forward( images, self.cfg.frontend, self.values(), self.buffers, train )

    def frontend_backward( self, dmaps, cache, grads ):
        with layer_guard( 'frontend' ):
            _, front		= frontend.conv_stack_backward( dmaps, cache )
        grads.update( front )


class SpdModel( FrontendModel ):
    """The second-order models: frontend features, assembled into observation matrices, through the
    SPD head."""
    def build( self, rng ):
        self.build_frontend( rng )
        dims			= self.cfg.spd_dims
        for i in range( len( dims ) - 1 ):
            self.add( 'bimap%d' % ( i + 1 ), stiefel_init( dims[i + 1], dims[i], rng, self.dtype ))
        self.add_fc( rng, spd_layers.vectorized_length( dims[-1] ))
        chain			= self.shape_chain()
        assert chain == list( dims ), "BiMap chain %r does not match %r" % ( chain, dims )

    def bimaps( self ):
        return [ name for name in self.params if name.startswith( 'bimap' ) ]

    def shape_chain( self ):
        """The SPD dimensions through the head, as given by the BiMap weights."""
        weights			= [ self.params[name] for name in self.bimaps() ]
        return [ weights[0].cols ] + [ w.rows for w in weights ]

    def logits( self, images, train, rng ):
        v			= self.values()
        maps, front		= self.frontend_forward( images, train )
        features, assembly	= self.assemble( maps )
        if features.shape[1] != self.cfg.spd_dims[0]:
            raise DimensionError( "%s assembled %d features; the SPD head expects %d" % (
                self.variant, features.shape[1], self.cfg.spd_dims[0] ))
        weights			= [ v[name] for name in self.bimaps() ]
        vectors, head		= spd_head_forward( features, weights, self.cfg )
        dropped, drop		= nn_layers.dropout_forward( vectors, self.cfg.dropout_rate, train, rng )
        with layer_guard( 'fc' ):
            logits, fc		= nn_layers.affine_forward( dropped, v['fc.w'], v['fc.b'] )
        log.trace( misc.lazystr( lambda: "%s dims %s, features %r" % (
            self.variant, self.head_dims( head ), features.shape )))
        return logits, ( front, assembly, head, weights, drop, fc )

    @staticmethod
    def head_dims( head ):
        """The SPD dimensions actually traversed by the first sample of a forward pass."""
        _, pairs, last		= head[0]
        return [ pairs[0][0].dim ] + [ y.dim for _, y in pairs ] if pairs else [ last.dim ]

    def gradients( self, dlogits, cache ):
        front, assembly, head, weights, drop, fc = cache
        grads			= {}
        with layer_guard( 'fc' ):
            dx, grads['fc.w'], grads['fc.b'] = nn_layers.affine_backward( dlogits, fc )
        dx			= nn_layers.dropout_backward( dx, drop )
        dfeatures, dweights	= spd_head_backward( dx, head, weights, self.cfg )
        for name, dw in zip( self.bimaps(), dweights ):
            grads[name]		= dw
        self.frontend_backward( self.disassemble( dfeatures, assembly ), front, grads )
        return self.ordered( grads )


class RCNET( SpdModel ):
    variant			= 'RCNET'

    def assemble( self, maps ):
        return frontend.assemble_rcnet( maps )

    def disassemble( self, grad, cache ):
        return frontend.assemble_rcnet_backward( grad, cache )


class SRCNET( SpdModel ):
    variant			= 'SRCNET'

    def assemble( self, maps ):
        return frontend.assemble_srcnet( maps, self.cfg.frontend.srcnet_keep )

    def disassemble( self, grad, cache ):
        return frontend.assemble_srcnet_backward( grad, cache )


class RESNET( FrontendModel ):
    """The first-order model on the same frontend: global average pooling, dropout and FC."""
    variant			= 'RESNET'

    def build( self, rng ):
        self.build_frontend( rng )
        self.add_fc( rng, self.cfg.frontend.channels )

    def logits( self, images, train, rng ):
        v			= self.values()
        maps, front		= self.frontend_forward( images, train )
        pooled, gap		= nn_layers.global_avgpool_forward( maps[-1] )
        dropped, drop		= nn_layers.dropout_forward( pooled, self.cfg.dropout_rate, train, rng )
        with layer_guard( 'fc' ):
            logits, fc		= nn_layers.affine_forward( dropped, v['fc.w'], v['fc.b'] )
        return logits, ( front, len( maps ), gap, drop, fc )

    def gradients( self, dlogits, cache ):
        front, layers, gap, drop, fc = cache
        grads			= {}
        with layer_guard( 'fc' ):
            dx, grads['fc.w'], grads['fc.b'] = nn_layers.affine_backward( dlogits, fc )
        dlast			= nn_layers.global_avgpool_backward( nn_layers.dropout_backward( dx, drop ), gap )
        self.frontend_backward( [ None ] * ( layers - 1 ) + [ dlast ], front, grads )
        return self.ordered( grads )


MODELS				= collections.OrderedDict( ( m.variant, m ) for m in ( SCNN, RCNET, SRCNET, RESNET ))


def build_model( cfg=None, seed=0, precision=defaults.precision ):
    """The model of the configured variant, seeded."""
    cfg				= model_config( cfg )
    return MODELS[cfg.variant]( cfg, seed=seed, precision=precision )
