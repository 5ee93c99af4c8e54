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
spdgpr.harness.gradcheck -- Finite-difference checks of every backward pass

Each layer suite draws a random input and a random upstream gradient G, and compares the layer's
analytic input (and parameter) gradients of the scalar <G, forward( x )> with central differences.
Symmetric matrix inputs are perturbed symmetrically.  Spectra are drawn with eigengaps of at least
EIGENGAP, and ReEig thresholds kept as far from any eigenvalue, so no perturbation crosses a
degeneracy or a clamping kink.

The model suites build the miniature configuration of each variant, and compare the cross-entropy
gradients of a batch (in training mode, with a fixed dropout mask) at 'trials' sampled entries of
every parameter; being deeper, they are allowed MODEL_FACTOR times the tolerance.

Everything runs in float64.  The analytic passes run in checked mode; the finite differences do not,
as they move BiMap weights off the Stiefel manifold.
"""

__all__				= [ 'GradcheckResult', 'SUITES', 'LAYER_SUITES', 'MODEL_SUITES', 'gradcheck',
                                    'report', 'numeric_grad', 'numeric_sym_grad' ]

import collections
import logging

import numpy

from .. import misc
from ..linalg import set_checked, sym_part
from ..spd import layers as spd_layers
from ..nn import layers as nn_layers
from ..nn import frontend
from ..models import build_model, miniature, cross_entropy

log				= logging.getLogger( __package__ )

SMOOTH_STEP			= 1.0e-5
RELU_STEP			= 1.0e-6
EIGENGAP			= 1.0e-2
MODEL_FACTOR			= 10

GradcheckResult			= collections.namedtuple( 'GradcheckResult', (
    'suite', 'trials', 'worst', 'tolerance', 'passed' ))


def numeric_grad( f, x, h ):
    """Central-difference gradient of scalar f() with respect to every entry of x (perturbed in place)."""
    g				= numpy.zeros( x.shape )
    for idx in numpy.ndindex( *x.shape ):
        saved			= x[idx]
        x[idx]			= saved + h
        plus			= f()
        x[idx]			= saved - h
        minus			= f()
        x[idx]			= saved
        g[idx]			= ( plus - minus ) / ( 2 * h )
    return g


def numeric_sym_grad( f, x, h ):
    """The symmetric gradient of scalar f( x ) at symmetric x, from symmetric perturbations."""
    d				= x.shape[0]
    g				= numpy.zeros(( d, d ))
    for i in range( d ):
        for j in range( i, d ):
            e			= numpy.zeros(( d, d ))
            e[i, j]		= e[j, i] = h
            slope		= ( f( x + e ) - f( x - e )) / ( 2 * h )
            g[i, j]		= g[j, i] = slope if i == j else slope / 2
    return g


def analytic( function, *args ):
    """Calls function in checked mode."""
    previous			= set_checked( True )
    try:
        return function( *args )
    finally:
        set_checked( previous )


def stiefel( rng, rows, cols ):
    q, r			= numpy.linalg.qr( rng.standard_normal(( cols, cols )))
    return ( q * numpy.sign( numpy.diag( r )))[:rows]


def spectrum( rng, d, low=0.5 ):
    """Ascending eigenvalues from low, each at least 5 EIGENGAP above the last."""
    return low + numpy.cumsum( 5 * EIGENGAP + rng.random( d ))


def spd_matrix( rng, values ):
    q				= stiefel( rng, len( values ), len( values ))
    return sym_part(( q.T * values ) @ q )


def inner( g, out ):
    return float( numpy.vdot( g, out ))


def worst( *pairs ):
    return max( misc.relative_error( a, n ) for a, n in pairs )


#
# Layer suites -- suite( rng, h ) -> worst relative error of one random trial
#
def covpool_suite( rng, h ):
    t				= rng.standard_normal(( 4, 9 ))
    g				= rng.standard_normal(( 4, 4 ))
    grad			= analytic( spd_layers.covpool_backward, t, g ).wrt_input
    return worst(( grad, numeric_grad( lambda: inner( g, spd_layers.covpool_forward( t ).values ), t, h )))


def bimap_suite( rng, h ):
    x				= spd_matrix( rng, spectrum( rng, 6 ))
    w				= stiefel( rng, 4, 6 )
    g				= rng.standard_normal(( 4, 4 ))
    grad			= analytic( spd_layers.bimap_backward, x, w, g )
    return worst(
        ( grad.wrt_input, numeric_sym_grad( lambda v: inner( g, spd_layers.bimap_forward( v, w ).values ), x, h )),
        ( grad.wrt_params, numeric_grad( lambda: inner( g, spd_layers.bimap_forward( x, w ).values ), w, h )))


def reeig_suite( rng, h ):
    values			= spectrum( rng, 6, low=0.1 )
    eps				= float( values[2] + values[3] ) / 2	# clamps the 3 smallest
    x				= spd_matrix( rng, values )
    g				= rng.standard_normal(( 6, 6 ))
    grad			= analytic( spd_layers.reeig_backward, x, eps, g ).wrt_input
    return worst(( grad, numeric_sym_grad( lambda v: inner( g, spd_layers.reeig_forward( v, eps ).values ), x, h )))


def logeig_suite( rng, h ):
    x				= spd_matrix( rng, spectrum( rng, 6 ))
    g				= rng.standard_normal(( 6, 6 ))
    grad			= analytic( spd_layers.logeig_backward, x, g ).wrt_input
    return worst(( grad, numeric_sym_grad( lambda v: inner( g, spd_layers.logeig_forward( v )), x, h )))


def vectorize_suite( rng, h ):
    x				= sym_part( rng.standard_normal(( 5, 5 )))
    g				= rng.standard_normal( spd_layers.vectorized_length( 5 ))
    grad			= analytic( spd_layers.spd_vectorize_backward, g, 5 ).wrt_input
    return worst(( grad, numeric_sym_grad( lambda v: inner( g, spd_layers.spd_vectorize( v )), x, h )))


def resize_suite( rng, h ):
    x				= rng.standard_normal(( 2, 3, 5, 4 ))
    g				= rng.standard_normal(( 2, 3, 7, 3 ))
    grad			= analytic( frontend.bilinear_resize_backward, g, 5, 4 )
    return worst(( grad, numeric_grad( lambda: inner( g, frontend.bilinear_resize( x, 7, 3 )), x, h )))


def conv_suite( rng, h ):
    x				= rng.standard_normal(( 2, 3, 7, 6 ))
    w				= rng.standard_normal(( 4, 3, 3, 3 ))
    b				= rng.standard_normal( 4 )
    out, cache			= nn_layers.conv2d_forward( x, w, b, stride=2, pad=1 )
    g				= rng.standard_normal( out.shape )
    dx, dw, db			= analytic( nn_layers.conv2d_backward, g, cache )

    def f():
        return inner( g, nn_layers.conv2d_forward( x, w, b, stride=2, pad=1 )[0] )
    return worst(( dx, numeric_grad( f, x, h )), ( dw, numeric_grad( f, w, h )), ( db, numeric_grad( f, b, h )))


# 10 x 8 input: a 3x3/2 stem to 5 x 4, an identity block, then a strided (projected) block to 3 x 2
SUITE_STACK			= frontend.conv_stack_config( dict(
    num_layers=3, channels=3, srcnet_keep=1, input_h=10, input_w=8, stem_kernel=3, transition_layer=3 ))


def frontend_worst( rng, h, forward, backward, x, params ):
    """Compares the input and every parameter gradient of one frontend layer, in training mode."""
    out, cache			= forward()
    g				= rng.standard_normal( out.shape )
    grads			= collections.OrderedDict()
    dx				= analytic( backward, g, cache, grads )

    def f():
        return inner( g, forward()[0] )
    return worst(( dx, numeric_grad( f, x, h )), *[ ( grad, numeric_grad( f, params[name], h ))
                                                    for name, grad in grads.items() ])


def stem_suite( rng, h ):
    params, buffers		= frontend.conv_stack_init( SUITE_STACK, rng )
    x				= rng.standard_normal(( 2, 1, SUITE_STACK.input_h, SUITE_STACK.input_w ))
    return frontend_worst( rng, h, lambda: frontend.stem_forward( x, params, buffers, True, SUITE_STACK ),
                           frontend.stem_backward, x, params )


def block_suite( rng, h ):
    params, buffers		= frontend.conv_stack_init( SUITE_STACK, rng )
    plan			= frontend.conv_plan( SUITE_STACK )
    errors			= []
    for layer, previous in zip( plan[1:], plan ):
        x			= rng.standard_normal(( 2, SUITE_STACK.channels, previous.h, previous.w ))

        def forward( x=x, layer=layer ):
            return frontend.block_forward( x, params, buffers, layer.name, layer.stride, True, SUITE_STACK )
        errors.append( frontend_worst( rng, h, forward, frontend.block_backward, x, params ))
    return max( errors )


def batchnorm_suite( rng, h ):
    x				= rng.standard_normal(( 3, 2, 4, 3 )) * 2 + 1
    gamma, beta			= rng.standard_normal( 2 ), rng.standard_normal( 2 )
    mean, var			= numpy.zeros( 2 ), numpy.ones( 2 )

    def forward():
        return nn_layers.batchnorm2d_forward( x, gamma, beta, mean, var, train=True )
    out, cache, _		= forward()
    g				= rng.standard_normal( out.shape )
    dx, dgamma, dbeta		= analytic( nn_layers.batchnorm2d_backward, g, cache )

    def f():
        return inner( g, forward()[0] )
    return worst(( dx, numeric_grad( f, x, h )), ( dgamma, numeric_grad( f, gamma, h )),
                 ( dbeta, numeric_grad( f, beta, h )))


def maxpool_suite( rng, h ):
    x				= rng.standard_normal(( 2, 2, 7, 8 ))
    out, cache			= nn_layers.maxpool2d_forward( x, 3 )
    g				= rng.standard_normal( out.shape )
    grad			= analytic( nn_layers.maxpool2d_backward, g, cache )
    return worst(( grad, numeric_grad( lambda: inner( g, nn_layers.maxpool2d_forward( x, 3 )[0] ), x, h )))


def fc_suite( rng, h ):
    x				= rng.standard_normal(( 3, 7 ))
    w, b			= rng.standard_normal(( 4, 7 )), rng.standard_normal( 4 )
    out, cache			= nn_layers.affine_forward( x, w, b )
    g				= rng.standard_normal( out.shape )
    dx, dw, db			= analytic( nn_layers.affine_backward, g, cache )

    def f():
        return inner( g, nn_layers.affine_forward( x, w, b )[0] )
    return worst(( dx, numeric_grad( f, x, h )), ( dw, numeric_grad( f, w, h )), ( db, numeric_grad( f, b, h )))


def dropout_suite( rng, h ):
    x				= rng.standard_normal(( 3, 10 ))
    seed			= int( rng.integers( 2**62 ))

    def forward():
        return nn_layers.dropout_forward( x, 0.5, True, numpy.random.default_rng( seed ))
    out, mask			= forward()
    g				= rng.standard_normal( out.shape )
    grad			= analytic( nn_layers.dropout_backward, g, mask )
    return worst(( grad, numeric_grad( lambda: inner( g, forward()[0] ), x, h )))


LAYER_SUITES			= collections.OrderedDict([
    ( 'covpool',	( covpool_suite,	SMOOTH_STEP )),
    ( 'bimap',		( bimap_suite,		SMOOTH_STEP )),
    ( 'reeig',		( reeig_suite,		SMOOTH_STEP )),
    ( 'logeig',		( logeig_suite,		SMOOTH_STEP )),
    ( 'vectorize',	( vectorize_suite,	SMOOTH_STEP )),
    ( 'resize',		( resize_suite,		SMOOTH_STEP )),
    ( 'conv',		( conv_suite,		RELU_STEP )),
    ( 'stem',		( stem_suite,		RELU_STEP )),
    ( 'block',		( block_suite,		RELU_STEP )),
    ( 'batchnorm',	( batchnorm_suite,	RELU_STEP )),
    ( 'maxpool',	( maxpool_suite,	RELU_STEP )),
    ( 'fc',		( fc_suite,		RELU_STEP )),
    ( 'dropout',	( dropout_suite,	RELU_STEP )),
])

MODEL_SUITES			= collections.OrderedDict([
    ( 'scnn',		'SCNN' ),
    ( 'rcnet',		'RCNET' ),
    ( 'srcnet',		'SRCNET' ),
    ( 'resnet',		'RESNET' ),
])

SUITES				= list( LAYER_SUITES ) + list( MODEL_SUITES )


def model_suite( variant, samples, seed, h=RELU_STEP ):
    """Worst relative error over up to 'samples' seeded entries of each parameter of a miniature
    model; parameters whose analytic and numeric gradients are both (near) zero count as exact."""
    rng				= numpy.random.default_rng([ seed, 1 ])
    cfg				= miniature( variant )
    model			= build_model( cfg, seed=seed, precision='float64' )
    images			= rng.random(( 2, 1, cfg.frontend.input_h, cfg.frontend.input_w ))
    labels			= rng.integers( cfg.num_classes, size=2 )

    def loss():
        return cross_entropy( model.infer( images, train=True, rng=numpy.random.default_rng( seed )), labels )[0]

    _, grads, _			= analytic( model.loss_and_grads, images, labels, numpy.random.default_rng( seed ))
    errors			= {}
    for name, param in model.params.items():
        x			= param.values
        chosen			= rng.choice( x.size, size=min( samples, x.size ), replace=False )
        pairs			= []
        for k in chosen:
            idx			= numpy.unravel_index( k, x.shape )
            saved		= x[idx]
            x[idx]		= saved + h
            plus		= loss()
            x[idx]		= saved - h
            minus		= loss()
            x[idx]		= saved
            pairs.append(( grads[name][idx], ( plus - minus ) / ( 2 * h )))
        a, n			= numpy.array( pairs ).T
        errors[name]		= 0.0 if numpy.abs( a - n ).max() < 1e-9 else misc.relative_error( a, n )
        log.trace( "%s %s: relative error %.3e", variant, name, errors[name] )
    return max( errors.values() )


def selected( selector ):
    if selector in ( None, 'all' ):
        return SUITES
    if selector == 'layer':
        return list( LAYER_SUITES )
    if selector == 'model':
        return list( MODEL_SUITES )
    names			= [ s.strip().lower() for s in selector.split( ',' ) ]
    unknown			= [ s for s in names if s not in SUITES ]
    if unknown:
        raise ValueError( "Unknown gradcheck suite %s; one of layer, model, %s" % (
            ", ".join( unknown ), ", ".join( SUITES )))
    return names


def gradcheck( selector=None, trials=20, tol=1.0e-5, seed=0 ):
    """Runs the selected suites (all, 'layer', 'model', or a comma-separated list of suite names);
    returns a GradcheckResult for each."""
    results			= []
    for name in selected( selector ):
        if name in LAYER_SUITES:
            suite, h		= LAYER_SUITES[name]
            error		= max( suite( numpy.random.default_rng([ seed, trial ]), h ) for trial in range( trials ))
            tolerance		= tol
        else:
            error		= model_suite( MODEL_SUITES[name], trials, seed )
            tolerance		= MODEL_FACTOR * tol
        result			= GradcheckResult( name, trials, error, tolerance, bool( error < tolerance ))
        ( log.normal if result.passed else log.warning )(
            "Gradcheck %-10s worst relative error %.3e (tolerance %.0e): %s", name, error, tolerance,
            "pass" if result.passed else "FAIL" )
        results.append( result )
    return results


def report( results ):
    """A plain text table of the results, worst error per suite."""
    lines			= [ "%-10s %6s %12s %10s  %s" % ( 'suite', 'trials', 'worst', 'tolerance', 'result' ) ]
    for r in results:
        lines.append( "%-10s %6d %12.3e %10.0e  %s" % (
            r.suite, r.trials, r.worst, r.tolerance, "pass" if r.passed else "FAIL" ))
    return "\n".join( lines )
