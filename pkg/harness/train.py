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
spdgpr.harness.train -- Training with validation-based model selection, and evaluation

Each epoch visits the training samples in a seeded order, in batches of optim.batch_size; every
batch's averaged gradients take one StiefelSGD step.  After each epoch the validation accuracy is
measured, and the parameters of the best epoch (the earliest, among ties) are kept; training stops
after 'patience' epochs without improvement.  The test accuracy reported is that of the kept model.

A non-finite loss or gradient aborts the run with TrainingDiverged, naming the epoch, the batch and
(when it can be found by replaying the batch in checked mode) the layer.
"""

__all__				= [ 'TrainingDiverged', 'ClassMismatchError', 'RunResult', 'EvalResult',
                                    'train', 'evaluate', 'evaluate_checkpoint', 'run_plain', 'stack' ]

import collections
import logging

import numpy

from .. import defaults, misc
from ..data import load_dataset, split, SplitSpec, LabelError
from ..linalg import set_checked
from ..models import build_model, LayerFailure, save_checkpoint, load_checkpoint
from ..optim import StiefelSGD
from .config import model_settings, optim_settings

log				= logging.getLogger( __package__ )


class TrainingDiverged( ArithmeticError ):
    """A non-finite loss or gradient; .epoch, .batch (both 1-based) and .layer (or None) locate it."""
    def __init__( self, message, epoch=None, batch=None, layer=None ):
        super( TrainingDiverged, self ).__init__(
            "%s (epoch %s, batch %s, layer %s)" % ( message, epoch, batch, layer or "unknown" ))
        self.epoch		= epoch
        self.batch		= batch
        self.layer		= layer


class ClassMismatchError( ValueError ):
    """A model's classes differ from those of the samples given to it."""


# Per-epoch training loss and validation accuracy, the selected epoch, and the results of the selected
# model.  Accuracies are percentages.  wall_time is informational, and never written to CSVs.
RunResult			= collections.namedtuple( 'RunResult', (
    'train_loss', 'val_accuracy', 'best_epoch', 'test_accuracy', 'confusion', 'seed', 'wall_time', 'config' ))

EvalResult			= collections.namedtuple( 'EvalResult', ( 'accuracy', 'confusion' ))


def stack( samples ):
    """N x 1 x H x W images, and N labels."""
    return ( numpy.stack( [ s.image for s in samples ] )[:, None],
             numpy.array( [ s.label for s in samples ], dtype=numpy.int64 ))


def evaluate( model, samples, batch_size=64 ):
    """Accuracy (100 correct / total) and the K x K confusion matrix (rows: true, columns: predicted)."""
    k				= model.cfg.num_classes
    images, labels		= stack( samples )
    if len( labels ) and ( labels.min() < 0 or labels.max() >= k ):
        raise ClassMismatchError( "Labels up to %d given to a %d class model" % ( labels.max(), k ))
    confusion			= numpy.zeros(( k, k ), dtype=numpy.int64 )
    for start in range( 0, len( labels ), batch_size ):
        predicted		= model.predict( images[start:start + batch_size] )
        numpy.add.at( confusion, ( labels[start:start + batch_size], predicted ), 1 )
    total			= int( confusion.sum() )
    accuracy			= 100.0 * int( numpy.trace( confusion )) / total if total else 0.0
    return EvalResult( accuracy, confusion )


def evaluate_checkpoint( path, directory ):
    """Evaluate a checkpoint on every sample of a dataset directory; the dataset must use the
    checkpoint's classes."""
    model, header		= load_checkpoint( path )
    classes			= tuple( header['classes'] )
    if len( classes ) != model.cfg.num_classes:
        raise ClassMismatchError( "%s names %d classes for a %d class model" % (
            path, len( classes ), model.cfg.num_classes ))
    try:
        samples			= load_dataset( directory, classes=classes )
    except LabelError as exc:
        raise ClassMismatchError( "%s does not use the classes %s of %s: %s" % (
            directory, ", ".join( classes ), path, exc )) from exc
    return evaluate( model, samples )


def diagnose( model, images, grads ):
    """The layer (or parameter) responsible for a non-finite loss or gradient, if one can be found."""
    bad				= [ name for name, g in grads.items() if not numpy.all( numpy.isfinite( g )) ] if grads else []
    previous			= set_checked( True )
    try:
        model.infer( images )
    except LayerFailure as exc:
        return exc.layer
    finally:
        set_checked( previous )
    return bad[0] if bad else None


def train( cfg, train_samples, val_samples, test_samples=None, checkpoint=None, classes=defaults.classes ):
    """Train the configured model; returns the RunResult, and the selected model."""
    begun			= misc.timer()
    optim			= optim_settings( cfg )
    model			= build_model( model_settings( cfg ), seed=cfg.seed, precision=cfg.precision )
    optimizer			= StiefelSGD( model.params, optim )
    rng				= numpy.random.default_rng([ cfg.seed, 1 ])
    images, labels		= stack( train_samples )
    n				= len( labels )
    batches			= ( n + optim.batch_size - 1 ) // optim.batch_size
    log.normal( "Training %r on %d samples (%d batches of %d), %d validation, for up to %d epochs",
                model, n, batches, optim.batch_size, len( val_samples ), cfg.epochs )

    losses, accuracies		= [], []
    best_epoch, best_accuracy, best_state = None, None, None
    for epoch in range( 1, cfg.epochs + 1 ):
        order			= rng.permutation( n )
        total			= 0.0
        for batch in range( 1, batches + 1 ):
            idx			= order[( batch - 1 ) * optim.batch_size:batch * optim.batch_size]
            grads		= None
            try:
                loss, grads, _	= model.loss_and_grads( images[idx], labels[idx], rng=rng )
            except LayerFailure as exc:
                raise TrainingDiverged( "Numeric failure: %s" % exc, epoch, batch, exc.layer ) from exc
            if not numpy.isfinite( loss ) or not all( numpy.all( numpy.isfinite( g )) for g in grads.values() ):
                raise TrainingDiverged( "Non-finite loss %r or gradient" % loss, epoch, batch,
                                        diagnose( model, images[idx], grads ))
            optimizer.step( grads )
            total	       += float( loss ) * len( idx )
            log.detail( "Epoch %3d batch %4d/%d: loss %.6f", epoch, batch, batches, loss )
        losses.append( total / n )
        accuracy		= evaluate( model, val_samples ).accuracy
        accuracies.append( accuracy )
        log.normal( "Epoch %3d: train loss %.6f, validation accuracy %.2f%%", epoch, losses[-1], accuracy )
        if best_accuracy is None or accuracy > best_accuracy:
            best_epoch, best_accuracy, best_state = epoch, accuracy, {
                name: values.copy() for name, values in model.state().items() }
        elif epoch - best_epoch >= cfg.patience:
            log.normal( "No validation improvement for %d epochs; stopping", cfg.patience )
            break

    model.load_state( best_state )
    result			= evaluate( model, test_samples ) if test_samples else None
    if checkpoint:
        save_checkpoint( checkpoint, model, classes=classes,
                         meta={ 'epoch': best_epoch, 'val_accuracy': best_accuracy } )
    run				= RunResult(
        train_loss=losses, val_accuracy=accuracies, best_epoch=best_epoch,
        test_accuracy=result.accuracy if result else None,
        confusion=result.confusion.tolist() if result else None,
        seed=cfg.seed, wall_time=misc.timer() - begun, config=cfg.plain() )
    log.normal( "Selected epoch %d (validation %.2f%%); test accuracy %s", best_epoch, best_accuracy,
                "%.2f%%" % run.test_accuracy if result else "not measured" )
    return run, model


def run_plain( cfg, samples, checkpoint=None, classes=defaults.classes ):
    """Split the samples by cfg.train_ratio and cfg.val_fraction (seeded by cfg.seed), and train."""
    train_samples, val_samples, test_samples = split(
        samples, SplitSpec( cfg.train_ratio, cfg.val_fraction, cfg.seed ))
    return train( cfg, train_samples, val_samples, test_samples, checkpoint=checkpoint, classes=classes )
