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
spdgpr.linalg.eig -- Dense tensors and the deterministic symmetric eigendecomposition

All tensors are numpy ndarrays.  Results handed out by this module are read-only; mutation only
happens through the explicit builder, tensor().

sym_eig is built on LAPACK's symmetric solver (numpy.linalg.eigh; tridiagonal reduction followed by
an implicit QR/divide-and-conquer iteration), post-processed into a canonical form:

    - eigenvalues sorted descending
    - each eigenvector's entry of largest magnitude is non-negative
    - exactly equal eigenvalues are ordered by (descending) lexicographic eigenvector comparison
    - one QR re-orthogonalization pass if ||VtV - I||_F drifts past tolerance

so identical input bits always produce identical output bits.
"""

__all__				= [ 'DimensionError', 'NumericError', 'EigResult',
                                    'set_checked', 'checked', 'tensor', 'check_finite',
                                    'sym_part', 'frobenius_inner', 'orthogonality_drift',
                                    'sym_eig', 'eig_apply' ]

import collections
import logging

import numpy

from .. import misc

log				= logging.getLogger( __package__ )


class DimensionError( ValueError ):
    """A tensor's shape does not fit the operation."""


class NumericError( ArithmeticError ):
    """A non-finite value, or a value outside an operation's numeric domain."""


EigResult			= collections.namedtuple( 'EigResult', ( 'values', 'vectors' ))
EigResult.__doc__		= """Eigenvalues (descending) and orthogonal eigenvectors (column i pairs with values[i])."""

#
# Checked mode -- NaN/Inf detection on every layer output (and other invariant checks that cost an
# extra pass over the data).  sym_eig always rejects non-finite input, checked or not.
#
_checked			= False

def set_checked( enabled=True ):
    """Enable/disable checked mode, returning the previous setting."""
    global _checked
    previous, _checked		= _checked, bool( enabled )
    return previous

def checked():
    return _checked


def tensor( data, dtype=None ):
    """Build an immutable, C-contiguous tensor from any array-like."""
    result			= numpy.array( data, dtype=dtype, order='C', copy=True )
    result.setflags( write=False )
    return result


def frozen( x ):
    x.setflags( write=False )
    return x


def check_finite( x, what="tensor" ):
    if not numpy.all( numpy.isfinite( x )):
        raise NumericError( "%s contains non-finite values" % ( what, ))
    return x


def check_square( x, what="tensor" ):
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError( "%s must be a square matrix, not shape %r" % ( what, x.shape ))
    return x


def sym_part( x ):
    """The symmetric part (x + xT) / 2 of a square matrix."""
    x				= numpy.asarray( x )
    check_square( x, "sym_part input" )
    return ( x + x.T ) / 2


def frobenius_inner( a, b ):
    """Sum over i,j of a_ij * b_ij."""
    a, b			= numpy.asarray( a ), numpy.asarray( b )
    if a.shape != b.shape:
        raise DimensionError( "Frobenius inner product of shapes %r and %r" % ( a.shape, b.shape ))
    return float( numpy.vdot( a, b ))


def orthogonality_drift( v ):
    """||VtV - I||_F"""
    return float( numpy.linalg.norm( v.T @ v - numpy.eye( v.shape[1], dtype=v.dtype )))


def drift_tolerance( dtype ):
    """Re-orthogonalization threshold; float32 cannot reach a float64 tolerance."""
    if numpy.dtype( dtype ) == numpy.float64:
        return 1.0e-12
    return 100 * float( numpy.finfo( dtype ).eps )


def sign_normalize( vectors ):
    """Flip each column so its entry of largest magnitude (first, on ties) is non-negative."""
    lead			= numpy.argmax( numpy.abs( vectors ), axis=0 )
    signs			= numpy.where( vectors[lead, numpy.arange( vectors.shape[1] )] < 0, -1, 1 )
    return vectors * signs.astype( vectors.dtype )


def sym_eig( x ):
    """Eigendecomposition of a real symmetric matrix, in canonical (deterministic) form.  The input
    is symmetrized first.  Raises DimensionError if not square, NumericError if not finite."""
    x				= numpy.asarray( x )
    check_square( x, "sym_eig input" )
    check_finite( x, "sym_eig input" )
    dtype			= x.dtype if x.dtype in ( numpy.float32, numpy.float64 ) else numpy.float64
    s				= sym_part( x.astype( dtype, copy=False ))

    values, vectors		= numpy.linalg.eigh( s )
    values, vectors		= values[::-1], vectors[:, ::-1]
    vectors			= sign_normalize( vectors )

    # Runs of exactly equal eigenvalues (eg. c*I) get their columns ordered lexicographically
    ties			= numpy.flatnonzero( values[1:] == values[:-1] )
    if ties.size:
        order			= list( range( values.size ))
        beg			= 0
        while beg < values.size:
            end			= beg + 1
            while end < values.size and values[end] == values[beg]:
                end	       += 1
            if end - beg > 1:
                order[beg:end]	= sorted( range( beg, end ),
                                          key=lambda j: tuple( vectors[:, j] ), reverse=True )
            beg			= end
        vectors			= vectors[:, order]

    drift			= orthogonality_drift( vectors )
    if drift > drift_tolerance( dtype ):
        log.debug( "Re-orthogonalizing %d x %d eigenvectors; drift %.3e", *( vectors.shape + ( drift, )))
        q, r			= numpy.linalg.qr( vectors )
        q		       *= numpy.where( numpy.diag( r ) < 0, -1, 1 ).astype( dtype )
        vectors			= sign_normalize( q )

    log.trace( misc.lazystr( lambda: "sym_eig %d x %d: values %s .. %s" % (
        x.shape[0], x.shape[1], values[0], values[-1] )))
    return EigResult( frozen( numpy.ascontiguousarray( values )),
                      frozen( numpy.ascontiguousarray( vectors )))


def eig_apply( eig, fn ):
    """Rebuild U diag( fn( values )) Ut from an EigResult."""
    u				= eig.vectors
    return sym_part(( u * fn( eig.values )) @ u.T )
