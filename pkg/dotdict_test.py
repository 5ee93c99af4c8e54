from __future__ import absolute_import, print_function, division

import copy
import json
import pickle

from .dotdict import dotdict


def test_dotdict():
    # Like dict, construct from mapping, iterable and/or keywords
    assert "a" in dotdict({"a":1})
    assert dotdict({"a":1})["a"] == 1

    assert "b" in dotdict({"a":1}, b=2)
    assert dotdict({"a":1}, b=2)["b"] == 2

    assert "c" in dotdict([("c",3)], d=4)
    assert dotdict([("c",3)], d=4)["c"] == 3

    # Create hierarchies by assignment
    d = dotdict()
    d["a.b"] = 1
    assert d["a.b"] == 1
    assert d.a.b == 1		# attribute access =~= indexing
    d.a.b = 2
    assert d["a.b"] == 2
    assert d[".a.b"] == 2

    # but only one layer at a time by attribute access
    try:
        d.x.y = 99
        assert False, "Shouldn't be able to create y in non-existent x!"
    except AttributeError as e:
        assert "'x'" in str( e )

    # dicts already containing dotted keys are converted when assigned
    d.a.b = {"c.d": 2}
    assert d.a.b.c.d == 2
    assert "b.c.d" in d.a
    assert "b.c.x" not in d.a
    assert "a.b" in d     # Not a value, but is another layer of dotdict

    # Cannot descend through a value
    try:
        d["a.b.c.d.e"] = 1
        assert False, "Shouldn't be able to set within a value"
    except KeyError as e:
        assert "cannot set" in str( e )

    # Keys iterate in dotted form, and partial keys cannot be deleted
    assert list( d ) == [ "a.b.c.d" ]
    try:
        del d["a.b"]
        assert False, "Shouldn't be able to delete a partial key"
    except KeyError as e:
        assert "partial key" in str( e )
    assert d.pop( "a.b.c.d" ) == 2
    del d["a.b.c"]
    assert list( d ) == [ "a.b" ]	# empty layers are issued as keys

    assert d.get( "a.z", "dflt" ) == "dflt"
    assert d.setdefault( "a.z", 3 ) == 3
    assert d.a.z == 3


def test_dotdict_merge():
    base = dotdict( { "optim": { "learning_rate": 0.007, "momentum": 0.9 }, "epochs": 50 } )
    over = { "optim": { "momentum": 0.5 }, "model.variant": "SRCNET" }
    base.merge( over )
    assert base.optim.learning_rate == 0.007
    assert base.optim.momentum == 0.5
    assert base.model.variant == "SRCNET"
    assert base.epochs == 50

    # Merging a dotdict honours its dotted keys, and merged values are copies
    lst = [ 0.7, 0.8 ]
    base.merge( dotdict( { "sweep.ratios": lst } ))
    lst.append( 0.9 )
    assert base.sweep.ratios == [ 0.7, 0.8 ]

    plain = base.plain()
    assert type( plain ) is dict and type( plain["optim"] ) is dict
    assert json.loads( json.dumps( plain, sort_keys=True )) == plain


def test_dotdict_copy():
    d = dotdict( { "model": { "spd_dims": [ 4, 3, 2 ] }} )
    c = copy.deepcopy( d )
    c.model.spd_dims.append( 1 )
    assert d.model.spd_dims == [ 4, 3, 2 ]
    assert isinstance( c.model, dotdict )

    p = pickle.loads( pickle.dumps( d ))
    assert isinstance( p.model, dotdict )
    assert p.model.spd_dims == [ 4, 3, 2 ]
