import copy

__all__				= [ 'dotdict' ]


class dotdict( dict ):
    """A dict supporting keys containing dots, to access a hierarchy of dotdicts.  If the keys form
    valid attribute names, values are also accessible via dotted attribute name access:

        >>> d = dotdict()
        >>> d["optim.learning_rate"] = 0.007
        >>> d.optim.learning_rate
        0.007

    Any string valid as an attribute name should be valid as a key (a leading '.' is ignored):

        >>> d['.optim.learning_rate']
        0.007

    While the key iterator only returns actual value keys:

        >>> [k for k in d]
        ['optim.learning_rate']

    the test for 'in' returns partially specified keys (so setdefault works):

        >>> 'optim' in d
        True

    but deletion won't allow deleting non-empty levels of the dotdict (but pop will):

        >>> del d['optim']
        Traceback ...
        KeyError: 'cannot del "optim" (partial key)'

    Configuration layers are combined with merge, which descends into sub-dotdicts instead of
    replacing them, and are exported with plain (eg. for JSON encoding):

        >>> d.merge( { "optim": { "momentum": 0.9 }} )
        >>> d.plain()
        {'optim': {'learning_rate': 0.007, 'momentum': 0.9}}

    """
    __slots__ = ()

    def __init__( self, *args, **kwds ):
        """Load from args, update from kwds"""
        dict.__init__( self )
        self.update( *args, **kwds )

    def update( self, *args, **kwds ):
        """Give each dict or k,v iterable, and all keywords a chance to be converted into a dotdict() layer."""
        assert 0 <= len( args ) <= 1, "A single dict or iterable of key/value pairs is allowed"
        if args and isinstance( args[0], dict ) and type(args[0]) is not dict:
            args = (dict.items( args[0] ),)
        for key, val in dict( *args, **kwds ).items():
            self.__setitem__( key, val )

    def __dir__( self ):
        """Present the top-level keys as attributes (and the magic methods)."""
        return sorted( [ a for a in dir( super( dotdict, self )) if a.startswith( '__' ) ] + list( dict.keys( self )))

    @staticmethod
    def _resolve( key ):
        """Return next segment in key as (mine, rest); rest is None at the last segment."""
        mine, rest		= key.lstrip( '.' ), None
        if '.' in mine:
            mine, rest		= mine.split( '.', 1 )
        if not mine or rest == '':
            raise KeyError( 'cannot resolve key "%s"' % ( key ))
        return mine, rest

    def __setitem__( self, key, value ):
        """Assign a value to an item, creating intermediate dotdict layers as required."""
        mine,rest		= self._resolve( key )
        if rest:
            target		= dict.setdefault( self, mine, dotdict() )
            if not isinstance( target, dotdict ):
                raise KeyError( 'cannot set "%s" in "%s" (%r)' % ( rest, mine, target ))
            target[rest]	= value
            return
        if isinstance( value, dict ) and not isinstance( value, dotdict ):
            # When inserting other dicts, convert them to dotdict layers (recursively)
            value		= dotdict( value )
        dict.__setitem__( self, mine, value )

    def __setattr__( self, key, value ):
        """Create attributes as easily as creating keys, so AttributeError should be unexpected."""
        self.__setitem__( key, value )

    def __getitem__( self, key ):
        """Locate an item by key: either via indexing, or attribute access:

           <dotdict>['optim.momentum']
           <dotdict>.optim.momentum

        The hasattr builtin uses getattr to identify the existence of attributes; it must see
        AttributeError if the attribute doesn't exist."""
        mine,rest		= self._resolve( key )
        target			= dict.__getitem__( self, mine )
        if rest is None:
            return target
        if not isinstance( target, dotdict ):
            raise KeyError( 'cannot get "%s" in "%s" (%r); not a dotdict' % ( rest, mine, target ))
        return target[rest]

    def __getattr__( self, key ):
        try:
            return self.__getitem__( key )
        except KeyError as exc:
            raise AttributeError( str( exc ))

    def __contains__( self, key ):
        """True if anything exists in the dotdict at the given key, even another layer of dotdict, so
        that code like setdefault cannot wipe out existing layers."""
        try:
            self.__getitem__( key )
            return True
        except KeyError:
            return False

    def __delitem__( self, key ):
        """Only deletes values or empty layers; a non-empty layer is a partial key."""
        mine,rest		= self._resolve( key )
        target			= dict.__getitem__( self, mine )
        if rest is None:
            if isinstance( target, dotdict ) and len( target ):
                raise KeyError( 'cannot del "%s" (partial key)' % ( mine ))
            return dict.__delitem__( self, mine )
        del target[rest]

    def __deepcopy__( self, memo ):
        return dotdict( ( k, copy.deepcopy( v, memo )) for k, v in dict.items( self ))

    def pop( self, *args ):
        """Pop doesn't take keyword args, but default is optional.  So, we can only
        override this by capturing args."""
        key			= args[0]
        mine,rest		= self._resolve( key )
        if rest is None:
            return dict.pop( self, mine, *args[1:] )
        target                  = dict.__getitem__( self, mine )
        if not isinstance( target, dotdict ):
            raise KeyError( 'cannot pop "%s" in "%s" (%r)' % ( rest, mine, target ))
        return target.pop( rest, *args[1:] )

    def setdefault( self, key, default ):
        if key not in self:
            self[key]           = default
        return self[key]

    def get( self, key, default=None ):
        """The default dict.get is not implemented in terms of __getitem__."""
        try:
            return self.__getitem__( key )
        except KeyError:
            return default

    def merge( self, other ):
        """Overlay another (dot)dict onto this one, descending into layers present in both; any
        dotted keys in 'other' are honoured.  Returns self, for chaining."""
        for key, val in ( other.iteritems() if isinstance( other, dotdict ) else other.items() ):
            if isinstance( val, dict ) and isinstance( self.get( key ), dotdict ):
                self[key].merge( val )
            else:
                self[key]	= copy.deepcopy( val )
        return self

    def plain( self ):
        """A nested plain dict copy (eg. for JSON encoding)."""
        return dict( ( k, v.plain() if isinstance( v, dotdict ) else copy.deepcopy( v ))
                     for k, v in dict.items( self ))

    def iteritems( self ):
        """Issue keys for layers of dotdict() in a.b.c... form."""
        for key,val in dict.items( self ):
            if isinstance( val, dotdict ) and val: # a non-empty sub-dotdict layer
                for subkey,subval in val.iteritems():
                    yield key+'.'+subkey, subval
            else: # values, empty dotdict layers
                yield key, val

    def itervalues( self ):
        for key,val in self.iteritems():
            yield val

    def iterkeys( self ):
        for key,val in self.iteritems():
            yield key

    __iter__			= iterkeys
    keys 			= iterkeys
    values			= itervalues
    items			= iteritems
