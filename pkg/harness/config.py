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
spdgpr.harness.config -- The training configuration (a dotdict), and how it is resolved

Lowest to highest priority:

    1. spdgpr.defaults
    2. spdgpr.cfg files ([Optimizer], [Train], [Model], [Simulator]); see defaults.config_files
    3. JSON configuration files, mirroring the dotdict (eg. { "model": { "variant": "SRCNET" }})
    4. key.path=<JSON value> overrides (eg. optim.learning_rate=0.01)

Every resolved configuration is validated; any problem is a ConfigError.
"""

__all__				= [ 'ConfigError', 'PROTOCOLS', 'default_config', 'load_config', 'validate',
                                    'config_hash', 'with_changes', 'model_settings', 'optim_settings' ]

import configparser
import copy
import json
import logging
import os

from .. import defaults, misc
from ..dotdict import dotdict
from ..data.dataset import SCENARIOS
from ..models import model_config
from ..optim import optimizer_config

log				= logging.getLogger( __package__ )

PROTOCOLS			= ( 'plain', 'ratio', 'mislabel', 'scenario' )

# Keys that never change a run's results, and so stay out of its config_hash
UNHASHED			= ( 'seed', 'seeds', 'jobs', 'data' )


class ConfigError( ValueError ):
    """A configuration file, value or combination of values is unusable."""


def default_config():
    cfg				= dotdict()
    cfg.optim			= {
        'learning_rate':	defaults.learning_rate,
        'momentum':		defaults.momentum,
        'batch_size':		defaults.batch_size,
        'stiefel_momentum':	defaults.stiefel_momentum,
    }
    cfg.model			= {
        'variant':		defaults.variant,
        'num_classes':		defaults.num_classes,
        'spd_dims':		None,
        'reeig_eps':		defaults.reeig_eps,
        'logeig_floor':		defaults.logeig_floor,
        'dropout_rate':		defaults.dropout_rate,
        'ridge':		defaults.ridge,
        'unbiased':		defaults.unbiased,
        'scnn_channels':	list( defaults.scnn_channels ),
        'frontend': {
            'num_layers':	defaults.conv_layers,
            'channels':		defaults.conv_channels,
            'srcnet_keep':	defaults.srcnet_keep,
            'input_h':		defaults.input_h,
            'input_w':		defaults.input_w,
            'stem_kernel':	defaults.stem_kernel,
            'transition_layer':	defaults.transition_layer,
            'bn_momentum':	defaults.bn_momentum,
            'bn_eps':		defaults.bn_eps,
        },
    }
    cfg.scene			= {}
    cfg.protocol		= 'plain'
    cfg.data			= None
    cfg.epochs			= defaults.epochs
    cfg.patience		= defaults.patience
    cfg.seed			= 0
    cfg.seeds			= defaults.seeds
    cfg.precision		= defaults.precision
    cfg.train_ratio		= defaults.train_ratio
    cfg.val_fraction		= defaults.val_fraction
    cfg.scenario_val_fraction	= defaults.scenario_val_fraction
    cfg.ratios			= list( defaults.ratios )
    cfg.fractions		= list( defaults.fractions )
    cfg.scenarios		= list( defaults.scenarios )
    cfg.jobs			= 1
    return cfg


def model_settings( cfg ):
    return model_config( cfg.model )


def optim_settings( cfg ):
    return optimizer_config( cfg.optim.plain() )


def validate( cfg ):
    """Checks every value of a configuration; returns it, or raises ConfigError."""
    unknown			= set( dict.keys( cfg )) - set( dict.keys( default_config() ))
    if unknown:
        raise ConfigError( "Unknown configuration %s" % ", ".join( sorted( unknown )))
    try:
        model_settings( cfg )
        optim_settings( cfg )
    except ( TypeError, ValueError ) as exc:
        raise ConfigError( "Invalid configuration: %s" % exc )

    def integer( key, minimum=1 ):
        value			= cfg[key]
        if isinstance( value, bool ) or not isinstance( value, int ) or value < minimum:
            raise ConfigError( "%s must be an integer >= %d, not %r" % ( key, minimum, value ))

    for key in ( 'epochs', 'patience', 'seeds', 'jobs' ):
        integer( key )
    integer( 'seed', minimum=0 )
    if cfg.protocol not in PROTOCOLS:
        raise ConfigError( "Unknown protocol %r; one of %s" % ( cfg.protocol, ", ".join( PROTOCOLS )))
    if cfg.precision not in ( 'float32', 'float64' ):
        raise ConfigError( "Precision must be float32 or float64, not %r" % ( cfg.precision, ))
    try:
        for key in ( 'train_ratio', 'val_fraction', 'scenario_val_fraction' ):
            if not 0 < cfg[key] < 1:
                raise ConfigError( "%s must lie in (0,1), not %r" % ( key, cfg[key] ))
        if not cfg.ratios or not all( 0 < r < 1 for r in cfg.ratios ):
            raise ConfigError( "Sweep ratios must lie in (0,1): %r" % ( cfg.ratios, ))
        if not cfg.fractions or not all( 0 <= f <= 0.5 for f in cfg.fractions ):
            raise ConfigError( "Mislabel fractions must lie in [0,0.5]: %r" % ( cfg.fractions, ))
    except TypeError as exc:
        raise ConfigError( "Invalid ratio or fraction: %s" % exc )
    if not cfg.scenarios or not all( s in SCENARIOS for s in cfg.scenarios ):
        raise ConfigError( "Scenarios must be among %s: %r" % ( ", ".join( SCENARIOS ), cfg.scenarios ))
    if not isinstance( cfg.scene, dict ):
        raise ConfigError( "Simulator settings (scene) must be an object, not %r" % ( cfg.scene, ))
    return cfg


def load_config( files=(), overrides=(), config_files=True, loader=None ):
    """Resolve a configuration from the defaults, the spdgpr.cfg files (unless config_files is False),
    any further .cfg and .json files, and key.path=<JSON> overrides."""
    cfg				= default_config()
    files			= list( files or [] )
    missing			= [ f for f in files if not os.path.isfile( f ) ]
    if missing:
        raise ConfigError( "No such configuration file: %s" % ", ".join( missing ))
    ini				= [ f for f in files if not f.lower().endswith( '.json' ) ]
    if config_files or ini:
        loader			= defaults.config_loader if loader is None else loader
        try:
            loaded		= loader.read(( defaults.config_files if config_files else [] ) + ini )
            cfg.merge( defaults.config_overrides( loader ))
        except ( configparser.Error, ValueError ) as exc:
            raise ConfigError( "Invalid config file: %s" % exc )
        log.normal( "Loaded config files: %r", loaded )
    for path in files:
        if path not in ini:
            try:
                with open( path, 'r', encoding='utf-8' ) as f:
                    layer	= json.load( f )
            except ValueError as exc:
                raise ConfigError( "Invalid JSON configuration %s: %s" % ( path, exc ))
            if not isinstance( layer, dict ):
                raise ConfigError( "JSON configuration %s must be an object" % path )
            cfg.merge( layer )
            log.detail( "Merged JSON configuration %s", path )
    for item in overrides or []:
        key, sep, value		= item.partition( '=' )
        if not sep or not key.strip():
            raise ConfigError( "Override %r is not key.path=<value>" % item )
        try:
            value		= json.loads( value )
        except ValueError:
            pass
        try:
            cfg[key.strip()]	= value
        except KeyError as exc:
            raise ConfigError( "Cannot override %s: %s" % ( key, exc ))
        log.detail( "Override %s = %r", key.strip(), value )
    return validate( cfg )


def config_hash( cfg ):
    """The first 12 hex digits of the SHA-256 of the canonical JSON of everything that determines a
    run's results, except its seed."""
    plain			= cfg.plain()
    for key in UNHASHED:
        plain.pop( key, None )
    return misc.digest( plain )


def with_changes( cfg, changes=None, **kwds ):
    """A validated copy of cfg with some (dotted) keys replaced."""
    result			= copy.deepcopy( cfg )
    for key, value in dict( changes or {}, **kwds ).items():
        result[key]		= value
    return validate( result )
