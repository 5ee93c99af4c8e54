from __future__ import absolute_import, print_function, division

import configparser
import json

import pytest

from .. import defaults
from .config import *


def test_default_config():
    cfg = validate( default_config() )
    assert cfg.optim.learning_rate == 0.007 and cfg.optim.batch_size == 8 and cfg.optim.momentum == 0.9
    assert cfg['model.frontend.num_layers'] == defaults.conv_layers
    assert model_settings( cfg ).spd_dims == ( 64, 58, 54, 44, 32 )
    assert optim_settings( cfg ).learning_rate == 0.007
    assert cfg.protocol in PROTOCOLS


def test_config_hash():
    cfg = default_config()
    assert config_hash( cfg ) == config_hash( default_config() )
    assert len( config_hash( cfg )) == 12
    # The seed and the execution settings never change the hash; anything else does
    assert config_hash( with_changes( cfg, seed=5, jobs=4 )) == config_hash( cfg )
    assert config_hash( with_changes( cfg, { 'optim.learning_rate': 0.01 } )) != config_hash( cfg )
    assert cfg.optim.learning_rate == 0.007		# with_changes copies


def test_load_config( tmp_path ):
    ini = tmp_path / 'local.cfg'
    ini.write_text( "[Optimizer]\nlearning_rate = 0.02\n\n[Train]\nepochs = 5\n\n"
                    "[Model]\nvariant = SRCNET\n\n[Simulator]\nnoise_sigma = 0.1\n\n[Unknown]\nx = 1\n" )
    layer = tmp_path / 'layer.json'
    layer.write_text( json.dumps({ 'epochs': 7, 'model': { 'frontend': { 'num_layers': 4 },
                                                           'spd_dims': [ 128, 64, 32 ] }}))

    cfg = load_config( files=[ str( ini ), str( layer ) ],
                       overrides=[ 'optim.momentum=0.5', 'protocol=ratio', 'ratios=[0.3,0.6]' ],
                       config_files=False, loader=configparser.ConfigParser() )
    assert cfg.optim.learning_rate == 0.02 and cfg.optim.momentum == 0.5
    assert cfg.epochs == 7						# JSON over .cfg
    assert cfg.model.variant == 'SRCNET' and cfg.model.frontend.num_layers == 4
    assert model_settings( cfg ).spd_dims == ( 128, 64, 32 )		# 4 layers of 32 kept channels
    assert cfg.model.frontend.channels == defaults.conv_channels	# untouched layers survive
    assert cfg.scene.noise_sigma == 0.1
    assert cfg.protocol == 'ratio' and cfg.ratios == [ 0.3, 0.6 ]


def test_config_errors( tmp_path ):
    cfg = default_config()
    for changes in ( { 'epochs': 0 }, { 'patience': 0 }, { 'seeds': True }, { 'seed': -1 },
                     { 'jobs': 1.5 }, { 'protocol': 'grid' }, { 'precision': 'float16' },
                     { 'train_ratio': 1.0 }, { 'ratios': [] }, { 'ratios': [ 0.5, 'x' ] },
                     { 'fractions': [ 0.6 ] }, { 'scenarios': [ 'E' ] }, { 'scene': 3 },
                     { 'model.variant': 'RFT' }, { 'model.dropout_rate': 1.0 },
                     { 'model.variant': 'SRCNET', 'model.frontend.num_layers': 4 },
                     { 'optim.batch_size': 0 }, { 'mystery': 1 } ):
        try:
            with_changes( cfg, changes )
            assert False, "Should have rejected %r" % ( changes, )
        except ConfigError as exc:
            assert isinstance( exc, ValueError )

    with pytest.raises( ConfigError ):
        load_config( files=[ str( tmp_path / 'missing.json' ) ], config_files=False )
    bad = tmp_path / 'bad.json'
    bad.write_text( "{ epochs: 3" )
    with pytest.raises( ConfigError ):
        load_config( files=[ str( bad ) ], config_files=False )
    bad.write_text( "[ 1, 2 ]" )
    with pytest.raises( ConfigError ):
        load_config( files=[ str( bad ) ], config_files=False )
    for override in ( 'epochs', '=3', 'epochs=0', 'epochs.x=1' ):
        with pytest.raises( ConfigError ):
            load_config( overrides=[ override ], config_files=False )
