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
spdgpr.defaults -- System-wide default (global) values

Anything here may be overridden in a spdgpr.cfg file (see config_files), in the [Optimizer],
[Train], [Model] and [Simulator] sections; values are parsed as JSON where possible.
"""
__all__				= [ 'classes', 'soils', 'elevations_cm', 'frequencies_mhz',
                                    'config_name', 'config_files', 'config_loader',
                                    'config_overrides' ]

import configparser
import json
import logging
import os

from . import misc
from .dotdict import dotdict

log				= logging.getLogger( __package__ )

# Optimizer
learning_rate			= 0.007
momentum			= 0.9
batch_size			= 8
stiefel_momentum		= True	# Momentum also transported on the Stiefel manifold

# Training protocol
epochs				= 50
patience			= 10	# epochs without validation improvement before stopping
seeds				= 10
precision			= 'float32'	# gradient checks always use float64
train_ratio			= 0.7
val_fraction			= 0.5	# of the non-training remainder
scenario_val_fraction		= 1/9	# of the scenario train/val side
ratios				= [ round( 0.1 * i, 1 ) for i in range( 1, 10 ) ]
fractions			= [ round( 0.05 * i, 2 ) for i in range( 0, 9 ) ]
scenarios			= [ 'A', 'B', 'C', 'D' ]

# Model
variant				= 'RCNET'
variants			= ( 'SCNN', 'RCNET', 'SRCNET', 'RESNET' )
num_classes			= 4
reeig_eps			= 1.0e-4
logeig_floor			= 1.0e-10
dropout_rate			= 0.5
ridge				= 1.0e-6	# CovPool ridge, relative to trace/d
unbiased			= False		# CovPool 1/M (False) or 1/(M-1) (True) normalization
spd_dims			= {
    'RCNET':			[  64,  58,  54,  44,  32 ],
    'SRCNET':			[ 256, 235, 217, 179, 128 ],
}
scnn_channels			= [ 16, 32, 64 ]

# Convolutional frontend (the first l layers of a ResNet-34 style stack)
input_h				= 112
input_w				= 60
conv_layers			= 8
conv_channels			= 64
srcnet_keep			= 32
stem_kernel			= 7
transition_layer		= 4	# the stride-2 basic block (1-based layer index)
bn_momentum			= 0.1
bn_eps				= 1.0e-5

# Simulator
classes				= ( 'metal', 'shelter', 'nonmetal', 'empty' )
c				= 299792458.0	# m/s, antenna to ground in air
soils				= {		# velocity m/s, attenuation 1/m
    'gravel':			( 1.1e8, 0.20 ),
    'dry_gravel':		( 1.4e8, 0.10 ),
    'sand':			( 1.2e8, 0.15 ),
    'wet_sand':			( 0.8e8, 0.35 ),
}
elevations_cm			= ( 25, 50, 75, 100 )
frequencies_mhz			= ( 200, 350 )
noise_sigma			= 0.05
clutter_density			= 0.5	# point scatterers per m^2 of imaged section
clutter_amplitude		= 0.15
layer_count			= 2	# horizontal interfaces per scene (max)
sample_interval			= 1.0e-10	# s
trace_samples			= 1024
trace_spacing			= 0.04	# m
aperture			= 8.0	# m
depth_range			= ( 0.5, 1.5 )	# m
aspect_jitter			= 0.15	# +/- fraction of thumbnail box size
per_cell			= 99	# samples per class x elevation cell in the default dataset

config_name			= 'spdgpr.cfg'
config_files			= [
    os.path.join( os.path.dirname( os.path.abspath( __file__ )), config_name ),	# spdgpr install dir
    os.path.join( os.getenv( 'APPDATA', os.sep + 'etc' ), config_name ),	# global app data
    os.path.join( os.path.expanduser( '~' ), '.' + config_name ),		# user home dir
    config_name,								# current dir
]

#
# config_loader	-- Reads spdgpr.cfg files
#
#     Use ExtendedInterpolation, so ${section:key} references may be used between values.  Invoke
# config_loader.read( defaults.config_files + [...] ) before building a configuration.
#
config_loader			= configparser.ConfigParser(
    comment_prefixes=('#',), inline_comment_prefixes=('#',),
    allow_no_value=True, empty_lines_in_values=False,
    interpolation=configparser.ExtendedInterpolation() )

# Each known section's keys land under this prefix of the configuration dotdict
config_sections			= {
    'Optimizer':		'optim',
    'Train':			'',
    'Model':			'model',
    'Simulator':		'scene',
}


@misc.logresult( log=log, log_level=logging.DETAIL )
def config_value( section, key, loader=None ):
    """Parse a configured value as JSON (numbers, lists, true/false), falling back to its string."""
    raw				= ( config_loader if loader is None else loader )[section][key]
    try:
        return json.loads( raw )
    except ( TypeError, ValueError ):
        return raw


def config_overrides( loader=None ):
    """Collect all values from the known sections of the loaded config files into a dotdict, keyed by
    their configuration path (eg. [Optimizer] learning_rate -> optim.learning_rate).  Unknown
    sections are reported and ignored."""
    loader			= config_loader if loader is None else loader
    result			= dotdict()
    shared			= set( loader.defaults() )
    for section in loader.sections():
        if section not in config_sections:
            log.warning( "Ignoring unknown config section [%s]", section )
            continue
        prefix			= config_sections[section]
        for key in loader[section]:
            if key in shared:
                continue
            result[( prefix + '.' + key ) if prefix else key] = config_value( section, key, loader=loader )
    return result
