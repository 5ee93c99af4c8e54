from __future__ import absolute_import, print_function, division

from .stiefel import *
