from __future__ import absolute_import, print_function, division

from .radargram import *
from .generate import *
