from __future__ import absolute_import, print_function, division

from .config import *
from .train import *
from .experiments import *
from .gradcheck import *
