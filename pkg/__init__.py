
#
# Spdgpr -- SPD matrix networks for GPR hyperbola classification
#
# Spdgpr is free software: you can redistribute it and/or modify it under the
# terms of the GNU General Public License as published by the Free Software
# Foundation, either version 3 of the License, or (at your option) any later
# version.
#
# Spdgpr is distributed in the hope that it will be useful, but WITHOUT ANY
# WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR
# A PARTICULAR PURPOSE.  See the GNU General Public License for more details.
#

from __future__ import absolute_import, print_function, division

__author__                      = "The spdgpr developers"
__license__                     = "GPLv3 (or later)"

__all__                         = ["dotdict", "misc"]

# These modules form the public interface of spdgpr; always load them into the
# main spdgpr namespace.  The numerical sub-packages (linalg, spd, optim, nn,
# models, sim, data, harness) are imported explicitly by their users.
from .version  import __version__, __version_info__
from .dotdict  import *
from .misc     import *
