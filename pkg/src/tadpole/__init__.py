"""Spectral numerics for the damped Schrodinger operator on the tadpole graph."""

__python_version__ = "3.9"
__author__ = "violetblackdev@gmail.com"
__license__ = "MIT"
__version__ = "0.1.0"

from tadpole.config import *
from tadpole.core import *
from tadpole.errors import *
from tadpole.evolution import *
from tadpole.modes import *
from tadpole.resolvent import *
from tadpole.secular import *
from tadpole.spectrum import *
