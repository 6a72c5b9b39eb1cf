from .metrics import *
from .shuffle import *
from .base import *
