from .vocab import *
from .wordpiece import *
