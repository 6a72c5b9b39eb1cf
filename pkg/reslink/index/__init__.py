from .scan import *
from .base import *
