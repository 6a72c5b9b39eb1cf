from .base import *
from .attention import *
from .rescnn import *
from .transformer import *
from .registry import *
