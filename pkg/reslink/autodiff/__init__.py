from .tensor import *
from .ops import *
from .gradcheck import *
