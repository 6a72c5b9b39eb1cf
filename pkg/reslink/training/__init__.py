from .loss import *
from .optim import *
from .trainer import *
