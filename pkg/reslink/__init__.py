from reslink.util import *
from reslink.config import *
from reslink.tokenizer import *
from reslink.encoder import *
from reslink.training import *
from reslink.index import *
from reslink.data import *
from reslink.probes import *
from reslink.visualizer import *
from reslink import autodiff

__version__ = '0.1.0'
