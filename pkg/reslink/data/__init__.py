from .kb import *
from .embeddings import *
from .checkpoint import *
from .synthetic import *
from .export import *
