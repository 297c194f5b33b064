from .basics import print_ as print
from .basics import format_ as format
from .basics import full, warn

from .config import Config
from .flags import Flags
from .logger import Logger, TerminalOutput, JSONLOutput
from .workers import Pool

from . import logger
