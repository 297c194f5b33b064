from . import errors
from .fields import BoundingBox, Interval, Jet2, ScalarField, builtin_field
from .parser import parse_field
from .quadrature import QuadratureConfig
from .identities import SuiteConfig, run_suite
