"""Encrypted feature fusion toolkit.

Concatenates, linearly projects, approximately l2-normalizes and
match-scores packed feature vectors under leveled homomorphic
encryption, with an exact slot simulator for testing and an
approximation-aware trainer for the projection matrix.
"""

from .backend import make_engine
from .ckks import CkksEngine
from .core import CipherVector, HeError, KeySet, LevelError, OpCounter, PlainVector, ScaleError
from .params import HeParams, ParameterError, desk_profile, paper_profile, pipeline_profile, test_profile
from .simulator import SlotSimulator

__version__ = "0.1.0"
