"""Reference implementation of the recognition-search scoring protocol.

Wraps an arbitrary frames-to-score adapter behind POST /score and
POST /score_batch so pre-trained video classifiers can serve as search
oracles and evaluation scorers.  Ships with a dependency-free baseline
adapter (mean-pixel logistic) that makes the protocol testable without
any deep-learning stack.
"""

from .adapters import Adapter, BaselineMeanPixel, DelayedReady
from .app import create_app

__version__ = "0.1.0"

__all__ = ["Adapter", "BaselineMeanPixel", "DelayedReady", "create_app", "__version__"]
