"""Chart constituency parsing with greedy in-order and top-down decoders, an
exact CKY decoder, a dynamic boundary oracle, and optional history tracking."""

__version__ = "0.1.0"

from .config import Config
from .model import Model
from .trees import BinaryTree, LabeledSpan, Leaf, Tree

__all__ = ["Config", "Model", "Tree", "Leaf", "BinaryTree", "LabeledSpan", "__version__"]
