"""Reverse-mode differentiation, Adam and gradient checking."""

from src.autodiff.gradcheck import GradcheckReport, gradcheck
from src.autodiff.graph import Graph, Node
from src.autodiff.optim import AdamState, adam_step

__all__ = ['AdamState', 'GradcheckReport', 'Graph', 'Node', 'adam_step', 'gradcheck']
