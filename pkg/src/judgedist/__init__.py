"""Judgment distributions for LLM-as-a-judge evaluation."""

from .distribution import JudgmentDistribution, JudgmentSpace
from .pointwise import METHODS, Preference, compare

__version__ = "0.1.0"

__all__ = ["JudgmentDistribution", "JudgmentSpace", "METHODS", "Preference", "compare", "__version__"]
