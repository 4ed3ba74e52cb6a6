"""
peerfx

Randomization-based inference for peer effects in group-assigned populations.
"""

__version__ = "1.0.0"
__author__ = "peerfx developers"
__description__ = "Design-based inference and optimal composition for peer effects"
