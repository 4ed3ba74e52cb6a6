"""
Exhaustive-enumeration ground truth for small populations
"""
