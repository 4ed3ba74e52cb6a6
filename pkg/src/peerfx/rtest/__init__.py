"""
Randomization tests for sharp and subgroup nulls
"""
