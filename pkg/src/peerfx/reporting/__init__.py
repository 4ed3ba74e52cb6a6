"""
Machine-readable output writers
"""
