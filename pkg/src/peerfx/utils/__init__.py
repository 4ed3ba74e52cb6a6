"""
Utility functions for peerfx
"""
