"""
Test suite for peerfx
"""