"""
Unit tests for peerfx
"""