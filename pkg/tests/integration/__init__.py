"""
Integration tests for peerfx
"""