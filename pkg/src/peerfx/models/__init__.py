"""
Domain models for peerfx
"""
