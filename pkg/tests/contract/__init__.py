"""
Contract tests for peerfx
"""