"""
Treatment spaces and assignment bookkeeping
"""
