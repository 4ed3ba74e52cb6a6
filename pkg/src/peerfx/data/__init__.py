"""
Dataset ingestion
"""
