"""
Peer-effect estimators, variances and intervals
"""
