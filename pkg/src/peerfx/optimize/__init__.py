"""
Optimal group compositions and their fiducial distribution
"""
