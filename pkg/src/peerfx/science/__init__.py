"""
Potential-outcome tables for simulations and oracle checks
"""
