"""
Monte-Carlo harness: simulation driver, reporting and validation oracles
"""
