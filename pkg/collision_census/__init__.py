"""
Collision Census - random-walk density and network-size estimation toolkit
"""

__version__ = "1.0.0"
