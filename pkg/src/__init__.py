"""
DreamLight Desk - Main package
"""
