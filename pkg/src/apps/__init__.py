"""
DreamLight Desk - Applications package
"""
