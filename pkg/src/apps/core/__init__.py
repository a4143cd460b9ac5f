"""
Core application package
"""
