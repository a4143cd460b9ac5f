"""
Settings modules: base (shared defaults), local (CLI runs), test (pytest)
"""
