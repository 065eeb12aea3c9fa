"""
Offloading Score Toolkit: measures how much of a programming session's
workflow was handed over to AI assistants.
"""
