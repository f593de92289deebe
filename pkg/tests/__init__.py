"""
Test suite for clonelab
"""
