"""
This package contains a collection of low level tools used throughout *comact*.
"""
