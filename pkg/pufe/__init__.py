# This file makes the 'pufe' directory a Python package.
# The command-line entry point lives in pufe.main; the root main.py only
# forwards to it.
