# This file makes this directory a Python package.
# It holds the numerical modules: sketching, completion, online learners,
# the space mapper, the expert ensemble, stream simulation and experiments.
