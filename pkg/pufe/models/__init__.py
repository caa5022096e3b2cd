# This file makes this directory a Python package.
# It's intended for data models & schemas (Pydantic models, enums and the
# dataclasses passed between services).
