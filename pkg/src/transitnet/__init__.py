"""Bus network analysis toolkit: OD-matrix estimation from fare validations
and vehicle GPS, supply-graph construction, community structure, and
express-route intervention simulation.
"""

__version__ = "0.1.0"
