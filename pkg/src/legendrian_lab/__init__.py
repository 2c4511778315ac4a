"""Numerical laboratory for special Legendrian integral cycles in S^5.

Modules: ambient_geometry (forms, J, planes), foliations (charts by
special Legendrian 3-leaves), currents (discrete 2-currents, densities,
tangent cones, Kronecker indices), qgraph and legendrian_pde (multivalued
graphs and their first-order system), unique_continuation (Cauchy transform,
the map w, Carleman diagnostics), degree_lab (stretch maps and degrees),
scenarios and cli (the harness).
"""

__version__ = "0.1.0"
