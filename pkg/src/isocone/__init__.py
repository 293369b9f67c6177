"""Numerical toolkit for isoperimetric sets in cones over spherical domains.

Subpackages and modules:

* ``spherical_domain``: domain specs, meshing, geometric measurements
* ``neumann_eigen``: Laplace-Beltrami FEM and the Neumann eigenvalue mu1
* ``perimeter``: perimeter/volume of radial graphs and the related bounds
* ``solver``: volume-constrained perimeter minimization
* ``cli``: the ``isocone`` experiment runner
"""

__version__ = "0.1.0"
