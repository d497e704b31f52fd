"""Moyal star-product reconstruction of the unitary representations of M(3).

Library layout:

* ``expr``          -- minimal exact computer-algebra substrate
* ``lie``           -- the Lie algebra m(3) and group M(3), exact arithmetic
* ``orbit``         -- coadjoint orbits, flat chart, energy functions, forms
* ``moyal``         -- star products, brackets, covariance verification
* ``repn``          -- representation operators, Fourier conjugation, checks
* ``polarization``  -- star-polarization family and its residuals
* ``report``        -- machine-readable check reports
* ``cli``           -- command-line verification front end
"""

__version__ = "0.1.0"
