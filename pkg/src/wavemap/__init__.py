"""Wave maps into a Lorentzian target surface, solved through systems of Lie type.

Modules
-------
expr         expression parsing, evaluation and differentiation
ode          adaptive Dormand-Prince integration, quadrature, erfi
lie          SL(2) actions, fundamental solutions, Riccati reduction
cauchy       Cauchy problems along the diagonal: jets, grids, verification
weierstrass  explicit solutions from generating functions
vessiot      vector fields of the Vessiot algebra and the group law
cli          the ``wavemap`` command
"""

__version__ = "0.1.0"
