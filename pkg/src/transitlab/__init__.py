"""Transit times through a degenerate unstable equilibrium under weak noise.

Submodules:

``potentials``      limit potentials, drift, scale function, Green's-function means
``laplace_ode``     the transform E[exp(lambda T)] by shooting
``spectrum``        ground state and pole residue of the transform
``asymptotics``     large-|lambda| constants and the small-time constant
``limit_sampler``   Monte Carlo draws of the limit law
``finite_eps_sim``  transits of the small-noise diffusion for built-in potentials
``density``         density, distribution function and tail by inversion
``cli``             the ``transitlab`` command
"""

__version__ = "0.1.0"
