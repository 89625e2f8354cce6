"""Non-Abelian geometric transformations of a tripod atom: dark states,
synthetic gauge fields, phase-loop holonomies, thermal averaging and
population-based reconstruction."""

__version__ = "0.1.0"
