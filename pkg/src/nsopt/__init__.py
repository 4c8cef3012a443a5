"""nsopt: rewrite nested sum expressions to minimal nesting depth.

The pipeline compiles a nested-sum expression into an element of a tower
of difference-field extensions, solves telescoping equations with a
depth-optimal extension search, and re-emits an equivalent expression of
minimal depth together with an explicit index bound from which the two
agree.
"""

__version__ = "0.1.0"
