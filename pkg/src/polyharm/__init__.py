"""Bounds and minimisers for tangent director fields on convex polyhedra."""
from .conformal import CapBlendSpec, ConformalMapSpec, f0, f1
from .connection import (DefectConfiguration, bcl_infimum, dual_certificate, minimal_connection,
                         polyhedron_lower_bound, polyhedron_lower_bound_report)
from .energy import (appell_upper_bound, energy_grid, energy_quadrature,
                     pointwise_inequality_check, reflection_energy, theorem3_bound)
from .errors import PolyharmError
from .freegroup import Word, abelianized_length, sphere_spelling_bound, spelling_length
from .geometry import build_convex, build_prism, tangent_partition
from .grid import DescentParams, descend, extract_class, init_from_field
from .reflection import (delta, enumerate_classes, h0_class, h1_class, improved_lower_bound,
                         symmetric_lower_bound)
from .topology import HomotopyClass, ReflSymClass, expand_reflection, wrapping_from_surface
from .trial import build_trial_field, family_scan, field_class

__version__ = "0.1.0"
