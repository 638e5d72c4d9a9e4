"""Surface transport and global 2-holonomy for crossed-module 2-bundles.

Modules, bottom up: numerics (fixed-step integrators and quadrature),
algebra (crossed modules, wreath product, 2-arrows), connection (forms,
curvatures, 2-gauge transformations), path_transport (1-holonomy and
gauge transport), surface_transport (local 2-holonomy), bundle (atlases,
cocycles, synthesized bundles), global_holonomy (meshing and gluing) and
cli (scenario runner).
"""
from __future__ import annotations

from .algebra import CrossedModule, TwoArrow, WreathElement, abelian_gerbe, ab_pair, inner, trivial
from .bundle import Atlas, BundleData, Chart, synthesize_bundle, trivial_bundle
from .connection import Form1, Form2, GaugeTransformation, LocalConnection, apply_gauge
from .global_holonomy import GlobalHolonomy, GluingError, Mesh, SurfaceLoop, build_mesh, glue
from .numerics import StepSpec
from .path_transport import ParamPath, SurfacePatch, holonomy1
from .surface_transport import local_2_holonomy

__version__ = "0.1.0"
