"""Numerical laboratory for spectral gaps of magnetic Dirac and Schrodinger
operators on high tensor powers of a positive line bundle over model
manifolds (flat tori via lattice gauge fields, the round sphere via a
closed-form backend)."""

from .geometry import (ManifoldKind, ModelManifold, FrameData, GeometryError,
                       build_torus_model, build_sphere_model, frames)
from .clifford import (FiberAlgebra, CliffordError, clifford_generators,
                       omega_d_matrix, cr_endomorphism)
from .gauge import (GaugeField, GaugeError, assign_line_bundle, tensor_power,
                    plaquette_phases, total_flux_winding,
                    random_gauge_transform, apply_gauge, serialize_links,
                    deserialize_links)
from .operators import (SparseHermitianOperator, OperatorError,
                        covariant_laplacian, schrodinger_operator,
                        dirac_operator, dirac_square, lichnerowicz_rhs,
                        restrict_parity, to_dense, compressed_basis,
                        export_matrix_market)
from .eigensolve import (EigenRequest, EigenResult, EigensolveError,
                         IndeterminateCountError, dense_spectrum,
                         lanczos_smallest, count_in_window)
from .analysis import (AnalysisError, GapReport, IndexPrediction,
                       SphereOracle, kernel_threshold, kernel_split,
                       verify_gap, verify_schrodinger, index_prediction,
                       kernel_component_decay, fit_decay_slope,
                       sphere_oracle, sphere_report)
from .covering import (CoveringError, QuotientFamily, GammaTraceEstimate,
                       build_quotient_family, gamma_spectrum_distribution,
                       gamma_index_check, translate_links)

__version__ = "0.1.0"
