"""Two-dimensional and complex truncated moment problems via operator models."""
from .core import (ZERO, AtomicMeasure, BoxSpec, ComplexMomentTable, ExtIndex, ExtMomentTable,
                   MissingMoment, MomentError, MomentTable2D, enumerate_box, index_order,
                   index_position, match_measures, moments_of_measure, random_measure,
                   real_moments_of_measure)
from .gram import GnsSpace, GramMatrix, NotHermitian, NotPsd, build_gram_2d, build_gram_extended, gns_construct, psd_check
from .linsolve import AffineSet, Inconsistent, affine_sample, parametric_gauss, stacked_solve
from .extended import (CayleyPair, OperatorPair, Tolerances, build_operators, cayley, check_recurrences,
                       joint_spectral_measure, solve_extended, torus_transform, trig_moment)

__version__ = "0.1.0"
