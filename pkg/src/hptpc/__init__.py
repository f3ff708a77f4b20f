"""Compilation and shot-level simulation of Hermitian-preserving
trace-preserving maps as single CPTP maps with classical reweighting."""

__version__ = "0.1.0"

from .channels import (ChoiMatrix, DensityMatrix, Observable, SignedKrausMap,
                       Superoperator, apply, choi_from_map, classify, compose,
                       signed_kraus_from_choi, superop_from_map, tensor)
from .compiler import (CompiledCptp, TreePlan, build_tree_plan, compile_map,
                       positive_negative_baseline, verify_tree_plan)
from .noise import NoiseSpec, build_channel, invert_channel
from .sampler import (EstimatorResult, estimate, measure_observable,
                      sample_branch, var_direct, var_haar, var_haar_unital,
                      var_ours_mean, var_ours_single)
