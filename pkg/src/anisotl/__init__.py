"""Numerical toolkit for anisotropic endpoint Littlewood-Paley analysis:
expansive dilations, quasi-norms, filter banks, Peetre maximal functions,
p = infinity smoothness norms, wavelet analysis on the scaling group, and
desk-scale frame decomposition experiments."""

from .errors import (
    Aliasing,
    AnisoError,
    CoverageGap,
    Diverged,
    DivisionUnderflow,
    IllConditioned,
    NotExpansive,
    NotExponential,
    Singular,
    VerificationFailed,
    WindowOutOfDomain,
)
from .grids import GridSpec
from .linalg_expansive import (
    BallDescriptor,
    ExpansiveMatrix,
    QuasiNormStructure,
    ScaleGauge,
    WeightNu,
    build_ellipsoid,
    fractional_power,
    matrix_from_json,
    metric_ball,
    quasi_norm,
    real_matrix_log,
    spatial_gauge,
    transpose_gauge,
    validate_expansive,
)
from .analyzers import (
    AdmissibleVector,
    AnalyzingPair,
    SpectralProfile,
    admissibility_integral,
    make_admissible,
    make_analyzing_pair,
    make_covering_profile,
)
from .field_engine import (
    SampledField,
    ScaleBand,
    convolve_scale,
    dilate_field,
    field_from_closure,
    field_from_spec,
    reconstruct,
    scale_bank,
)
from .peetre import MaximalField, PeetreField, check_submeanvalue, hl_maximal, peetre_maximal
from .norms import (
    NormParams,
    NormReport,
    besov_norm,
    embedding_check,
    tl_norm_inf,
    tl_norm_q,
    tl_peetre_norm,
    window_equivalence_check,
)
from .group_analysis import (
    ControlWeight,
    EnvelopeSpec,
    GroupField,
    GroupGrid,
    GroupPoint,
    WaveletField,
    control_weight,
    envelope_compare,
    group_inv,
    group_mul,
    group_point,
    local_maximal,
    modular,
    pti_norm,
    quasi_regular,
    reproducing_check,
    translation_bound_check,
    wavelet_transform,
    weight_v,
    wiener_amalgam_norm,
)
from .frames import (
    FrameSystem,
    IndexSet,
    MolecularSystem,
    analysis,
    atom_field,
    dual_reconstruct,
    frame_bounds,
    molecule_check,
    moment_problem,
    sample_index_set,
    sequence_norm,
    synthesis,
)
from .suite import SuiteSpec, suite_generate

__all__ = [name for name in dir() if not name.startswith("_")]
