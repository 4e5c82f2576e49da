"""
MOTIONTOK Evaluation Module
Task metrics for PE, MP and MIB plus codebook diagnostics and report export.
"""

from .tasks import (
    EvalReport,
    Predictor,
    ReplayOracle,
    LmPredictor,
    pe_metrics,
    mp_metrics,
    mib_metrics,
    mib_windows,
    frozen_pose_baseline,
    linear_interpolation_baseline,
    eval_pe,
    eval_mp,
    eval_mib,
    group_by_label,
    EVALUATORS,
    MP_KEYS,
    MIB_KEYS,
    PE_KEYS,
)
from .codebook import (
    CodebookUsageReport,
    CosineHistogram,
    SphereEntry,
    codebook_usage,
    usage_from_grids,
    usage_labels,
    codebook_cosine_hist,
    pairwise_cosines,
    semantic_spheres,
    accumulate_spheres,
)
from .export import (
    write_json,
    write_report_json,
    write_report_text,
    report_text,
    write_usage_csv,
    write_cosine_csv,
    write_spheres_csv,
)

__all__ = [
    'EvalReport',
    'Predictor',
    'ReplayOracle',
    'LmPredictor',
    'pe_metrics',
    'mp_metrics',
    'mib_metrics',
    'mib_windows',
    'frozen_pose_baseline',
    'linear_interpolation_baseline',
    'eval_pe',
    'eval_mp',
    'eval_mib',
    'group_by_label',
    'EVALUATORS',
    'MP_KEYS',
    'MIB_KEYS',
    'PE_KEYS',
    'CodebookUsageReport',
    'CosineHistogram',
    'SphereEntry',
    'codebook_usage',
    'usage_from_grids',
    'usage_labels',
    'codebook_cosine_hist',
    'pairwise_cosines',
    'semantic_spheres',
    'accumulate_spheres',
    'write_json',
    'write_report_json',
    'write_report_text',
    'report_text',
    'write_usage_csv',
    'write_cosine_csv',
    'write_spheres_csv',
]
