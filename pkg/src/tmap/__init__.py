"""Membership-mapping learning models and information-theoretic measures of
privacy-leakage, interpretability, and transferability.

Fitted models are immutable and safe to share across threads; independent
fits may run concurrently. All randomness flows through explicit seeds.
"""

from ._linalg import NumericalError
from .mm_core import (
    KernelParams,
    MembershipMappingModel,
    choose_bandwidths,
    feature_matrix,
    feature_row,
    fit_membership_mapping,
    kernel_eval,
    kernel_matrix,
    mm_predict,
    mm_predict_batch,
    select_inducing,
    tau,
)
from .deep_models import (
    CdmmaModel,
    ClassifierModel,
    WideCdmmaModel,
    cdmma_filter,
    classify,
    classify_batch,
    fit_cdmma,
    fit_classifier,
    fit_wide_cdmma,
    pca_projection,
    wide_filter,
)
from .dp_mechanism import DpParams, dp_perturb, dp_quantile, fit_private_classifier
from .vmmbm import VmmbmModel, fit_vmmbm, vmmbm_estimate, vmmbm_estimate_batch
from .info_leakage import (
    LeakageEstimate,
    estimate_leakage,
    gaussian_reference_leakage,
)
from .tai_pipeline import (
    PipelineError,
    SubspaceMaps,
    TaiConfig,
    TaiReport,
    align_target,
    build_subspace_maps,
    fit_source2target,
    fit_target_classifier,
    multitask_predict,
    run_tai,
)
from .data_io import (
    LabeledDataset,
    ParseError,
    SchemaError,
    load_labeled_csv,
    load_matrix_csv,
    save_matrix_csv,
    write_report_json,
)
from .model_store import (
    ModelFormatError,
    ModelVersionError,
    load_classifier,
    save_classifier,
)

__version__ = "0.1.0"

__all__ = [
    "CdmmaModel",
    "ClassifierModel",
    "DpParams",
    "KernelParams",
    "LabeledDataset",
    "LeakageEstimate",
    "MembershipMappingModel",
    "ModelFormatError",
    "ModelVersionError",
    "NumericalError",
    "ParseError",
    "PipelineError",
    "SchemaError",
    "SubspaceMaps",
    "TaiConfig",
    "TaiReport",
    "VmmbmModel",
    "WideCdmmaModel",
    "align_target",
    "build_subspace_maps",
    "cdmma_filter",
    "choose_bandwidths",
    "classify",
    "classify_batch",
    "dp_perturb",
    "dp_quantile",
    "estimate_leakage",
    "feature_matrix",
    "feature_row",
    "fit_cdmma",
    "fit_classifier",
    "fit_membership_mapping",
    "fit_private_classifier",
    "fit_source2target",
    "fit_target_classifier",
    "fit_vmmbm",
    "fit_wide_cdmma",
    "gaussian_reference_leakage",
    "kernel_eval",
    "kernel_matrix",
    "load_classifier",
    "load_labeled_csv",
    "load_matrix_csv",
    "mm_predict",
    "mm_predict_batch",
    "multitask_predict",
    "pca_projection",
    "run_tai",
    "save_classifier",
    "save_matrix_csv",
    "select_inducing",
    "tau",
    "vmmbm_estimate",
    "vmmbm_estimate_batch",
    "wide_filter",
    "write_report_json",
]
