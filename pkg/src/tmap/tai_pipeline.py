"""Privacy-preserving semi-supervised transfer learning pipeline.

End-to-end flow: perturb the labelled source data for differential privacy,
fit a private source classifier, align target samples into the source space
through paired covariance eigenbases, self-train a target classifier on
pseudo-labelled samples, learn a source-to-target regression over best
reconstructions, and report three information-leakage measures: privacy
leakage of the perturbed release, leakage of interpretable parameters, and
transferability between source and target feature reconstructions.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .deep_models import (
    ClassifierModel,
    WideCdmmaModel,
    classify_batch,
    fit_classifier,
    fit_wide_cdmma,
    pca_projection,
    wide_filter_batch,
)
from .dp_mechanism import DpParams, dp_perturb, fit_private_classifier
from .info_leakage import LeakageEstimate, estimate_leakage
from .mm_core import MembershipMappingModel, fit_membership_mapping, mm_predict_batch
from .vmmbm import VmmbmModel


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


@dataclass(frozen=True)
class SubspaceMaps:
    """Leading covariance eigenbases of the two domains, rows orthonormal."""

    v_src: np.ndarray  # (n_st, p_sr)
    v_tgt: np.ndarray  # (n_st, p_tg)
    n_st: int


@dataclass(frozen=True)
class TaiConfig:
    """Pipeline hyperparameters; ``None`` fields resolve from data dims.

    Defaults: source classifier uses 5 layers, ratio 0.5 and subspace
    dimension min(20, p_src); the initial target classifier uses 1 layer and
    ratio 1; self-training runs ``it_max`` refits with the non-decreasing
    subspace sequence (min(5, p_src), ..., min(20, p_src)) and ratio 0.5.
    Leakage measures are computed on at most ``measure_sample_cap`` rows
    drawn with the run seed.
    """

    dp: DpParams
    source_layers: int = 5
    source_r_max: float = 0.5
    source_subspace_dim: int | None = None
    target_layers: int = 1
    target_r_max: float = 0.5
    initial_target_r_max: float = 1.0
    it_max: int = 4
    target_subspace_seq: tuple[int, ...] | None = None
    alignment_dim: int | None = None
    measure_sample_cap: int = 5000

    def __post_init__(self):
        if self.it_max < 1:
            raise ValueError(f"it_max must be at least 1, got {self.it_max}")
        if self.source_layers < 1 or self.target_layers < 1:
            raise ValueError("layer counts must be positive")
        if self.measure_sample_cap < 4:
            raise ValueError("measure_sample_cap must be at least 4")
        for r in (self.source_r_max, self.target_r_max, self.initial_target_r_max):
            if not 0.0 < r <= 1.0:
                raise ValueError(f"ratios must lie in (0, 1], got {r}")


@dataclass(frozen=True, eq=False)
class TaiReport:
    """Everything one pipeline run produces."""

    privacy_leakage: float
    interpretability: float
    transferability: float
    source_classifier: ClassifierModel
    target_classifier: ClassifierModel
    source2target: MembershipMappingModel
    adversary: VmmbmModel  # estimates private variables from released data
    interpreter: VmmbmModel  # estimates interpretable parameters
    accuracy_source: float | None
    accuracy_multitask: float | None
    config: TaiConfig
    seed: int
    timings: dict[str, float] = field(default_factory=dict)


def build_subspace_maps(
    y_src_plus: np.ndarray, y_tgt: np.ndarray, n_st: int
) -> SubspaceMaps:
    """Leading covariance eigenvectors of each domain's samples."""
    y_src_plus = np.atleast_2d(np.asarray(y_src_plus, dtype=float))
    y_tgt = np.atleast_2d(np.asarray(y_tgt, dtype=float))
    if n_st > min(y_src_plus.shape[1], y_tgt.shape[1]):
        raise ValueError(
            f"n_st={n_st} exceeds min data dimension "
            f"{min(y_src_plus.shape[1], y_tgt.shape[1])}"
        )
    return SubspaceMaps(
        v_src=pca_projection(y_src_plus, n_st),
        v_tgt=pca_projection(y_tgt, n_st),
        n_st=n_st,
    )


def align_target_batch(y: np.ndarray, maps: SubspaceMaps) -> np.ndarray:
    """Map target rows into the source space; identity when dims agree."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    p_sr = maps.v_src.shape[1]
    p_tg = maps.v_tgt.shape[1]
    if y.shape[1] != p_tg:
        raise ValueError(f"expected target dimension {p_tg}, got {y.shape[1]}")
    if p_sr == p_tg:
        return y.copy()
    return (y @ maps.v_tgt.T) @ maps.v_src


def align_target(y: np.ndarray, maps: SubspaceMaps) -> np.ndarray:
    """Single-vector version of :func:`align_target_batch`."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("align_target expects a vector")
    return align_target_batch(y[None, :], maps)[0]


def _resolved_subspace_seq(cfg: TaiConfig, p_src: int) -> tuple[int, ...]:
    if cfg.target_subspace_seq is not None:
        return cfg.target_subspace_seq
    return tuple(min(k, p_src) for k in (5, 10, 15, 20))


def fit_target_classifier(
    labeled, unlabeled: np.ndarray, cfg: TaiConfig, seed: int = 0
) -> ClassifierModel:
    """Self-trained target classifier on aligned samples.

    Starts from a single-layer classifier on the labelled sets (ratio 1,
    subspace dimension min(20, smallest class size - 1)), then runs
    ``cfg.it_max`` rounds: pseudo-label the unlabelled pool with the current
    classifier, refit every class on its labelled plus pseudo-labelled
    samples with the next subspace dimension from the sequence. A class whose
    refit set degenerates below 2 samples keeps its previous model.
    """
    labeled = [np.atleast_2d(np.asarray(m, dtype=float)) for m in labeled]
    unlabeled = np.atleast_2d(np.asarray(unlabeled, dtype=float))
    if any(len(m) == 0 for m in labeled):
        raise ValueError("every class needs at least one labelled sample")
    p = labeled[0].shape[1]
    seq = _resolved_subspace_seq(cfg, p)
    seeds = np.random.SeedSequence(seed).generate_state(cfg.it_max + 1)

    init_dim = max(1, min(20, min(len(m) for m in labeled) - 1, p))
    model = fit_classifier(labeled, init_dim, cfg.initial_target_r_max, 1, int(seeds[0]))

    has_pool = unlabeled.shape[0] > 0
    for k in range(1, cfg.it_max + 1):
        if has_pool:
            pseudo = classify_batch(model, unlabeled)
            sets = [
                np.vstack([labeled[c], unlabeled[pseudo == c + 1]])
                for c in range(len(labeled))
            ]
        else:
            sets = labeled
        n_k = min(seq[min(k - 1, len(seq) - 1)], p)
        per_class: list[WideCdmmaModel] = []
        for c, data in enumerate(sets):
            if len(data) >= 2:
                per_class.append(
                    fit_wide_cdmma(
                        data, n_k, cfg.target_r_max, cfg.target_layers, int(seeds[k])
                    )
                )
            else:
                per_class.append(model.per_class[c])
        model = ClassifierModel(tuple(per_class))
    return model


def source2target_m_max(n_pairs: int) -> int:
    """Inducing-point budget min(ceil(N/2), 1000) for the domain map."""
    return min(math.ceil(n_pairs / 2), 1000)


def fit_source2target(
    source_classifier: ClassifierModel, target_sets, cfg: TaiConfig, seed: int = 0
) -> MembershipMappingModel:
    """Regression from source-model reconstructions to the target samples.

    ``target_sets`` holds, per class, the aligned labelled plus
    pseudo-labelled target samples; the inputs are each class model's best
    reconstruction of those samples.
    """
    inputs = []
    outputs = []
    for c, data in enumerate(target_sets):
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if len(data) == 0:
            continue
        recon, _ = wide_filter_batch(source_classifier.per_class[c], data)
        inputs.append(recon)
        outputs.append(data)
    if not inputs:
        raise ValueError("no target samples to learn the domain map from")
    d_in = np.vstack(inputs)
    d_out = np.vstack(outputs)
    return fit_membership_mapping(d_in, d_out, source2target_m_max(len(d_in)), seed)


def _min_then_argmin(scores: np.ndarray) -> np.ndarray:
    """Per-class minimum over candidate errors, then 1-based argmin.

    ``scores`` has shape (C, k, N): k candidate squared errors per class and
    query. Ties break to the lowest class index.
    """
    return np.argmin(scores.min(axis=1), axis=0) + 1


def _multitask_scores(
    y: np.ndarray,
    target_classifier: ClassifierModel,
    source_classifier: ClassifierModel,
    s2t_model: MembershipMappingModel,
) -> np.ndarray:
    """Candidate squared errors, shape (C, 3, N): target reconstruction,
    source reconstruction pushed through the domain map, raw source
    reconstruction."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n_classes = target_classifier.num_classes
    scores = np.empty((n_classes, 3, len(y)))
    for c in range(n_classes):
        _, err_tgt = wide_filter_batch(target_classifier.per_class[c], y)
        recon_src, err_src = wide_filter_batch(source_classifier.per_class[c], y)
        mapped = mm_predict_batch(s2t_model, recon_src)
        scores[c, 0] = err_tgt
        scores[c, 1] = np.sum((y - mapped) ** 2, axis=1)
        scores[c, 2] = err_src
    return scores


def multitask_predict_batch(
    y: np.ndarray,
    target_classifier: ClassifierModel,
    source_classifier: ClassifierModel,
    s2t_model: MembershipMappingModel,
) -> np.ndarray:
    """Combined label predictions for a batch of aligned target samples."""
    scores = _multitask_scores(y, target_classifier, source_classifier, s2t_model)
    return _min_then_argmin(scores)


def multitask_predict(
    y: np.ndarray,
    target_classifier: ClassifierModel,
    source_classifier: ClassifierModel,
    s2t_model: MembershipMappingModel,
) -> int:
    """Label minimising, over classes, the best of the three candidate errors."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("multitask_predict expects a vector")
    return int(
        multitask_predict_batch(y[None, :], target_classifier, source_classifier, s2t_model)[0]
    )


def _subsample(rows: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if len(rows) <= cap:
        return np.arange(len(rows))
    return np.sort(rng.choice(len(rows), size=cap, replace=False))


def run_tai(
    source_labeled,
    private_x: np.ndarray,
    interpretable_t: np.ndarray,
    target_labeled,
    target_unlabeled: np.ndarray,
    cfg: TaiConfig,
    seed: int = 0,
    eval_labels: np.ndarray | None = None,
) -> TaiReport:
    """Run the full pipeline and report measures, models, and accuracies.

    ``source_labeled`` and ``target_labeled`` are per-class sample matrices;
    ``private_x`` and ``interpretable_t`` are row-aligned with the source
    classes flattened in class order. ``eval_labels``, when given, holds the
    true labels of ``target_unlabeled`` and is used only to evaluate
    accuracies, never for training.
    """
    source_classes = [np.atleast_2d(np.asarray(m, dtype=float)) for m in source_labeled]
    target_classes = [np.atleast_2d(np.asarray(m, dtype=float)) for m in target_labeled]
    private_x = np.atleast_2d(np.asarray(private_x, dtype=float))
    interpretable_t = np.asarray(interpretable_t, dtype=float)
    if interpretable_t.ndim == 1:
        interpretable_t = interpretable_t[:, None]
    target_unlabeled = np.atleast_2d(np.asarray(target_unlabeled, dtype=float))

    if len(source_classes) != len(target_classes):
        raise ValueError(
            f"source has {len(source_classes)} classes, target has {len(target_classes)}"
        )
    if any(len(m) == 0 for m in source_classes):
        raise ValueError("every source class needs at least one sample")
    source_flat = np.vstack(source_classes)
    n_source = len(source_flat)
    if len(private_x) != n_source:
        raise ValueError(
            f"private data has {len(private_x)} rows, expected {n_source}"
        )
    if len(interpretable_t) != n_source:
        raise ValueError(
            f"interpretable data has {len(interpretable_t)} rows, expected {n_source}"
        )
    if eval_labels is not None:
        eval_labels = np.asarray(eval_labels).reshape(-1).astype(int)
        if len(eval_labels) != len(target_unlabeled):
            raise ValueError(
                f"eval labels cover {len(eval_labels)} rows, expected {len(target_unlabeled)}"
            )

    p_src = source_flat.shape[1]
    p_tgt = target_classes[0].shape[1]
    class_sizes = [len(m) for m in source_classes]
    class_offsets = np.cumsum([0] + class_sizes)

    stage_seeds = np.random.SeedSequence(seed).generate_state(12)
    timings: dict[str, float] = {}

    def _run(stage: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            raise PipelineError(stage, str(exc)) from exc
        timings[stage] = time.perf_counter() - start
        return result

    y_plus_flat = _run(
        "dp_perturb", lambda: dp_perturb(source_flat, cfg.dp, int(stage_seeds[0]))
    )
    y_plus_classes = [
        y_plus_flat[class_offsets[c] : class_offsets[c + 1]]
        for c in range(len(source_classes))
    ]

    n_src_dim = cfg.source_subspace_dim or min(20, p_src)
    source_classifier = _run(
        "source_classifier",
        lambda: fit_private_classifier(
            y_plus_classes, n_src_dim, cfg.source_r_max, cfg.source_layers,
            int(stage_seeds[1]),
        ),
    )

    target_all = np.vstack(target_classes + [target_unlabeled])
    n_st = cfg.alignment_dim or min(math.ceil(p_src / 2), p_tgt)
    maps = _run(
        "subspace_maps", lambda: build_subspace_maps(y_plus_flat, target_all, n_st)
    )
    labeled_aligned = [align_target_batch(m, maps) for m in target_classes]
    unlabeled_aligned = align_target_batch(target_unlabeled, maps)

    target_classifier = _run(
        "target_classifier",
        lambda: fit_target_classifier(
            labeled_aligned, unlabeled_aligned, cfg, int(stage_seeds[2])
        ),
    )

    if len(unlabeled_aligned):
        pseudo = classify_batch(target_classifier, unlabeled_aligned)
        target_sets = [
            np.vstack([labeled_aligned[c], unlabeled_aligned[pseudo == c + 1]])
            for c in range(len(labeled_aligned))
        ]
    else:
        target_sets = labeled_aligned
    s2t_model = _run(
        "source2target",
        lambda: fit_source2target(source_classifier, target_sets, cfg, int(stage_seeds[3])),
    )

    cap = cfg.measure_sample_cap
    rng_privacy = np.random.default_rng(int(stage_seeds[7]))
    rng_interp = np.random.default_rng(int(stage_seeds[8]))
    rng_transfer = np.random.default_rng(int(stage_seeds[9]))

    idx = _subsample(y_plus_flat, cap, rng_privacy)
    privacy_est: LeakageEstimate = _run(
        "privacy_leakage",
        lambda: estimate_leakage(y_plus_flat[idx], private_x[idx], int(stage_seeds[4])),
    )

    idx2 = _subsample(y_plus_flat, cap, rng_interp)
    interp_est: LeakageEstimate = _run(
        "interpretability",
        lambda: estimate_leakage(
            y_plus_flat[idx2], interpretable_t[idx2], int(stage_seeds[5])
        ),
    )

    def _transfer_features():
        aligned = np.vstack(labeled_aligned + [unlabeled_aligned])
        labels = multitask_predict_batch(
            aligned, target_classifier, source_classifier, s2t_model
        )
        feat_src = np.empty_like(aligned)
        feat_tgt = np.empty_like(aligned)
        for c in range(source_classifier.num_classes):
            mask = labels == c + 1
            if not mask.any():
                continue
            feat_src[mask], _ = wide_filter_batch(
                source_classifier.per_class[c], aligned[mask]
            )
            feat_tgt[mask], _ = wide_filter_batch(
                target_classifier.per_class[c], aligned[mask]
            )
        return feat_src, feat_tgt

    feat_src, feat_tgt = _run("transfer_features", _transfer_features)
    idx3 = _subsample(feat_tgt, cap, rng_transfer)
    transfer_est: LeakageEstimate = _run(
        "transferability",
        lambda: estimate_leakage(feat_tgt[idx3], feat_src[idx3], int(stage_seeds[6])),
    )

    accuracy_source = accuracy_multitask = None
    if eval_labels is not None and len(unlabeled_aligned):
        src_pred = classify_batch(source_classifier, unlabeled_aligned)
        multi_pred = multitask_predict_batch(
            unlabeled_aligned, target_classifier, source_classifier, s2t_model
        )
        accuracy_source = float(np.mean(src_pred == eval_labels))
        accuracy_multitask = float(np.mean(multi_pred == eval_labels))

    return TaiReport(
        privacy_leakage=privacy_est.value,
        interpretability=interp_est.value,
        transferability=transfer_est.value,
        source_classifier=source_classifier,
        target_classifier=target_classifier,
        source2target=s2t_model,
        adversary=privacy_est.model,
        interpreter=interp_est.model,
        accuracy_source=accuracy_source,
        accuracy_multitask=accuracy_multitask,
        config=cfg,
        seed=seed,
        timings=timings,
    )
