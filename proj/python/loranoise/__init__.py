# Copyright (c) 2026 The loranoise Authors
# SPDX-License-Identifier: Apache-2.0
"""Low-rank fine-tuning noise toolkit: python surface of the C++ core."""

from loranoise._core import (  # noqa: F401
    AdapterLayer,
    CrossProductStats,
    Dataset,
    DistanceReport,
    DivergenceError,
    DpConfig,
    GramElementStats,
    LinearFit,
    Matrix,
    MiaMetrics,
    Moments,
    NoiseProfile,
    NoiseStats,
    RngStream,
    ShapeError,
    Split,
    SplitSet,
    ToyModel,
    TrainMethod,
    TrainResult,
    binned_tv_vs_normal,
    calibrate_threshold,
    chi_squared_raw_moment,
    clip_gradient,
    compare_noise_profiles,
    compute_moments,
    cross_product_stats,
    distance_to_gaussian,
    dkw_bound,
    dpsgd_batch_gradient,
    frobenius_inner,
    frobenius_norm,
    gram_element_stats,
    init_adapter,
    ks_two_sample,
    ks_vs_normal,
    layer_gradient_norms,
    linear_fit,
    lora_noisy_batch_gradient,
    lyapounov_l3,
    matmul,
    max_abs,
    max_abs_diff,
    mean,
    median,
    membership_score,
    membership_scores,
    mia_evaluate,
    noise_measure,
    noise_term,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    pairwise_matrix_mean,
    pairwise_sum,
    per_sample_grad_norms,
    projected_update_reference,
    row_l2_norms,
    row_noise_stats,
    sample_chi_squared,
    sample_gaussian_matrix,
    sample_projection_noise,
    sample_variance_gamma_sym,
    spearman,
    synth_dataset,
    train,
    transpose,
)

__version__ = "0.1.0"
