from .filters import (
    BiquadCascade,
    BiquadSection,
    FilterSpec,
    FilterState,
    design_bandpass,
    filter_values,
    filter_values_zero_phase,
    frequency_response,
)
from .pipeline import (
    AmplitudeSeries,
    PipelineConfig,
    WindowSegment,
    amplitude,
    apply_filter,
    band_for_mode,
    read_segment_dump,
    remove_dc,
    run_pipeline,
    run_pipeline_config,
    savgol_smooth,
    segment,
    sequential_column_mean,
    standardize,
    window_length,
    write_segment_dump,
)
from .savgol import SavGolKernel, mirror_pad, savgol_kernel, smooth_sample, smooth_values

__all__ = [
    "AmplitudeSeries", "BiquadCascade", "BiquadSection", "FilterSpec",
    "FilterState", "PipelineConfig", "SavGolKernel", "WindowSegment",
    "amplitude", "apply_filter", "band_for_mode", "design_bandpass",
    "filter_values", "filter_values_zero_phase", "frequency_response",
    "mirror_pad", "read_segment_dump", "remove_dc", "run_pipeline",
    "run_pipeline_config", "savgol_kernel", "savgol_smooth", "segment",
    "sequential_column_mean", "smooth_sample", "smooth_values", "standardize",
    "window_length", "write_segment_dump",
]
