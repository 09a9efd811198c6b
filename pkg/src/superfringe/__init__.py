"""Super-resolving phase interferometry with coherent states and binned homodyne detection."""
from ._backend import BACKEND
from .binning import (
    BinaryScheme,
    MultiScheme,
    ScanSummary,
    count_fringes,
    fwhm,
    min_sensitivity,
    optimize_spacing,
    response,
    response_a0,
    response_binary,
    response_multi,
    sensitivity,
    sensitivity_min_closed_form,
    summarize,
    variance,
    visibility,
)
from .mcsim import EmpiricalCurve, McConfig, empirical_sensitivity, simulate_scan
from .quadmodel import CoherentSource, bin_probability, intensity_response, output_mean_p, p_density

__version__ = "0.1.0"
