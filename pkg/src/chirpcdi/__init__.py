"""Chirped-QPM SPDC sources and photon-counting coherence-domain imaging, simulated."""

from .detection import DetectorModel, QeCurve, count_interferogram, detector_preset, effective_rate
from .grating import GratingSpec, preset, realize
from .interferometry import Michelson, SampleResponse, envelope, estimate_spectrum, ideal_interferogram
from .material import DispersionModel, Material, default_material, load_material, refractive_index
from .qpm import PumpConfig, Spectrum, design_search, qpm_integral, spdc_spectrum, spectral_fwhm, temperature_sweep
from .scan import ScanProtocol, a_scan, b_scan, default_onion_phantom, onion_protocol

__version__ = "0.1.0"
