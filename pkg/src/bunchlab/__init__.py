"""Photon bunching statistics of wavelength-spaced emitters in a waveguide.

Modules
-------
dicke        collective-spin ladder operators and system parameters
steady       exact steady state, scattered rates, correlation functions
conditional  atomic states conditioned on transmitted detections
liouvillian  dense-superoperator numerical ground truth
trajectory   Monte Carlo wavefunction click-stream simulator
timescales   arrival window and hypoexponential relaxation times
bunching     first-click selection, bunch histograms, model fit
records      click/snapshot file formats, CSV tables, manifests
figures      matplotlib report rendering
cli          command-line interface (``bunchlab ...``)
"""

from .dicke import DickeBasis, SystemParams

__version__ = "0.1.0"
__all__ = ["DickeBasis", "SystemParams", "__version__"]
