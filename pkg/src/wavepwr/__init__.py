"""Wave-equation graph decomposition and probabilistic waveform relaxation."""
__version__ = "0.1.0"
