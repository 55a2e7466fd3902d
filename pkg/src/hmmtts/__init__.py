"""HMM-based statistical parametric speech synthesis for Spanish.

Pipeline: corpus -> text processing and acoustic analysis -> embedded
HMM training -> duration planning and parameter generation -> vocoder.
"""

__version__ = "0.1.0"
