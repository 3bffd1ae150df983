"""PulseSense: Wi-Fi CSI vital-sign estimation toolkit.

Parses CSI recordings, runs the amplitude / DC-removal / bandpass /
Savitzky-Golay / windowing pipeline, and trains a compact two-LSTM network
to estimate heart rate and breathing rate or to flag apnea events.
"""

from . import bench, dsp, ingest, metrics, nn, streaming, synth, training

__version__ = "0.1.0"

__all__ = ["bench", "dsp", "ingest", "metrics", "nn", "streaming", "synth",
           "training", "__version__"]
