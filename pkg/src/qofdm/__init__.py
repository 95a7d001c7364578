"""Link-level simulator for OFDM with a low-resolution receive ADC."""

__version__ = "0.1.0"
