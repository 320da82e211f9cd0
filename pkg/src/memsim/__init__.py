"""Circuit simulator and benchmark harness for hybrid memristor-CMOS logic."""

__version__ = "0.1.0"
