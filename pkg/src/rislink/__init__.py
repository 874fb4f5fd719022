"""Simulator of two coexisting RIS-assisted QPSK links sharing an indoor
RF environment, with greedy 1-bit surface optimization of link KPIs."""

__version__ = "0.1.0"
