"""qotp-lab: trap-code quantum authentication, computing on authenticated
data, and quantum one-time programs, runnable and verifiable at desk scale."""

__version__ = "0.1.0"
