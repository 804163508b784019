"""Early detection of malicious phone calls from call-detail logs."""

__version__ = "0.1.0"
