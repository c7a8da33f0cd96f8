"""Static security and privacy scanner for VR Android application packages."""

__version__ = "0.1.0"
