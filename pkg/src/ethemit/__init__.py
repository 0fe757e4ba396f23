"""Software modem and analysis toolkit for a cable-emanation covert channel."""

__version__ = "0.1.0"
