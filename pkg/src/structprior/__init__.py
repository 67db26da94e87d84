"""Structure-promoting regularisers for image reconstruction with side information."""

__version__ = "0.1.0"
