# Two-scale homogenization laboratory
__version__ = "1.0.0"
