"""Neuroevolution of dynamically growing recurrent and convolutional networks."""

__version__ = "0.1.0"
