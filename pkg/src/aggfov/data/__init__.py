"""Netpbm images, colorspace handling and the synthetic scene dataset."""
