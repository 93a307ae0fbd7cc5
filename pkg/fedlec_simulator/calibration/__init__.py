""" This package provides the local training objectives: the label-skew calibrated FedLEC loss (calibrated
cross-entropy, generalized-calibration penalty and alignment distillation), the plain cross-entropy of FedAvg and
the proximal term of FedProx. Every loss returns its value together with its analytic gradient.
"""
