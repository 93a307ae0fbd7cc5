""" The **experiments** package drives federated experiments from configuration files: it parses and expands the
experiment files, runs single experiments or sweeps, writes the metrics and diagnostic files of every run and
compares completed runs.
"""
